#include "mayengine/algebra.hpp"

#include <algorithm>
#include <stdexcept>

namespace may::alg {

// ---------------------------------------------------------------------------
// Registry

Registry Registry::e1(int max_stem, bool classical) {
    Registry reg;
    reg.classical_ = classical;
    // h_{i0}: stem 2^i - 2; h_{ij} (j>0): stem 2^j(2^i - 1) - 1.  Enumerate in
    // (i,j)-lexicographic order; stems grow with both indices so the bounds
    // below are exhaustive.
    for (int i = 1;; ++i) {
        long long s0 = (1LL << i) - 2;
        if (s0 > max_stem) break;
        for (int j = 0;; ++j) {
            long long s, w;
            if (j == 0) {
                s = (1LL << i) - 2;
                w = (1LL << (i - 1)) - 1;
            } else {
                s = (1LL << j) * ((1LL << i) - 1) - 1;
                w = (1LL << (j - 1)) * ((1LL << i) - 1);
            }
            if (s > max_stem) break;
            GeneratorInfo g;
            g.name = "h" + std::to_string(i) + std::to_string(j);
            g.deg = {i, (int)s, 1, classical ? 0 : (int)w};
            g.kind = GeneratorInfo::E1Primitive;
            g.i = i;
            g.j = j;
            reg.add(std::move(g));
        }
    }
    return reg;
}

int Registry::add(GeneratorInfo g) {
    if (index_.count(g.name))
        throw std::invalid_argument("Registry: duplicate generator name " + g.name);
    if (classical_) g.deg.w = 0;
    int idx = (int)gens_.size();
    index_[g.name] = idx;
    gens_.push_back(std::move(g));
    return idx;
}

std::optional<int> Registry::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// Monomial

bool Monomial::is_unit() const {
    if (tau_exp != 0) return false;
    for (uint8_t x : e)
        if (x) return false;
    return true;
}

MayDegree Monomial::degree(const Registry& reg) const {
    MayDegree d{0, 0, 0, reg.classical() ? 0 : -tau_exp};
    for (int i = 0; i < (int)e.size(); ++i) {
        if (!e[i]) continue;
        const MayDegree& g = reg.info(i).deg;
        d.m += e[i] * g.m;
        d.s += e[i] * g.s;
        d.f += e[i] * g.f;
        d.w += e[i] * g.w;
    }
    if (reg.classical()) d.w = 0;
    return d;
}

int Monomial::may_filtration(const Registry& reg) const {
    int m = 0;
    for (int i = 0; i < (int)e.size(); ++i)
        if (e[i]) m += e[i] * reg.info(i).deg.m;
    return m;
}

Monomial Monomial::times(const Monomial& o) const {
    if (e.size() != o.e.size()) throw std::invalid_argument("Monomial: registry mismatch");
    Monomial r{tau_exp + o.tau_exp, e};
    for (size_t i = 0; i < e.size(); ++i) {
        int v = r.e[i] + o.e[i];
        if (v > 255) throw std::overflow_error("Monomial: exponent overflow");
        r.e[i] = (uint8_t)v;
    }
    return r;
}

std::string Monomial::str(const Registry& reg) const {
    std::string out;
    if (tau_exp == 1) out = "tau";
    else if (tau_exp > 1) out = "tau^" + std::to_string(tau_exp);
    for (int i = 0; i < (int)e.size(); ++i) {
        if (!e[i]) continue;
        if (!out.empty()) out += "*";
        out += reg.info(i).name;
        if (e[i] > 1) out += "^" + std::to_string((int)e[i]);
    }
    return out.empty() ? "1" : out;
}

// ---------------------------------------------------------------------------
// Element

static void normalize(std::vector<Monomial>& ms) {
    std::sort(ms.begin(), ms.end());
    // XOR semantics: pairs cancel.
    std::vector<Monomial> out;
    for (size_t i = 0; i < ms.size();) {
        size_t j = i;
        while (j < ms.size() && ms[j] == ms[i]) ++j;
        if ((j - i) % 2) out.push_back(std::move(ms[i]));
        i = j;
    }
    ms = std::move(out);
}

Element Element::operator+(const Element& o) const {
    Element r;
    r.ms.reserve(ms.size() + o.ms.size());
    r.ms.insert(r.ms.end(), ms.begin(), ms.end());
    r.ms.insert(r.ms.end(), o.ms.begin(), o.ms.end());
    normalize(r.ms);
    return r;
}

Element Element::times(const Element& o) const {
    Element r;
    r.ms.reserve(ms.size() * o.ms.size());
    for (const auto& a : ms)
        for (const auto& b : o.ms) r.ms.push_back(a.times(b));
    normalize(r.ms);
    return r;
}

Element Element::times_tau(int k) const {
    Element r = *this;
    for (auto& m : r.ms) m.tau_exp += k;
    normalize(r.ms);
    return r;
}

std::optional<MayDegree> Element::degree(const Registry& reg) const {
    if (ms.empty()) return std::nullopt;
    MayDegree d = ms.front().degree(reg);
    for (size_t i = 1; i < ms.size(); ++i)
        if (ms[i].degree(reg) != d)
            throw std::invalid_argument("Element::degree: inhomogeneous element");
    return d;
}

int Element::min_may_filtration(const Registry& reg) const {
    if (ms.empty()) throw std::invalid_argument("min_may_filtration: zero element");
    int m = ms.front().may_filtration(reg);
    for (size_t i = 1; i < ms.size(); ++i)
        m = std::min(m, ms[i].may_filtration(reg));
    return m;
}

std::string Element::str(const Registry& reg) const {
    if (ms.empty()) return "0";
    std::string out;
    for (const auto& m : ms) {
        if (!out.empty()) out += " + ";
        out += m.str(reg);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

void check_window(const Registry&, int s, int f, int max_stem) {
    if (s > max_stem || s < 0)
        throw std::out_of_range("window-exceeded: stem " + std::to_string(s) +
                                " outside [0," + std::to_string(max_stem) + "]");
    if (f < 0 || f > 4 * max_stem)
        throw std::out_of_range("window-exceeded: filtration " + std::to_string(f));
}

// DFS over generators: decide the exponent of gen idx, with the residual
// (m,s,f,w) to be consumed by gens idx.. (m < 0 means "free"/tri-graded).
void dfs(const Registry& reg, int idx, int m, int s, int f, int w, bool use_m,
         Monomial& cur, std::vector<Monomial>& out, bool tau_free, bool classical) {
    if (s < 0 || f < 0) return;
    if (use_m && m < 0) return;
    if (idx == reg.size()) {
        if (s != 0 || f != 0) return;
        if (use_m && m != 0) return;
        if (classical) {
            if (w != 0) return;  // weights collapse to zero classically
            out.push_back(cur);
        } else {
            // Monomial weight = (sum of gen weights) - tau_exp.  The residual
            // here is w_target - sum, so tau_exp = -residual and the residual
            // must be <= 0.
            if (w > 0) return;
            if (tau_free && w != 0) return;
            Monomial fin = cur;
            fin.tau_exp = -w;
            out.push_back(fin);
        }
        return;
    }
    const MayDegree& g = reg.info(idx).deg;
    for (int k = 0;; ++k) {
        if (k > 255) throw std::overflow_error("enumerate_monomials: exponent overflow");
        int ns = s - k * g.s, nf = f - k * g.f, nm = m - k * g.m, nw = w - k * g.w;
        if (ns < 0 || nf < 0 || (use_m && nm < 0)) break;
        cur.e[idx] = (uint8_t)k;
        dfs(reg, idx + 1, nm, ns, nf, nw, use_m, cur, out, tau_free, classical);
        if (g.s == 0 && g.f == 0 && g.m == 0 && g.w == 0) break;  // degenerate guard
    }
    cur.e[idx] = 0;
}

}  // namespace

std::vector<Monomial> enumerate_monomials(const Registry& reg, const MayDegree& deg,
                                          bool tau_free, int max_stem) {
    check_window(reg, deg.s, deg.f, max_stem);
    std::vector<Monomial> out;
    Monomial cur = Monomial::one(reg);
    dfs(reg, 0, deg.m, deg.s, deg.f, deg.w, true, cur, out, tau_free, reg.classical());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Monomial> enumerate_monomials(const Registry& reg, const TriDegree& deg,
                                          bool tau_free, int max_stem) {
    check_window(reg, deg.s, deg.f, max_stem);
    std::vector<Monomial> out;
    Monomial cur = Monomial::one(reg);
    dfs(reg, 0, 0, deg.s, deg.f, deg.w, false, cur, out, tau_free, reg.classical());
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// d1

// d1(h_{ij}) = sum_{0 < k < i} h_{kj} * h_{i-k, k+j}.
static Element d1_of_generator(const Registry& reg, int idx) {
    const GeneratorInfo& g = reg.info(idx);
    if (g.kind != GeneratorInfo::E1Primitive)
        throw std::invalid_argument("d1: generator " + g.name + " is not an E1 primitive");
    Element out = Element::zero();
    for (int k = 1; k < g.i; ++k) {
        auto a = reg.find("h" + std::to_string(k) + std::to_string(g.j));
        auto b = reg.find("h" + std::to_string(g.i - k) + std::to_string(k + g.j));
        if (!a || !b)
            throw std::out_of_range("d1: factor of d1(" + g.name + ") outside the registry");
        Monomial m = Monomial::one(reg);
        m.e[*a] += 1;
        m.e[*b] += 1;
        out = out + Element::from(m);
    }
    return out;
}

Element d1(const Registry& reg, const Element& el) {
    Element out = Element::zero();
    for (const auto& mono : el.ms) {
        for (int i = 0; i < (int)mono.e.size(); ++i) {
            if (!mono.e[i] || mono.e[i] % 2 == 0) continue;  // char 2: even powers die
            Element dg = d1_of_generator(reg, i);
            if (dg.is_zero()) continue;
            Monomial rest = mono;
            rest.e[i] -= 1;
            out = out + dg.times(Element::from(rest));
        }
    }
    return out;
}

Element multiply(const Element& a, const Element& b) { return a.times(b); }

}  // namespace may::alg
