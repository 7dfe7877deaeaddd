#include "mayengine/massey.hpp"

#include <cctype>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace may::mas {

using alg::Element;
using eng::Page;
using eng::PageBlock;
using eng::SF;
using f2tau::TauScalar;
using f2tau::TauVec;

namespace {

struct Ctx {
    const eng::Tower* tw = nullptr;
    int r = 2;
    const Page* pg = nullptr;
    const eng::Differential* d = nullptr;
    const Page* next = nullptr;
};

std::optional<Ctx> make_ctx(const eng::Tower& tw, int r, std::string* err) {
    Ctx c;
    c.tw = &tw;
    c.r = r;
    int pi;
    try {
        pi = tw.index_of(r);
    } catch (const std::out_of_range&) {
        *err = "bad-page: " + std::to_string(r);
        return std::nullopt;
    }
    c.pg = &tw.pages[pi];
    c.d = &tw.diffs[pi];
    c.next = pi + 1 < (int)tw.pages.size() ? &tw.pages[pi + 1] : &tw.einf;
    return c;
}

// Canonical class coordinates of `e` at block (s,f) of page `p`.
std::optional<TauVec> class_of(const Page& p, int s, int f, const Element& e,
                               std::string* err) {
    const PageBlock* b = p.block(s, f);
    if (!b) {
        if (e.is_zero()) return TauVec{};
        *err = "window-exceeded";
        return std::nullopt;
    }
    if (e.is_zero()) return TauVec(b->classes.size());
    try {
        TauVec v = p.coords(s, f, e);
        auto c = b->express(v);
        if (!c) *err = "element-outside-block-span";
        return c;
    } catch (const std::exception& ex) {
        *err = ex.what();
        return std::nullopt;
    }
}

bool class_is_zero(const Page& p, int s, int f, const TauVec& c) {
    const PageBlock* b = p.block(s, f);
    return !b || c.empty() || b->mod.is_zero(c);
}

// A solved null-homotopy u with d_r(u) = product, plus its degree (m = the
// detection filtration of the chosen element).
struct Homotopy {
    Element elem;
    bool nonzero = false;
    MayDegree deg{};
};

// Solves d_r(u) = prod at class level.  `pdeg` is the degree of `prod`.
// On failure sets *err to "undefined" (the product is nonzero in the page's
// homology), "no-null-homotopy" (inconsistency), or a window error.
std::optional<Homotopy> solve_homotopy(const Ctx& c, const Element& prod,
                                       const MayDegree& pdeg,
                                       const std::optional<Element>& given,
                                       std::string* err) {
    Homotopy h;
    std::string e2;
    auto cp = class_of(*c.pg, pdeg.s, pdeg.f, prod, &e2);
    if (!cp) {
        *err = e2;
        return std::nullopt;
    }
    SF src{pdeg.s + 1, pdeg.f - 1};
    if (given) {
        auto cu = class_of(*c.pg, src.first, src.second, *given, &e2);
        if (!cu) {
            *err = e2;
            return std::nullopt;
        }
        auto mit = c.d->maps.find(src);
        bool ok;
        if (mit == c.d->maps.end())
            ok = class_is_zero(*c.pg, pdeg.s, pdeg.f, *cp);
        else
            ok = mit->second.dst->equal(mit->second.apply(*cu), *cp);
        if (!ok) {
            *err = "bad-null-homotopy";
            return std::nullopt;
        }
        h.elem = *given;
    } else if (class_is_zero(*c.pg, pdeg.s, pdeg.f, *cp)) {
        return h;  // zero homotopy
    } else {
        auto mit = c.d->maps.find(src);
        std::optional<TauVec> sol;
        if (mit != c.d->maps.end()) sol = f2tau::solve_preimage(mit->second, *cp);
        if (!sol) {
            // Distinguish "the bracket is not defined" from data inconsistency:
            // the product's class on the next page is nonzero iff it is not a
            // d_r-boundary.
            auto cn = class_of(*c.next, pdeg.s, pdeg.f, prod, &e2);
            *err = (cn && class_is_zero(*c.next, pdeg.s, pdeg.f, *cn))
                       ? "no-null-homotopy"
                       : "undefined";
            return std::nullopt;
        }
        h.elem = eng::class_element(*c.pg, src, *sol);
    }
    if (!h.elem.is_zero()) {
        h.nonzero = true;
        h.deg = {h.elem.min_may_filtration(*c.pg->reg), src.first, src.second, pdeg.w};
    }
    return h;
}

// Condition (2) of the Convergence Theorem over all computed later pages.
Verdict crossing_scan(const eng::Tower& tw, int r, const std::vector<Homotopy>& hs,
                      std::optional<CrossingWitness>& wit) {
    bool uncertain = false;
    for (const Homotopy& h : hs) {
        if (!h.nonzero) continue;
        const int m = h.deg.m, s = h.deg.s, f = h.deg.f, w = h.deg.w;
        for (size_t ti = 0; ti < tw.pages.size(); ++ti) {
            const int t = eng::kPages[ti];
            const Page& pt = tw.pages[ti];
            const PageBlock* b = pt.block(s, f);
            if (!b) continue;
            if (b->flagged) uncertain = true;
            auto mit = tw.diffs[ti].maps.find({s, f});
            if (mit == tw.diffs[ti].maps.end()) continue;
            for (int j = 0; j < (int)b->classes.size(); ++j) {
                int wj = b->mod.gen_weights[j];
                if (wj < w) continue;
                int mp = b->classes[j].m;
                if (!(mp >= m && mp - t < m - r)) continue;
                TauVec u(b->classes.size());
                u[j] = TauScalar::tau(wj - w);
                if (b->mod.is_zero(u)) continue;
                const auto& map = mit->second;
                TauVec img = map.dst->reduce(map.apply(u));
                if (map.dst->is_zero(img)) continue;
                CrossingWitness cw;
                cw.t = t;
                cw.source = eng::class_element(pt, {s, f}, u);
                cw.value = eng::class_element(pt, {s - 1, f + 1}, img);
                cw.text = "d" + std::to_string(t) + "(" + cw.source.str(*tw.reg) +
                          ") = " + cw.value.str(*tw.reg);
                wit = cw;
                return Verdict::Rejected;
            }
        }
    }
    return uncertain ? Verdict::Unverifiable : Verdict::Accepted;
}

// F2 echelon over class-support bits of a fixed (s,f,w) slice.
struct SliceSpan {
    std::vector<std::vector<uint64_t>> rows;
    std::vector<int> pivot_of;

    static std::optional<std::vector<uint64_t>> bits_of(const Page& p, SF sf,
                                                        const Element& e) {
        std::string err;
        auto c = class_of(p, sf.first, sf.second, e, &err);
        if (!c) return std::nullopt;
        std::vector<uint64_t> v((c->size() + 64) / 64, 0);
        for (size_t i = 0; i < c->size(); ++i)
            if (!(*c)[i].is_zero()) v[i / 64] ^= 1ull << (i % 64);
        return v;
    }
    // Reduces v in place; returns the surviving pivot index or -1.
    int reduce(std::vector<uint64_t>& v) const {
        for (;;) {
            int low = -1;
            for (size_t k = 0; k < v.size() && low < 0; ++k)
                if (v[k]) low = (int)(k * 64 + (size_t)__builtin_ctzll(v[k]));
            if (low < 0) return -1;
            if (low >= (int)pivot_of.size() || pivot_of[low] < 0) return low;
            const auto& pv = rows[pivot_of[low]];
            for (size_t k = 0; k < pv.size() && k < v.size(); ++k) v[k] ^= pv[k];
        }
    }
    bool insert(std::vector<uint64_t> v) {
        int low = reduce(v);
        if (low < 0) return false;
        if (low >= (int)pivot_of.size()) pivot_of.resize(low + 1, -1);
        pivot_of[low] = (int)rows.size();
        rows.push_back(std::move(v));
        return true;
    }
    bool member(const Page& p, SF sf, const Element& e) const {
        auto v = bits_of(p, sf, e);
        if (!v) return false;
        return reduce(*v) < 0;
    }
};

// a0 * (slice of the next page at `blk`, weight w) * a2, collected into an
// F2-basis of the indeterminacy inside the bracket slice `res`.
void add_indet(const Ctx& c, const Element& left, SF blk, int w, const Element& right,
               SF res, SliceSpan& span, std::vector<Element>& out) {
    const PageBlock* b = c.next->block(blk.first, blk.second);
    if (!b) return;
    for (const TauVec& v : b->mod.weight_slice_basis(w)) {
        Element y = eng::class_element(*c.next, blk, v);
        Element prod = left.times(y).times(right);
        if (prod.is_zero()) continue;
        auto bits = SliceSpan::bits_of(*c.next, res, prod);
        if (!bits) continue;
        if (span.insert(std::move(*bits))) out.push_back(prod);
    }
}

std::optional<int> single_hn(const alg::Registry& reg, const Element& e) {
    if (e.ms.size() != 1) return std::nullopt;
    const alg::Monomial& m = e.ms[0];
    if (m.tau_exp != 0) return std::nullopt;
    int idx = -1;
    for (int i = 0; i < (int)m.e.size(); ++i) {
        if (!m.e[i]) continue;
        if (idx >= 0 || m.e[i] != 1) return std::nullopt;
        idx = i;
    }
    if (idx < 0) return std::nullopt;
    const std::string& n = reg.info(idx).name;
    if (n.size() < 2 || n[0] != 'h') return std::nullopt;
    for (size_t i = 1; i < n.size(); ++i)
        if (!std::isdigit((unsigned char)n[i])) return std::nullopt;
    return std::stoi(n.substr(1));
}

std::optional<MayDegree> degree_of(const alg::Registry& reg, const Element& e,
                                   std::string* err) {
    try {
        auto d = e.degree(reg);
        if (!d) {
            *err = "zero-argument";
            return std::nullopt;
        }
        return d;
    } catch (const std::exception& ex) {
        *err = ex.what();
        return std::nullopt;
    }
}

bool is_dr_cycle(const Ctx& c, const MayDegree& dg, const Element& e, std::string* err) {
    auto x = class_of(*c.pg, dg.s, dg.f, e, err);
    if (!x) return false;
    auto it = c.d->maps.find({dg.s, dg.f});
    if (it == c.d->maps.end()) return true;
    if (!it->second.dst->is_zero(it->second.apply(*x))) {
        *err = "argument-not-a-d_r-cycle";
        return false;
    }
    return true;
}

MasseyResult fail(int r, std::string err) {
    MasseyResult res;
    res.r = r;
    res.error = std::move(err);
    return res;
}

}  // namespace

Element tau_element(const alg::Registry& reg) {
    alg::Monomial m = alg::Monomial::one(reg);
    m.tau_exp = 1;
    return Element::from(m);
}

MasseyResult triple_product(const eng::Tower& tw, int r, const Element& a0,
                            const Element& a1, const Element& a2,
                            const std::optional<Element>& g01,
                            const std::optional<Element>& g12) {
    std::string err;
    auto ctx = make_ctx(tw, r, &err);
    if (!ctx) return fail(r, err);
    MasseyResult res;
    res.r = r;

    if (a0.is_zero() || a1.is_zero() || a2.is_zero()) {
        res.defined = true;
        res.verdict = Verdict::Accepted;
        res.note = "zero-argument";
        return res;
    }
    auto d0 = degree_of(*tw.reg, a0, &err);
    auto d1 = degree_of(*tw.reg, a1, &err);
    auto d2 = degree_of(*tw.reg, a2, &err);
    if (!d0 || !d1 || !d2) return fail(r, err);

    MayDegree B = *d0 + *d1 + *d2 + MayDegree{0, 1, -1, 0};
    if (!tw.win.contains(B.s, B.f)) return fail(r, "window-exceeded");
    for (auto* dg : {&*d0, &*d1, &*d2})
        if (!is_dr_cycle(*ctx, *dg, dg == &*d0 ? a0 : (dg == &*d1 ? a1 : a2), &err))
            return fail(r, err);

    auto h01 = solve_homotopy(*ctx, a0.times(a1), *d0 + *d1, g01, &err);
    if (!h01) return fail(r, err);
    auto h12 = solve_homotopy(*ctx, a1.times(a2), *d1 + *d2, g12, &err);
    if (!h12) return fail(r, err);

    res.defined = true;
    auto n = single_hn(*tw.reg, a0);
    bool hirsch = n && a0 == a2;
    if (hirsch) {
        std::optional<int> hi = tw.reg->find("h" + std::to_string(*n + 1));
        if (!hi) {
            hirsch = false;
        } else {
            alg::Monomial m = alg::Monomial::one(*tw.reg);
            m.e[*hi] = 1;
            if (*n == 0) {
                // <h0, x, h0> contains tau*h1*x.
                res.rep = Element::from(m).times(a1).times_tau(1);
            } else {
                // <h_n, x, h_n> contains h_{n+1}*x.
                res.rep = Element::from(m).times(a1);
            }
            res.note = "hirsch";
            res.verdict = Verdict::Accepted;
        }
    }
    if (!hirsch) {
        res.rep = a0.times(h12->elem) + h01->elem.times(a2);
        res.verdict = crossing_scan(tw, r, {*h01, *h12}, res.witness);
    }
    res.deg = B;
    res.deg.m = res.rep.is_zero() ? B.m : res.rep.min_may_filtration(*tw.reg);

    SliceSpan span;
    SF bres{B.s, B.f};
    add_indet(*ctx, a0, {d1->s + d2->s + 1, d1->f + d2->f - 1}, d1->w + d2->w,
              Element::from(alg::Monomial::one(*tw.reg)), bres, span,
              res.indeterminacy);
    add_indet(*ctx, Element::from(alg::Monomial::one(*tw.reg)),
              {d0->s + d1->s + 1, d0->f + d1->f - 1}, d0->w + d1->w, a2, bres, span,
              res.indeterminacy);
    return res;
}

MasseyResult matric_triple(const eng::Tower& tw, int r,
                           const std::vector<Element>& row,
                           const std::vector<Element>& col, const Element& right) {
    std::string err;
    auto ctx = make_ctx(tw, r, &err);
    if (!ctx) return fail(r, err);
    if (row.size() != col.size() || row.empty())
        return fail(r, "matric-shape-mismatch");
    MasseyResult res;
    res.r = r;

    auto dright = degree_of(*tw.reg, right, &err);
    if (!dright) return fail(r, err);
    std::optional<MayDegree> inner;  // common degree of row_i * col_i
    std::vector<std::optional<MayDegree>> drow(row.size()), dcol(row.size());
    for (size_t i = 0; i < row.size(); ++i) {
        if (row[i].is_zero() || col[i].is_zero()) continue;
        drow[i] = degree_of(*tw.reg, row[i], &err);
        dcol[i] = degree_of(*tw.reg, col[i], &err);
        if (!drow[i] || !dcol[i]) return fail(r, err);
        MayDegree s = *drow[i] + *dcol[i];
        if (inner && (inner->s != s.s || inner->f != s.f || inner->w != s.w))
            return fail(r, "matric-inhomogeneous");
        if (!inner) inner = s;
    }
    if (!inner) {
        res.defined = true;
        res.verdict = Verdict::Accepted;
        res.note = "zero-argument";
        return res;
    }
    MayDegree B = *inner + *dright + MayDegree{0, 1, -1, 0};
    if (!tw.win.contains(B.s, B.f)) return fail(r, "window-exceeded");

    if (!is_dr_cycle(*ctx, *dright, right, &err)) return fail(r, err);
    for (size_t i = 0; i < row.size(); ++i) {
        if (drow[i] && !is_dr_cycle(*ctx, *drow[i], row[i], &err)) return fail(r, err);
        if (dcol[i] && !is_dr_cycle(*ctx, *dcol[i], col[i], &err)) return fail(r, err);
    }

    Element p01 = Element::zero();
    for (size_t i = 0; i < row.size(); ++i) p01 = p01 + row[i].times(col[i]);
    auto h01 = solve_homotopy(*ctx, p01, *inner, std::nullopt, &err);
    if (!h01) return fail(r, err);

    std::vector<Homotopy> hs{*h01};
    Element rep = h01->elem.times(right);
    for (size_t i = 0; i < row.size(); ++i) {
        if (!dcol[i]) continue;
        auto hi = solve_homotopy(*ctx, col[i].times(right), *dcol[i] + *dright,
                                 std::nullopt, &err);
        if (!hi) return fail(r, err);
        rep = rep + row[i].times(hi->elem);
        hs.push_back(*hi);
    }

    res.defined = true;
    res.rep = rep;
    res.deg = B;
    res.deg.m = rep.is_zero() ? B.m : rep.min_may_filtration(*tw.reg);
    res.verdict = crossing_scan(tw, r, hs, res.witness);

    SliceSpan span;
    SF bres{B.s, B.f};
    Element one = Element::from(alg::Monomial::one(*tw.reg));
    for (size_t i = 0; i < row.size(); ++i) {
        if (!dcol[i]) continue;
        add_indet(*ctx, row[i], {dcol[i]->s + dright->s + 1, dcol[i]->f + dright->f - 1},
                  dcol[i]->w + dright->w, one, bres, span, res.indeterminacy);
    }
    add_indet(*ctx, one, {inner->s + 1, inner->f - 1}, inner->w, right, bres, span,
              res.indeterminacy);
    return res;
}

MasseyResult quadruple_product(const eng::Tower& tw, int r, const Element& a0,
                               const Element& a1, const Element& a2,
                               const Element& a3) {
    std::string err;
    auto ctx = make_ctx(tw, r, &err);
    if (!ctx) return fail(r, err);
    MasseyResult res;
    res.r = r;
    if (a0.is_zero() || a1.is_zero() || a2.is_zero() || a3.is_zero()) {
        res.defined = true;
        res.verdict = Verdict::Accepted;
        res.note = "zero-argument";
        return res;
    }
    auto d0 = degree_of(*tw.reg, a0, &err);
    auto d1 = degree_of(*tw.reg, a1, &err);
    auto d2 = degree_of(*tw.reg, a2, &err);
    auto d3 = degree_of(*tw.reg, a3, &err);
    if (!d0 || !d1 || !d2 || !d3) return fail(r, err);
    MayDegree B = *d0 + *d1 + *d2 + *d3 + MayDegree{0, 2, -2, 0};
    if (!tw.win.contains(B.s, B.f)) return fail(r, "window-exceeded");

    // Condition (4): the subbracket <a0,a1,a2> must have no indeterminacy.
    MasseyResult sub = triple_product(tw, r, a0, a1, a2);
    if (!sub.defined) return fail(r, sub.error);
    if (!sub.indeterminacy.empty()) return fail(r, "subbracket-indeterminate");

    auto h01 = solve_homotopy(*ctx, a0.times(a1), *d0 + *d1, std::nullopt, &err);
    if (!h01) return fail(r, err);
    auto h12 = solve_homotopy(*ctx, a1.times(a2), *d1 + *d2, std::nullopt, &err);
    if (!h12) return fail(r, err);
    auto h23 = solve_homotopy(*ctx, a2.times(a3), *d2 + *d3, std::nullopt, &err);
    if (!h23) return fail(r, err);

    // Condition (2): second-order homotopies.
    Element s012 = a0.times(h12->elem) + h01->elem.times(a2);
    auto h02 = solve_homotopy(*ctx, s012, *d0 + *d1 + *d2 + MayDegree{0, 1, -1, 0},
                              std::nullopt, &err);
    if (!h02) return fail(r, err == "undefined" ? "subbracket-nonzero" : err);
    Element s123 = a1.times(h23->elem) + h12->elem.times(a3);
    auto h13 = solve_homotopy(*ctx, s123, *d1 + *d2 + *d3 + MayDegree{0, 1, -1, 0},
                              std::nullopt, &err);
    if (!h13) return fail(r, err == "undefined" ? "subbracket-nonzero" : err);

    res.defined = true;
    res.rep = a0.times(h13->elem) + h01->elem.times(h23->elem) + h02->elem.times(a3);
    res.deg = B;
    res.deg.m = res.rep.is_zero() ? B.m : res.rep.min_may_filtration(*tw.reg);
    res.verdict = crossing_scan(tw, r, {*h01, *h12, *h23, *h02, *h13}, res.witness);
    res.note = "fourfold: indeterminacy not computed";
    return res;
}

// ---------------------------------------------------------------------------
// Table verification.

namespace {

// Resolve a value expression; terms with exactly one degree-only atom of
// exponent 1 are pinned to the unique class of that degree on `page`.
std::optional<Element> resolve_or_pin(const tab::Dataset& ds, const Page& page,
                                      const std::string& src) {
    auto parsed = tab::parse_expression(src);
    if (auto e = ds.names.resolve(parsed, ds.e2)) return e;
    Element out = Element::zero();
    for (const auto& term : parsed.terms) {
        tab::ParsedExpr known;
        known.terms.push_back(tab::ParsedTerm{});
        known.terms.back().tau_exp = term.tau_exp;
        std::optional<std::string> atom;
        for (const auto& [name, exp] : term.factors) {
            tab::ParsedExpr probe;
            probe.terms.push_back(tab::ParsedTerm{});
            probe.terms.back().factors.push_back({name, 1});
            if (ds.names.resolve(probe, ds.e2)) {
                known.terms.back().factors.push_back({name, exp});
            } else if (!atom && exp == 1) {
                atom = name;
            } else {
                return std::nullopt;
            }
        }
        auto base = ds.names.resolve(known, ds.e2);
        if (!base) return std::nullopt;
        if (atom) {
            auto dinfo = ds.names.degree_of(*atom);
            if (!dinfo) return std::nullopt;
            // Unique class at the atom's (s,f,w) on `page`.
            const PageBlock* b = page.block(dinfo->deg.s, dinfo->deg.f);
            if (!b) return std::nullopt;
            int hit = -1;
            for (int j = 0; j < (int)b->classes.size(); ++j) {
                if (b->mod.gen_weights[j] != dinfo->deg.w) continue;
                if (hit >= 0) return std::nullopt;
                hit = j;
            }
            if (hit < 0) return std::nullopt;
            base = base->times(b->classes[hit].rep);
        }
        out = out + *base;
    }
    return out.is_zero() ? std::nullopt : std::optional(out);
}

std::vector<std::string> split_entries(std::string cell) {
    // "[a,b]" or "[a;b]" -> entries.
    if (cell.size() >= 2 && cell.front() == '[' && cell.back() == ']')
        cell = cell.substr(1, cell.size() - 2);
    std::vector<std::string> out;
    std::string cur;
    for (char ch : cell) {
        if (ch == ',' || ch == ';') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

const char* verdict_str(Verdict v) {
    switch (v) {
        case Verdict::Accepted: return "accepted";
        case Verdict::Rejected: return "rejected";
        default: return "unverifiable";
    }
}

// Compare a computed bracket against the table's value cell, modulo the
// computed indeterminacy, as classes on the page after `res.r`.
void compare_value(const eng::Tower& tw, const tab::Dataset& ds,
                   const MasseyResult& res, const std::string& value_cell,
                   BracketCheck& chk) {
    const Page& next = tw.page_at(eng::next_page(res.r));
    SF sf{res.deg.s, res.deg.f};
    SliceSpan span;
    for (const Element& e : res.indeterminacy) {
        auto bits = SliceSpan::bits_of(next, sf, e);
        if (bits) span.insert(std::move(*bits));
    }
    for (const std::string& alt : tab::split_alternatives(value_cell)) {
        auto want = resolve_or_pin(ds, next, alt);
        if (!want) continue;
        if (span.member(next, sf, res.rep + *want)) {
            chk.ok = true;
            return;
        }
    }
    chk.detail = "value mismatch: computed " + res.rep.str(*tw.reg);
}

}  // namespace

std::vector<BracketCheck> check_table_brackets(const eng::Tower& tw,
                                               const tab::Dataset& ds) {
    std::vector<BracketCheck> out;
    auto run_row = [&](const tab::TableRecord& rec, bool matric) {
        BracketCheck chk;
        chk.table = rec.table;
        chk.line_no = rec.line_no;
        chk.bracket = rec.name;
        auto args = tab::split_bracket(rec.name);
        if (!args || args->size() != 3) {
            chk.detail = "unsupported bracket arity";
            out.push_back(chk);
            return;
        }
        MasseyResult res;
        bool resolvable = true;
        if (matric) {
            std::vector<Element> row, col;
            for (const std::string& s : split_entries((*args)[0])) {
                auto e = ds.names.resolve(tab::parse_expression(s), ds.e2);
                if (!e) resolvable = false;
                else row.push_back(*e);
            }
            for (const std::string& s : split_entries((*args)[1])) {
                auto e = ds.names.resolve(tab::parse_expression(s), ds.e2);
                if (!e) resolvable = false;
                else col.push_back(*e);
            }
            auto right = ds.names.resolve(tab::parse_expression((*args)[2]), ds.e2);
            if (!right) resolvable = false;
            if (resolvable) res = matric_triple(tw, 2, row, col, *right);
        } else {
            std::vector<Element> a;
            for (const std::string& s : *args) {
                auto e = ds.names.resolve(tab::parse_expression(s), ds.e2);
                if (!e) resolvable = false;
                else a.push_back(*e);
            }
            if (resolvable) {
                for (int r : eng::kPages) {
                    res = triple_product(tw, r, a[0], a[1], a[2]);
                    if (res.defined || res.error != "undefined") break;
                }
            }
        }
        if (!resolvable) {
            chk.detail = "argument not symbolically resolvable";
            out.push_back(chk);
            return;
        }
        if (!res.defined) {
            if (res.error == "window-exceeded") {
                chk.detail = "outside window";
            } else {
                chk.attempted = true;
                chk.detail = "bracket not defined: " + res.error;
            }
            out.push_back(chk);
            return;
        }
        chk.attempted = true;
        chk.verdict = res.verdict;
        compare_value(tw, ds, res, rec.value, chk);
        if (chk.ok && !chk.detail.empty()) chk.detail.clear();
        if (chk.ok) chk.detail = verdict_str(res.verdict);
        out.push_back(chk);
    };
    if (ds.has_table("massey"))
        for (const auto& rec : ds.table("massey")) run_row(rec, false);
    if (ds.has_table("ctau_matric"))
        for (const auto& rec : ds.table("ctau_matric")) run_row(rec, true);
    return out;
}

std::string to_line(const MasseyResult& res, const alg::Registry& reg) {
    std::ostringstream os;
    if (!res.defined) {
        os << "undefined | " << res.error;
        return os.str();
    }
    os << "(" << res.deg.s << "," << res.deg.f << "," << res.deg.w << ") | "
       << (res.rep.is_zero() ? "0" : res.rep.str(reg)) << " | "
       << verdict_str(res.verdict);
    if (res.witness) os << " | " << res.witness->text;
    if (!res.note.empty()) os << " | " << res.note;
    return os.str();
}

}  // namespace may::mas
