// May spectral sequence engine.  See include/mayengine/engine.hpp.

#include "mayengine/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <sstream>
#include <thread>

namespace may::eng {

using alg::Element;
using alg::Monomial;
using alg::Registry;
using f2tau::ModuleMap;
using f2tau::PresentedTauModule;
using f2tau::TauScalar;
using f2tau::TauVec;
using f2tau::WeightedMatrix;

int next_page(int r) {
    for (size_t i = 0; i + 1 < std::size(kPages); ++i)
        if (kPages[i] == r) return kPages[i + 1];
    if (r == kPages[std::size(kPages) - 1]) return 0;
    throw std::invalid_argument("next_page: " + std::to_string(r) + " is not a page index");
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

// Run fn(i) for i in [0,n) on `threads` workers; deterministic because each i
// writes only its own slot.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    int nw = std::min(threads, n);
    std::exception_ptr err;
    std::mutex err_mu;
    for (int t = 0; t < nw; ++t)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// All tau-free monomials of bidegree (s,f), every weight and May filtration.
// Ordered by weight, then the monomial order (deterministic).
std::vector<Monomial> taufree_at(const Registry& reg, int s, int f, int enum_stem) {
    std::vector<Monomial> out;
    if (s < 0 || f < 0) return out;
    enum_stem = std::max({enum_stem, 1, (f + 3) / 4});
    if (reg.classical()) return enumerate_monomials(reg, TriDegree{s, f, 0}, true, enum_stem);
    for (int w = 0; w <= s; ++w) {
        auto v = enumerate_monomials(reg, TriDegree{s, f, w}, true, enum_stem);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

int weight_of(const Registry& reg, const Monomial& mono) {
    return reg.classical() ? 0 : mono.degree(reg).w;
}

struct BasisIndex {
    std::map<Monomial, int> idx;
    static BasisIndex build(const std::vector<Monomial>& basis) {
        BasisIndex b;
        for (int i = 0; i < (int)basis.size(); ++i) b.idx.emplace(basis[i], i);
        return b;
    }
    int find(const Monomial& m) const {
        auto it = idx.find(m);
        return it == idx.end() ? -1 : it->second;
    }
};

// Coordinates of a homogeneous element over a tau-free monomial basis.
TauVec coords_over(const Registry& reg, const std::vector<Monomial>& basis,
                   const BasisIndex& bi, const Element& e, const char* where) {
    TauVec v(basis.size());
    for (const Monomial& m : e.ms) {
        Monomial m0 = m.tau_free();
        int i = bi.find(m0);
        if (i < 0)
            throw std::logic_error(std::string(where) + ": monomial " + m.str(reg) +
                                   " outside the block basis");
        TauScalar s = reg.classical() ? TauScalar::one() : TauScalar::tau(m.tau_exp);
        v[i] = v[i] + s;
    }
    return v;
}

WeightedMatrix from_cols(const std::vector<int>& row_w, const std::vector<TauVec>& cols,
                         const std::vector<int>& col_w) {
    WeightedMatrix m(row_w, col_w);
    for (int j = 0; j < (int)cols.size(); ++j)
        for (int i = 0; i < (int)row_w.size(); ++i) m.at(i, j) = cols[j][i];
    return m;
}

// Sparse-times-dense: column j of the result is sum_i B(i,j) * A[i].
SparseCols sparse_mul(const SparseCols& A, const WeightedMatrix& B) {
    SparseCols out(B.cols());
    for (int j = 0; j < B.cols(); ++j) {
        std::map<int, TauScalar> acc;
        for (int i = 0; i < (int)A.size(); ++i) {
            const TauScalar& s = B.at(i, j);
            if (s.is_zero()) continue;
            for (const auto& [row, v] : A[i].entries) {
                TauScalar t = v * s;
                auto [it, fresh] = acc.try_emplace(row, t);
                if (!fresh) it->second = it->second + t;
            }
        }
        out[j].w = B.col_weights[j];
        for (const auto& [row, v] : acc)
            if (!v.is_zero()) out[j].entries.emplace_back(row, v);
    }
    return out;
}

Element scale_tau(const Registry& reg, const Element& e, int k) {
    return reg.classical() || k == 0 ? e : e.times_tau(k);
}

// Replace a block's module and classes by the summand normal form, so the
// generator count equals the module's actual rank.  Keeps basis/denom; the
// lift columns become the summand representatives.
void rebase_to_summands(const Registry& reg, PageBlock& b) {
    const auto& S = b.mod.summands;
    std::vector<int> gw;
    std::vector<PageClass> ncls;
    std::vector<TauVec> lcols;
    for (const auto& s : S) {
        gw.push_back(s.weight);
        Element rep = Element::zero();
        for (int j = 0; j < (int)s.rep.size(); ++j) {
            if (s.rep[j].is_zero()) continue;
            rep = rep + scale_tau(reg, b.classes[j].rep, s.rep[j].e);
        }
        if (rep.is_zero())
            throw std::logic_error("rebase: summand representative collapsed to zero");
        ncls.push_back(PageClass{rep, rep.min_may_filtration(reg)});
        lcols.push_back(s.rep);
    }
    // Presentation in normal form: tau^k * g_i = 0 for the torsion summands.
    std::vector<TauVec> rel;
    std::vector<int> relw;
    for (int i = 0; i < (int)S.size(); ++i) {
        if (S[i].kind != f2tau::Summand::Torsion) continue;
        TauVec c(S.size());
        c[i] = TauScalar::tau(S[i].torsion);
        rel.push_back(std::move(c));
        relw.push_back(S[i].weight - S[i].torsion);
    }
    WeightedMatrix lift_cols = from_cols(b.mod.gen_weights, lcols, gw);
    b.lift = sparse_mul(b.lift, lift_cols);
    b.mod = PresentedTauModule(gw, from_cols(gw, rel, relw));
    b.classes = std::move(ncls);
}

}  // namespace

// ---------------------------------------------------------------------------
// PageBlock / Page

std::optional<TauVec> PageBlock::express(const TauVec& v) const {
    int n = (int)classes.size();
    build_echelon();
    auto u = f2tau::vector_weight(v, basis_w);
    if (!u) return TauVec(n);  // zero vector
    f2tau::BitVec rows((int)basis_w.size()), aug(n);
    for (int i = 0; i < (int)v.size(); ++i)
        if (!v[i].is_zero()) rows.set(i);
    ech_->reduce(*u, rows, aug);
    if (rows.any()) return std::nullopt;
    TauVec x(n);
    for (int j : aug.bits()) x[j] = TauScalar::tau(mod.gen_weights[j] - *u);
    return mod.reduce(x);
}

void PageBlock::build_echelon() const {
    int n = (int)classes.size();
    if (!ech_built_) {
        ech_ = std::make_unique<f2tau::TauEchelon>(&basis_w, n);
        // All lift and denom columns, descending weight; lift columns tracked.
        struct C {
            int w;
            int kind;  // 0 = lift, 1 = denom
            int j;
        };
        std::vector<C> order;
        for (int j = 0; j < (int)lift.size(); ++j) order.push_back({lift[j].w, 0, j});
        for (int j = 0; j < (int)denom.size(); ++j) order.push_back({denom[j].w, 1, j});
        std::sort(order.begin(), order.end(), [](const C& a, const C& b) {
            return std::tie(b.w, a.kind, a.j) < std::tie(a.w, b.kind, b.j);
        });
        for (const C& c : order) {
            const SparseCol& col = c.kind == 0 ? lift[c.j] : denom[c.j];
            std::vector<int> rows;
            for (const auto& [row, v] : col.entries) rows.push_back(row);
            ech_->insert(col.w, rows, c.kind == 0 ? c.j : -1);
        }
        ech_built_ = true;
    }
}

const PageBlock* Page::block(int s, int f) const {
    auto it = blocks.find({s, f});
    return it == blocks.end() ? nullptr : &it->second;
}

int Page::dim_at(int s, int f, int w) const {
    const PageBlock* b = block(s, f);
    return b ? b->mod.dim_at_weight(w) : 0;
}

int Page::free_rank_at(int s, int f) const {
    const PageBlock* b = block(s, f);
    return b ? b->mod.free_rank() : 0;
}

TauVec Page::coords(int s, int f, const Element& e) const {
    const PageBlock* b = block(s, f);
    if (!b) throw std::out_of_range("Page::coords: no block at (" + std::to_string(s) + "," +
                                    std::to_string(f) + ")");
    BasisIndex bi = BasisIndex::build(b->basis);
    return coords_over(*reg, b->basis, bi, e, "Page::coords");
}

Element class_element(const Page& page, SF sf, const TauVec& x) {
    const PageBlock* b = page.block(sf.first, sf.second);
    if (!b) throw std::out_of_range("class_element: no block");
    Element e = Element::zero();
    for (int j = 0; j < (int)x.size(); ++j) {
        if (x[j].is_zero()) continue;
        e = e + scale_tau(*page.reg, b->classes[j].rep, x[j].e);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Presentation

PagePresentation presentation_from_tables(const tab::Dataset& ds) {
    PagePresentation p;
    p.r = 2;
    p.reg = &ds.e2;
    for (const auto& r : ds.table("may_e2_reln")) {
        Element rel;
        auto st = tab::split_statement(r.name);
        if (st && st->rel == "=") {
            auto l = ds.names.resolve(tab::parse_expression(st->lhs), ds.e2);
            auto rr = ds.names.resolve(tab::parse_expression(st->rhs), ds.e2);
            if (!l || !rr)
                throw std::runtime_error("presentation: unresolvable relation at " +
                                         r.table + ":" + std::to_string(r.line_no));
            rel = *l + *rr;
        } else {
            auto l = ds.names.resolve(tab::parse_expression(r.name), ds.e2);
            if (!l)
                throw std::runtime_error("presentation: unresolvable relation at " +
                                         r.table + ":" + std::to_string(r.line_no));
            rel = *l;
        }
        if (rel.is_zero()) continue;
        auto d = rel.degree(ds.e2);
        p.relations.push_back(std::move(rel));
        p.relation_degs.push_back(*d);
    }
    return p;
}

// ---------------------------------------------------------------------------
// realize_presentation

Page realize_presentation(const PagePresentation& p, Window win, int threads) {
    if (win.max_stem > 70)
        throw std::out_of_range(
            "relation-outside-window: the relation tables cover stems <= 70");
    const Registry& reg = *p.reg;
    for (const Element& rel : p.relations)
        for (const Monomial& mo : rel.ms)
            if (mo.tau_exp != 0)
                throw std::logic_error("realize_presentation: relations must be tau-free");
    Page page;
    page.r = 2;
    page.win = win;
    page.reg = &reg;
    page.classical = reg.classical();
    page.empty_mod = PresentedTauModule({}, WeightedMatrix({}, {}));

    std::vector<SF> keys;
    for (int s = 0; s <= win.max_stem; ++s)
        for (int f = 0; f <= win.max_f; ++f) {
            keys.push_back({s, f});
            page.blocks.emplace(SF{s, f}, PageBlock{});
        }

    // The relations are tau-free and weight-homogeneous, so each weight slice
    // is an independent F2 elimination (the motivic E2 is tau-torsion-free).
    parallel_for((int)keys.size(), threads, [&](int ki) {
        auto [s, f] = keys[ki];
        PageBlock& b = page.blocks.at({s, f});
        b.basis = taufree_at(reg, s, f, win.max_stem);
        for (const Monomial& m : b.basis) b.basis_w.push_back(weight_of(reg, m));
        BasisIndex bi = BasisIndex::build(b.basis);
        int n = (int)b.basis.size();
        int words = (n + 63) / 64;

        auto lowest = [](const std::vector<uint64_t>& v) {
            for (int k = 0; k < (int)v.size(); ++k)
                if (v[k]) return k * 64 + __builtin_ctzll(v[k]);
            return -1;
        };

        // Per weight slice: echelon of relation-multiple columns.  Slices are
        // index ranges since the basis is ordered by weight.
        std::vector<uint8_t> is_pivot(n, 0);
        int max_w = reg.classical() ? 0 : s;
        std::vector<int> pivot_of(n, -1);  // basis row -> index into piv
        for (int w = 0; w <= max_w; ++w) {
            std::vector<std::vector<uint64_t>> piv;
            std::fill(pivot_of.begin(), pivot_of.end(), -1);
            for (size_t ri = 0; ri < p.relations.size(); ++ri) {
                const MayDegree& d = p.relation_degs[ri];
                if (d.s > s || d.f > f) continue;
                int cw = reg.classical() ? 0 : w - d.w;
                if (!reg.classical() && (cw < 0 || cw > s - d.s)) continue;
                auto cof = enumerate_monomials(
                    reg, TriDegree{s - d.s, f - d.f, cw}, true,
                    std::max({win.max_stem, 1, (f + 3) / 4}));
                for (const Monomial& mu : cof) {
                    Element prod = p.relations[ri].times(Element::from(mu));
                    if (prod.is_zero()) continue;
                    std::vector<uint64_t> col(words, 0);
                    for (const Monomial& t : prod.ms) {
                        int i = bi.find(t);
                        if (i < 0)
                            throw std::logic_error("realize_presentation: stray monomial");
                        col[i / 64] ^= 1ull << (i % 64);
                    }
                    for (;;) {
                        int low = lowest(col);
                        if (low < 0) break;
                        if (pivot_of[low] >= 0) {
                            const auto& pv = piv[pivot_of[low]];
                            for (int k = 0; k < words; ++k) col[k] ^= pv[k];
                            continue;
                        }
                        is_pivot[low] = 1;
                        pivot_of[low] = (int)piv.size();
                        SparseCol sc;
                        sc.w = w;
                        for (int i = 0; i < n; ++i)
                            if ((col[i / 64] >> (i % 64)) & 1)
                                sc.entries.emplace_back(i, TauScalar::one());
                        b.denom.push_back(std::move(sc));
                        piv.push_back(std::move(col));
                        break;
                    }
                }
            }
        }

        // Classes: the non-pivot monomials; the module is free.
        std::vector<int> gw;
        for (int i = 0; i < n; ++i) {
            if (is_pivot[i]) continue;
            gw.push_back(b.basis_w[i]);
            b.classes.push_back(
                PageClass{Element::from(b.basis[i]), b.basis[i].may_filtration(reg)});
            SparseCol sc;
            sc.w = b.basis_w[i];
            sc.entries.emplace_back(i, TauScalar::one());
            b.lift.push_back(std::move(sc));
        }
        b.mod = PresentedTauModule::free_module(gw);
    });
    return page;
}

// ---------------------------------------------------------------------------
// Scratch E2

namespace {

// All tau-free E1 monomials at (m,s,f), every weight.
std::vector<Monomial> e1_monos(const Registry& reg, int m, int s, int f) {
    std::vector<Monomial> out;
    if (s < 0 || f < 0 || m < 0) return out;
    int bound = std::max({s, 1, (f + 3) / 4});
    if (reg.classical()) {
        auto v = enumerate_monomials(reg, MayDegree{m, s, f, 0}, true, bound);
        return v;
    }
    for (int w = 0; w <= s; ++w) {
        auto v = enumerate_monomials(reg, MayDegree{m, s, f, w}, true, bound);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace

Page compute_e2_scratch(const tab::Dataset& ds, Window win, int threads) {
    const Registry& reg = ds.e1;
    Page page;
    page.r = 2;
    page.win = win;
    page.reg = &reg;
    page.classical = reg.classical();
    page.empty_mod = PresentedTauModule({}, WeightedMatrix({}, {}));

    std::vector<SF> keys;
    for (int s = 0; s <= win.max_stem; ++s)
        for (int f = 0; f <= win.max_f; ++f) {
            keys.push_back({s, f});
            page.blocks.emplace(SF{s, f}, PageBlock{});
        }

    // d1 preserves the May filtration m and the weight w exactly, and the
    // motivic E1 is tau-freely generated, so the homology splits into plain
    // F2 elimination problems per (m,s,f,w).
    parallel_for((int)keys.size(), threads, [&](int ki) {
        auto [s, f] = keys[ki];
        PageBlock& b = page.blocks.at({s, f});

        auto bucket = [&](int ss, int ff) {
            std::map<std::pair<int, int>, std::vector<Monomial>> out;  // (m,w) -> monos
            for (Monomial& mo : taufree_at(reg, ss, ff, std::max(win.max_stem, ss)))
                out[{mo.may_filtration(reg), weight_of(reg, mo)}].push_back(std::move(mo));
            return out;
        };
        auto mid = bucket(s, f);
        auto src = bucket(s + 1, f - 1);

        std::vector<int> gw;
        std::vector<PageClass> cls;
        for (auto& [mw, monos] : mid) {
            auto [m, w] = mw;
            int n = (int)monos.size();
            int words = (n + 63) / 64;
            std::map<Monomial, int> midi;
            for (int i = 0; i < n; ++i) midi.emplace(monos[i], i);

            auto pack = [&](const Element& e, std::map<Monomial, int>& index,
                            int* dim) -> std::vector<uint64_t> {
                std::vector<uint64_t> v;
                for (const Monomial& mo : e.ms) {
                    auto [it, fresh] = index.try_emplace(mo, *dim);
                    if (fresh) ++(*dim);
                    int i = it->second;
                    if ((int)v.size() <= i / 64) v.resize(i / 64 + 1);
                    v[i / 64] ^= 1ull << (i % 64);
                }
                return v;
            };

            // Kernel of d_out on this bucket.  The target index grows lazily
            // from the monomials of the d1 values.
            std::map<Monomial, int> dsti;
            int dst_dim = 0;
            std::vector<std::vector<uint64_t>> piv_out;  // echelon of d1 columns
            std::vector<std::vector<uint64_t>> piv_aug;  // companion combos over mid
            std::vector<int> pivot_of;                   // dst row -> piv index
            auto lowest = [](const std::vector<uint64_t>& v) {
                for (int k = 0; k < (int)v.size(); ++k)
                    if (v[k]) return k * 64 + __builtin_ctzll(v[k]);
                return -1;
            };
            auto xor_into = [](std::vector<uint64_t>& a, const std::vector<uint64_t>& b) {
                if (a.size() < b.size()) a.resize(b.size());
                for (int k = 0; k < (int)b.size(); ++k) a[k] ^= b[k];
            };
            std::vector<std::vector<uint64_t>> kernel;  // combos over mid monomials
            for (int j = 0; j < n; ++j) {
                std::vector<uint64_t> col = pack(alg::d1(reg, Element::from(monos[j])),
                                                 dsti, &dst_dim);
                std::vector<uint64_t> aug(words, 0);
                aug[j / 64] = 1ull << (j % 64);
                for (;;) {
                    int low = lowest(col);
                    if (low < 0) {
                        kernel.push_back(std::move(aug));
                        break;
                    }
                    if ((int)pivot_of.size() <= low) pivot_of.resize(low + 1, -1);
                    int pi = pivot_of[low];
                    if (pi < 0) {
                        pivot_of[low] = (int)piv_out.size();
                        piv_out.push_back(std::move(col));
                        piv_aug.push_back(std::move(aug));
                        break;
                    }
                    xor_into(col, piv_out[pi]);
                    xor_into(aug, piv_aug[pi]);
                }
            }

            // Boundary echelon over the mid monomials.
            std::vector<std::vector<uint64_t>> piv_b;
            std::vector<int> pivot_b_of(n, -1);  // mid row -> piv_b index
            auto reduce_mid = [&](std::vector<uint64_t>& v) {
                for (;;) {
                    int low = lowest(v);
                    if (low < 0) return -1;
                    if (pivot_b_of[low] < 0) return low;
                    xor_into(v, piv_b[pivot_b_of[low]]);
                }
            };
            auto sit = src.find(mw);
            if (sit != src.end())
                for (const Monomial& mo : sit->second) {
                    Element d = alg::d1(reg, Element::from(mo));
                    if (d.is_zero()) continue;
                    std::vector<uint64_t> col(words, 0);
                    for (const Monomial& t : d.ms) {
                        int i = midi.at(t);
                        col[i / 64] ^= 1ull << (i % 64);
                    }
                    int low = reduce_mid(col);
                    if (low >= 0) {
                        pivot_b_of[low] = (int)piv_b.size();
                        piv_b.push_back(std::move(col));
                    }
                }

            // Homology classes: kernel vectors that survive the boundaries.
            for (std::vector<uint64_t>& kv : kernel) {
                int low = reduce_mid(kv);
                if (low < 0) continue;
                Element rep = Element::zero();
                for (int i = 0; i < n; ++i)
                    if (i / 64 < (int)kv.size() && (kv[i / 64] >> (i % 64)) & 1)
                        rep = rep + Element::from(monos[i]);
                gw.push_back(w);
                cls.push_back(PageClass{std::move(rep), m});
                pivot_b_of[low] = (int)piv_b.size();
                piv_b.push_back(std::move(kv));
            }
        }
        b.mod = PresentedTauModule::free_module(gw);
        b.classes = std::move(cls);
        // basis/lift/denom are not populated for the scratch page; it serves
        // dimension cross-checks and representative inspection only.
    });
    return page;
}

bool scratch_e2_zero(const tab::Dataset& ds, const Element& e1_elt) {
    const Registry& reg = ds.e1;
    if (e1_elt.is_zero()) return true;
    MayDegree d = *e1_elt.degree(reg);
    if (!alg::d1(reg, e1_elt).is_zero())
        throw std::logic_error("scratch_e2_zero: element is not a d1-cycle");
    auto mid = e1_monos(reg, d.m, d.s, d.f);
    std::vector<int> midw;
    for (const auto& mo : mid) midw.push_back(weight_of(reg, mo));
    BasisIndex midi = BasisIndex::build(mid);
    auto src = e1_monos(reg, d.m, d.s + 1, d.f - 1);

    // Boundary span, descending column weight.
    std::vector<std::pair<int, Element>> cols;
    for (const Monomial& mo : src) {
        Element b = alg::d1(reg, Element::from(mo));
        if (b.is_zero()) continue;
        cols.emplace_back(weight_of(reg, mo), b);
    }
    std::stable_sort(cols.begin(), cols.end(),
                     [](const auto& a, const auto& b) { return b.first < a.first; });
    f2tau::TauEchelon ech(&midw, 0);
    for (auto& [w, b] : cols) {
        TauVec v = coords_over(reg, mid, midi, b, "scratch_e2_zero");
        std::vector<int> rows;
        for (int i = 0; i < (int)v.size(); ++i)
            if (!v[i].is_zero()) rows.push_back(i);
        ech.insert(w, rows);
    }
    TauVec v = coords_over(reg, mid, midi, e1_elt, "scratch_e2_zero");
    auto u = f2tau::vector_weight(v, midw);
    if (!u) return true;
    std::vector<int> rows;
    for (int i = 0; i < (int)v.size(); ++i)
        if (!v[i].is_zero()) rows.push_back(i);
    return ech.member(*u, rows);
}

Element e1_rep(const tab::Dataset& ds, const Element& e2_elt) {
    // Generator index -> E1 cocycle from the may_e2_gen representative column.
    static thread_local const tab::Dataset* cached_ds = nullptr;
    static thread_local std::vector<Element> reps;
    if (cached_ds != &ds) {
        reps.assign(ds.e2.size(), Element::zero());
        for (const auto& r : ds.table("may_e2_gen")) {
            auto gi = ds.e2.find(r.name);
            if (!gi) continue;
            tab::ParsedExpr pe = tab::parse_expression(r.description);
            Element e = Element::zero();
            for (const auto& t : pe.terms) {
                Element term = Element::from(Monomial::one(ds.e1)).times_tau(t.tau_exp);
                for (const auto& [atom, exp] : t.factors) {
                    auto idx = ds.e1.find(atom);
                    if (!idx)
                        throw std::runtime_error("e1_rep: unknown E1 primitive " + atom);
                    Monomial m = Monomial::one(ds.e1);
                    m.e[*idx] = (uint8_t)exp;
                    term = term.times(Element::from(m));
                }
                e = e + term;
            }
            reps[*gi] = e;
        }
        cached_ds = &ds;
    }
    Element out = Element::zero();
    for (const Monomial& m : e2_elt.ms) {
        Element term = Element::from(Monomial::one(ds.e1)).times_tau(m.tau_exp);
        for (int i = 0; i < (int)m.e.size(); ++i)
            for (int k = 0; k < m.e[i]; ++k) {
                if (reps[i].is_zero())
                    throw std::runtime_error("e1_rep: generator " + ds.e2.info(i).name +
                                             " has no E1 representative");
                term = term.times(reps[i]);
            }
        out = out + term;
    }
    return out;
}

// ---------------------------------------------------------------------------
// cross_check

CrossCheckReport cross_check(const Page& a, const Page& b) {
    CrossCheckReport rep;
    std::set<SF> keys;
    for (const auto& [k, _] : a.blocks) keys.insert(k);
    for (const auto& [k, _] : b.blocks) keys.insert(k);
    for (const SF& k : keys) {
        const PageBlock* ba = a.block(k.first, k.second);
        const PageBlock* bb = b.block(k.first, k.second);
        auto normal_form = [](const PageBlock* blk) {
            std::multiset<std::tuple<int, int, int>> nf;  // (kind, torsion, weight)
            if (!blk) return nf;
            for (const auto& s : blk->mod.summands)
                nf.insert({s.kind == f2tau::Summand::Free ? 0 : 1, s.torsion, s.weight});
            return nf;
        };
        auto na = normal_form(ba), nb = normal_form(bb);
        if (na != nb) {
            std::ostringstream os;
            os << "summands differ:";
            auto dump = [&os](const std::multiset<std::tuple<int, int, int>>& n) {
                for (const auto& [kind, t, w] : n)
                    os << ' ' << (kind ? ("tau^" + std::to_string(t)) : std::string("free"))
                       << "@w" << w;
            };
            os << " [a:";
            dump(na);
            os << " ] [b:";
            dump(nb);
            os << " ]";
            rep.mismatches.push_back({k.first, k.second, os.str()});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Differential tables and the representative dictionary

namespace {

// Resolve an expression using the dictionary; nullopt when any atom is absent.
std::optional<Element> resolve_with(const std::map<std::string, Element>& dict,
                                    const Registry& reg, const tab::ParsedExpr& pe) {
    Element out = Element::zero();
    for (const auto& t : pe.terms) {
        Element term = Element::from(Monomial::one(reg)).times_tau(t.tau_exp);
        bool dead = false;
        for (const auto& [atom, exp] : t.factors) {
            if (!atom.empty() && (isdigit((unsigned char)atom[0]))) {
                long long v = std::stoll(atom);
                if (v % 2 == 0) {
                    dead = true;
                    break;
                }
                continue;
            }
            auto it = dict.find(atom);
            if (it == dict.end()) return std::nullopt;
            for (int k = 0; k < exp; ++k) term = term.times(it->second);
        }
        if (!dead) out = out + term;
    }
    return out;
}

std::optional<Element> resolve_with(const std::map<std::string, Element>& dict,
                                    const Registry& reg, const std::string& src) {
    if (src.empty() || src == "?" || src == "-") return std::nullopt;
    tab::ParsedExpr pe;
    try {
        pe = tab::parse_expression(src);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return resolve_with(dict, reg, pe);
}

}  // namespace

std::optional<Element> exact_divide(const Element& a, const Element& b) {
    if (b.is_zero()) throw std::invalid_argument("exact_divide: division by zero");
    Element r = a, q = Element::zero();
    const Monomial& lb = b.ms.back();
    int guard = 0;
    while (!r.is_zero()) {
        if (++guard > 100000) throw std::logic_error("exact_divide: runaway division");
        const Monomial& lr = r.ms.back();
        // lr / lb
        if (lr.tau_exp < lb.tau_exp) return std::nullopt;
        Monomial t;
        t.tau_exp = lr.tau_exp - lb.tau_exp;
        t.e.resize(lr.e.size());
        for (size_t i = 0; i < lr.e.size(); ++i) {
            if (lr.e[i] < lb.e[i]) return std::nullopt;
            t.e[i] = (uint8_t)(lr.e[i] - lb.e[i]);
        }
        q = q + Element::from(t);
        r = r + b.times(Element::from(t));
    }
    return q;
}

DifferentialData build_differential_tables(const tab::Dataset& ds) {
    DifferentialData dd;
    const Registry& reg = ds.e2;

    // Seed the dictionary with every name that already has a polynomial.
    for (const std::string& n : ds.names.names()) {
        const tab::NameEntry* e = ds.names.find(n);
        if (e && e->poly) dd.reps.emplace(n, *e->poly);
    }
    // Names with only a degree: resolved to the unique page class later.
    for (const std::string& n : ds.names.names()) {
        const tab::NameEntry* e = ds.names.find(n);
        if (!e || e->poly || !e->w_known) continue;
        MayDegree d = e->deg;
        if (!e->m_known) d.m = -1;
        dd.degree_atoms.emplace(n, d);
    }

    struct Row {
        const tab::TableRecord* rec;
        int page;
        bool desc_is_rep;
    };
    std::vector<Row> rows;
    auto add_rows = [&](const char* stem, int page, bool desc_is_rep) {
        if (!ds.has_table(stem)) return;
        for (const auto& r : ds.table(stem)) rows.push_back({&r, page, desc_is_rep});
    };
    add_rows("may_d4", 4, true);
    add_rows("may_d6", 6, true);
    add_rows("may_d8", 8, true);
    add_rows("may_einfty_temp", -1, true);
    if (ds.has_table("may_higher"))
        for (const auto& r : ds.table("may_higher")) {
            int page = 0;
            if (r.description == "d12") page = 12;
            else if (r.description == "d16") page = 16;
            else if (r.description == "d32") page = 32;
            else
                throw std::runtime_error("may_higher: unknown page tag '" + r.description +
                                         "' at line " + std::to_string(r.line_no));
            rows.push_back({&r, page, false});
        }

    // Fixpoint harvest of representatives for derived atoms: when a row's
    // representative (description column) resolves and its key is a single
    // product with exactly one unknown atom of exponent one, divide it out.
    for (bool changed = true; changed;) {
        changed = false;
        for (const Row& row : rows) {
            if (!row.desc_is_rep) continue;
            auto R = resolve_with(dd.reps, reg, row.rec->description);
            if (!R || R->is_zero()) continue;
            tab::ParsedExpr key;
            try {
                key = tab::parse_expression(row.rec->name);
            } catch (const std::exception&) {
                continue;
            }
            if (key.terms.size() != 1) continue;
            std::string unknown;
            int unknown_exp = 0;
            Element known = Element::from(Monomial::one(reg)).times_tau(key.terms[0].tau_exp);
            bool bad = false;
            for (const auto& [atom, exp] : key.terms[0].factors) {
                auto it = dd.reps.find(atom);
                if (it == dd.reps.end()) {
                    if (!unknown.empty()) {
                        bad = true;
                        break;
                    }
                    unknown = atom;
                    unknown_exp = exp;
                } else {
                    for (int k = 0; k < exp; ++k) known = known.times(it->second);
                }
            }
            if (bad || unknown.empty() || unknown_exp != 1) continue;
            auto q = exact_divide(*R, known);
            if (!q || q->is_zero()) continue;
            dd.reps.emplace(unknown, *q);
            changed = true;
        }
    }

    // Page tables.
    for (int r : kPages) dd.tables[r].r = r;

    // d2 from may_e2_gen.
    for (const auto& rec : ds.table("may_e2_gen")) {
        auto gi = reg.find(rec.name);
        if (!gi) continue;
        auto it = ds.d2.find(rec.name);
        if (it == ds.d2.end() || it->second.is_zero()) continue;
        Monomial m = Monomial::one(reg);
        m.e[*gi] = 1;
        DiffEntry e;
        e.key = rec.name;
        e.deg = rec.mayd();
        e.rep = Element::from(m);
        e.value = it->second;
        dd.tables[2].entries.push_back(std::move(e));
    }

    for (const Row& row : rows) {
        if (row.page < 0) continue;  // may_einfty_temp: representatives only
        const tab::TableRecord& rec = *row.rec;
        DiffEntry e;
        e.key = rec.name;
        e.deg = rec.mayd();
        std::optional<Element> rep;
        if (row.desc_is_rep) rep = resolve_with(dd.reps, reg, rec.description);
        if (!rep) rep = resolve_with(dd.reps, reg, rec.name);
        if (!rep || rep->is_zero())
            throw std::runtime_error("differential table " + rec.table + ":" +
                                     std::to_string(rec.line_no) + ": representative of '" +
                                     rec.name + "' does not resolve");
        e.rep = *rep;
        if (rec.value_unknown()) {
            e.value_unknown = true;
        } else {
            auto v = resolve_with(dd.reps, reg, rec.value);
            if (v)
                e.value = *v;
            else
                e.value_deg = may_differential_target(e.deg, row.page);
        }
        dd.tables[row.page].entries.push_back(std::move(e));
    }
    return dd;
}

// ---------------------------------------------------------------------------
// Leibniz

namespace {

// A Leibniz candidate: a class with a known d_r (possibly zero) whose
// representative may appear as a factor of other class representatives.
struct Cand {
    std::string key;
    Element rep;
    MayDegree deg{};
    Element value;       // d_r value; zero when the class is a d_r-cycle
    bool unknown = false;  // '?' or unresolved value; using it taints the block
    int cat = 0;  // 0 current table, 1 alive atoms, 2 future keys
};

// Per-page differentiation.  Every class representative is expressed, modulo
// the block's denominators, as a polynomial in candidate representatives; the
// derivation rule applied to that polynomial gives d_r of the class.
class Leibniz {
  public:
    Leibniz(const Page& page, const DifferentialData& dd, int r)
        : page_(page), reg_(*page.reg), r_(r) {
        build_candidates(dd);
    }

    // The d_r matrix from block (s,f) into block (s-1,f+1).
    ModuleMap block_map(SF sf, bool* used_unknown) const;

    const std::vector<std::string>& warnings() const { return warnings_; }

  private:
    void add_cand(Cand c) {
        if (c.rep.is_zero()) return;
        auto d = c.rep.degree(reg_);
        if (!d || d->s > page_.win.max_stem || d->f > page_.win.max_f) return;
        if (d->f == 0) return;  // units are handled by tau bookkeeping
        c.deg = *d;
        cands_.push_back(std::move(c));
    }

    void build_candidates(const DifferentialData& dd) {
        const DifferentialTable& cur = dd.tables.at(r_);
        std::set<std::string> keys_leq;  // keys of tables with page <= r
        for (const auto& [p, t] : dd.tables)
            if (p <= r_)
                for (const auto& e : t.entries) keys_leq.insert(e.key);

        // Category 0: the current table.  Unresolved values fall back to a
        // degree-based lookup of a unique class in the target block.
        for (const auto& e : cur.entries) {
            auto d = e.rep.degree(reg_);
            if (!d || d->s > page_.win.max_stem || d->f > page_.win.max_f) continue;
            Cand c;
            c.key = e.key;
            c.rep = e.rep;
            c.cat = 0;
            if (e.value_unknown) {
                c.unknown = true;
                warnings_.push_back("d" + std::to_string(r_) + "(" + e.key +
                                    ") is unknown ('?'); treated as zero and flagged");
            } else if (!e.value.is_zero()) {
                c.value = e.value;
            } else if (e.value_deg) {
                auto v = lookup_class(*e.value_deg);
                if (v) {
                    c.value = *v;
                } else {
                    c.unknown = true;
                    warnings_.push_back("d" + std::to_string(r_) + "(" + e.key +
                                        "): value did not resolve to a unique class; "
                                        "treated as zero and flagged");
                }
            }
            add_cand(std::move(c));
        }

        // Category 1: d_r-cycles.  E2 generators with d2 = 0, the named atoms
        // of the dictionary, and degree-only names pinned to a unique class --
        // excluding anything tabulated at a page <= r.
        if (r_ == 2) {
            d2_vals_.assign(reg_.size(), Element::zero());
            for (const auto& e : cur.entries) {
                auto gi = reg_.find(e.key);
                if (gi) d2_vals_[*gi] = e.value;
            }
            return;  // page 2 uses the per-generator fast path
        }
        std::set<std::string> d2_nonzero;
        for (const auto& e : dd.tables.at(2).entries) d2_nonzero.insert(e.key);
        for (const auto& [name, rep] : dd.reps) {
            if (keys_leq.count(name)) continue;
            bool is_gen = reg_.find(name).has_value();
            if (is_gen && d2_nonzero.count(name)) continue;
            Cand c;
            c.key = name;
            c.rep = rep;
            c.cat = 1;
            add_cand(std::move(c));
        }
        for (const auto& [name, deg] : dd.degree_atoms) {
            if (keys_leq.count(name) || dd.reps.count(name)) continue;
            if (deg.s > page_.win.max_stem || deg.f > page_.win.max_f) continue;
            auto v = lookup_class(deg);
            if (!v) continue;
            Cand c;
            c.key = name;
            c.rep = *v;
            c.cat = 1;
            add_cand(std::move(c));
        }

        // Category 2: keys of later tables (d_r-cycles on this page).
        for (const auto& [p, t] : dd.tables) {
            if (p <= r_) continue;
            for (const auto& e : t.entries) {
                Cand c;
                c.key = e.key;
                c.rep = e.rep;
                c.cat = 2;
                add_cand(std::move(c));
            }
        }

        // Drop duplicate representatives, keeping the lowest category.
        std::stable_sort(cands_.begin(), cands_.end(), [](const Cand& a, const Cand& b) {
            return std::tie(a.cat, b.deg.s, a.key) < std::tie(b.cat, a.deg.s, b.key);
        });
        std::set<std::string> seen;
        std::vector<Cand> uniq;
        for (Cand& c : cands_)
            if (seen.insert(c.rep.str(reg_)).second) uniq.push_back(std::move(c));
        cands_ = std::move(uniq);
    }

    // A unique nonzero class at the given May degree (m = -1: any filtration),
    // as an element over the E2 registry.
    std::optional<Element> lookup_class(const MayDegree& d) const {
        const PageBlock* b = page_.block(d.s, d.f);
        if (!b) return std::nullopt;
        std::optional<Element> found;
        for (int j = 0; j < (int)b->classes.size(); ++j) {
            if (d.m >= 0 && b->classes[j].m != d.m) continue;
            int wj = b->mod.gen_weights[j];
            int w = page_.classical ? 0 : d.w;
            if (!page_.classical && wj < w) continue;
            TauVec v(b->classes.size());
            v[j] = TauScalar::tau(page_.classical ? 0 : wj - w);
            if (b->mod.is_zero(v)) continue;
            if (found) return std::nullopt;  // ambiguous
            found = scale_tau(reg_, b->classes[j].rep, page_.classical ? 0 : wj - w);
        }
        return found;
    }

    Element d2_monomial(const Monomial& mo) const {
        Element out = Element::zero();
        for (int i = 0; i < (int)mo.e.size(); ++i) {
            if (mo.e[i] % 2 == 0 || d2_vals_[i].is_zero()) continue;
            Monomial rest = mo;
            rest.e[i] -= 1;
            out = out + d2_vals_[i].times(Element::from(rest));
        }
        return scale_tau(reg_, out, mo.tau_exp);
    }

    const Page& page_;
    const Registry& reg_;
    int r_;
    std::vector<Cand> cands_;
    std::vector<Element> d2_vals_;  // r == 2 only: generator index -> d2
    std::vector<std::string> warnings_;
};

ModuleMap Leibniz::block_map(SF sf, bool* used_unknown) const {
    auto [s, f] = sf;
    const PageBlock& src = *page_.block(s, f);
    const PageBlock& dst = *page_.block(s - 1, f + 1);
    WeightedMatrix mat(dst.mod.gen_weights, src.mod.gen_weights);
    if (src.classes.empty()) return ModuleMap(src.mod, dst.mod, std::move(mat));
    BasisIndex dsti = BasisIndex::build(dst.basis);

    auto emit = [&](int j, const Element& dval) {
        if (dval.is_zero()) return;
        TauVec v = coords_over(reg_, dst.basis, dsti, dval, "leibniz value");
        auto cls = dst.express(v);
        if (!cls)
            throw std::logic_error("leibniz: d-value is not a class of block (" +
                                   std::to_string(s - 1) + "," + std::to_string(f + 1) +
                                   "): " + dval.str(reg_));
        for (int i = 0; i < (int)cls->size(); ++i) mat.at(i, j) = (*cls)[i];
    };

    if (r_ == 2) {
        // Fast path: d2 of every generator is tabulated, so differentiate the
        // representative monomial by monomial.
        for (int j = 0; j < (int)src.classes.size(); ++j) {
            Element dval = Element::zero();
            for (const Monomial& mo : src.classes[j].rep.ms)
                dval = dval + d2_monomial(mo);
            emit(j, dval);
        }
        return ModuleMap(src.mod, dst.mod, std::move(mat));
    }

    // Candidate monomials of bidegree (s,f).
    struct CM {
        std::vector<std::pair<int, int>> pows;  // (candidate index, exponent)
        Element rep;
        int w = 0;
    };
    std::vector<CM> mons;
    std::vector<int> usable;
    for (int i = 0; i < (int)cands_.size(); ++i)
        if (cands_[i].deg.s <= s && cands_[i].deg.f <= f) usable.push_back(i);
    std::vector<std::pair<int, int>> pows;
    std::function<void(size_t, int, int, const Element&, int)> dfs =
        [&](size_t i, int sr, int fr, const Element& prod, int w) {
            if (sr == 0 && fr == 0) {
                mons.push_back(CM{pows, prod, w});
                return;
            }
            if (i == usable.size()) return;
            dfs(i + 1, sr, fr, prod, w);
            const Cand& c = cands_[usable[i]];
            Element p = prod;
            for (int a = 1; a * c.deg.s <= sr && a * c.deg.f <= fr; ++a) {
                p = p.times(c.rep);
                pows.emplace_back(usable[i], a);
                dfs(i + 1, sr - a * c.deg.s, fr - a * c.deg.f, p, w + a * c.deg.w);
                pows.pop_back();
            }
        };
    dfs(0, s, f, Element::from(Monomial::one(reg_)), 0);

    // Echelon over the block basis: candidate monomials (tracked) and the
    // block denominators (untracked), in descending column weight.
    BasisIndex bi = BasisIndex::build(src.basis);
    struct Col {
        int w;
        int kind;  // 0 = monomial, 1 = denominator
        int j;
    };
    std::vector<Col> order;
    for (int j = 0; j < (int)mons.size(); ++j) order.push_back({mons[j].w, 0, j});
    for (int j = 0; j < (int)src.denom.size(); ++j)
        order.push_back({src.denom[j].w, 1, j});
    std::sort(order.begin(), order.end(), [](const Col& a, const Col& b) {
        return std::tie(b.w, a.kind, a.j) < std::tie(a.w, b.kind, b.j);
    });
    f2tau::TauEchelon ech(&src.basis_w, (int)mons.size());
    for (const Col& c : order) {
        std::vector<int> rows;
        if (c.kind == 0) {
            TauVec v = coords_over(reg_, src.basis, bi, mons[c.j].rep, "leibniz span");
            for (int i = 0; i < (int)v.size(); ++i)
                if (!v[i].is_zero()) rows.push_back(i);
        } else {
            for (const auto& [row, val] : src.denom[c.j].entries) rows.push_back(row);
        }
        ech.insert(c.w, rows, c.kind == 0 ? c.j : -1);
    }

    // d_r of a candidate monomial, memoized.
    std::map<int, std::pair<Element, bool>> cache;
    auto mon_value = [&](int mj) -> const std::pair<Element, bool>& {
        auto it = cache.find(mj);
        if (it != cache.end()) return it->second;
        Element v = Element::zero();
        bool unk = false;
        const CM& m = mons[mj];
        for (const auto& [ci, a] : m.pows) {
            if (a % 2 == 0) continue;
            const Cand& c = cands_[ci];
            if (c.unknown) {
                unk = true;
                continue;
            }
            if (c.value.is_zero()) continue;
            Element term = c.value;
            for (int k = 0; k < a - 1; ++k) term = term.times(c.rep);
            for (const auto& [cj, b] : m.pows) {
                if (cj == ci) continue;
                for (int k = 0; k < b; ++k) term = term.times(cands_[cj].rep);
            }
            v = v + term;
        }
        return cache.emplace(mj, std::make_pair(std::move(v), unk)).first->second;
    };

    for (int j = 0; j < (int)src.classes.size(); ++j) {
        TauVec v = coords_over(reg_, src.basis, bi, src.classes[j].rep, "leibniz class");
        auto u = f2tau::vector_weight(v, src.basis_w);
        if (!u) continue;
        f2tau::BitVec rows((int)src.basis_w.size()), aug((int)mons.size());
        for (int i = 0; i < (int)v.size(); ++i)
            if (!v[i].is_zero()) rows.set(i);
        ech.reduce(*u, rows, aug);
        if (rows.any()) {
            // Not a polynomial in the page's cycle atoms: such classes are
            // permanent cycles by completeness of the differential tables
            // (every nonzero d_r, including exotic products, is tabulated;
            // the realization check below guards this default).
            continue;
        }
        Element dval = Element::zero();
        for (int mj : aug.bits()) {
            const auto& [mv, unk] = mon_value(mj);
            if (unk && used_unknown) *used_unknown = true;
            if (!mv.is_zero()) dval = dval + scale_tau(reg_, mv, mons[mj].w - *u);
        }
        emit(j, dval);
    }

    // Realization check: every current-table entry whose source degree lies in
    // this block and whose class is nonzero here must be reproduced by the
    // matrix.  This makes the permanent-cycle default above sound.
    for (const Cand& c : cands_) {
        if (c.cat != 0 || c.deg.s != s || c.deg.f != f) continue;
        TauVec vs = coords_over(reg_, src.basis, bi, c.rep, "leibniz check");
        auto cs = src.express(vs);
        if (!cs) continue;  // representative outside the realized page algebra
        bool nz = false;
        for (const auto& t : *cs) nz |= !t.is_zero();
        if (!nz) continue;  // the entry's class already died
        if (c.unknown) {
            if (used_unknown) *used_unknown = true;
            continue;
        }
        TauVec got = mat.apply(*cs);
        TauVec want(dst.mod.num_gens());
        if (!c.value.is_zero()) {
            TauVec vv = coords_over(reg_, dst.basis, dsti, c.value, "leibniz check");
            auto cv = dst.express(vv);
            if (!cv)
                throw std::logic_error("leibniz: tabulated d" + std::to_string(r_) + "(" +
                                       c.key + ") is not a class of the target block");
            want = *cv;
        }
        if (!dst.mod.equal(got, want))
            throw std::logic_error("leibniz: tabulated d" + std::to_string(r_) + "(" +
                                   c.key + ") is not realized by the block (" +
                                   std::to_string(s) + "," + std::to_string(f) +
                                   ") matrix");
    }
    return ModuleMap(src.mod, dst.mod, std::move(mat));
}

}  // namespace

Differential build_differential(const Page& page, const DifferentialData& dd, int r,
                                int threads) {
    Differential d;
    d.r = r;
    Leibniz lz(page, dd, r);
    for (const std::string& w : lz.warnings()) d.warnings.push_back(w);

    std::vector<SF> keys;
    for (const auto& [k, b] : page.blocks) {
        b.build_echelon();  // serial warm-up: express() is then thread-safe
        if (k.first >= 1 && k.second + 1 <= page.win.max_f) keys.push_back(k);
    }
    std::vector<std::optional<ModuleMap>> maps(keys.size());
    std::vector<uint8_t> tainted(keys.size(), 0);
    parallel_for((int)keys.size(), threads, [&](int i) {
        bool unk = false;
        maps[i] = lz.block_map(keys[i], &unk);
        tainted[i] = unk ? 1 : 0;
    });
    for (size_t i = 0; i < keys.size(); ++i) {
        d.maps.emplace(keys[i], std::move(*maps[i]));
        if (tainted[i]) {
            d.tainted.insert(keys[i]);
            d.tainted.insert({keys[i].first - 1, keys[i].second + 1});
        }
    }
    return d;
}

ModuleMap leibniz_matrix(const Page& page, const DifferentialData& dd, int r, SF bidegree) {
    Leibniz lz(page, dd, r);
    if (!page.block(bidegree.first, bidegree.second) ||
        !page.block(bidegree.first - 1, bidegree.second + 1))
        throw std::out_of_range("leibniz_matrix: bidegree outside window");
    return lz.block_map(bidegree, nullptr);
}

void check_d_squared([[maybe_unused]] const Page& page, const Differential& d) {
    for (const auto& [sf, m1] : d.maps) {
        auto it = d.maps.find({sf.first - 1, sf.second + 1});
        if (it == d.maps.end()) continue;
        const ModuleMap& m2 = it->second;
        for (int j = 0; j < m1.mat.cols(); ++j) {
            TauVec v = m2.apply(m1.mat.column(j));
            if (!m2.dst->is_zero(v))
                throw std::logic_error("d-squared-nonzero at (s,f)=(" +
                                       std::to_string(sf.first) + "," +
                                       std::to_string(sf.second) + ") class " +
                                       std::to_string(j) + " on page " +
                                       std::to_string(d.r));
        }
    }
}

Page turn_page(const Page& page, const Differential& d, int threads) {
    Page np;
    np.r = next_page(d.r);
    np.win = page.win;
    np.reg = page.reg;
    np.classical = page.classical;
    np.empty_mod = PresentedTauModule({}, WeightedMatrix({}, {}));

    std::vector<SF> keys;
    for (const auto& [k, _] : page.blocks) {
        keys.push_back(k);
        np.blocks.emplace(k, PageBlock{});
    }
    parallel_for((int)keys.size(), threads, [&](int ki) {
        auto [s, f] = keys[ki];
        const PageBlock& old = page.blocks.at({s, f});
        PageBlock& nb = np.blocks.at({s, f});

        auto in_it = d.maps.find({s + 1, f - 1});
        auto out_it = d.maps.find({s, f});
        WeightedMatrix zin(old.mod.gen_weights, {});
        ModuleMap din = in_it != d.maps.end()
                            ? in_it->second
                            : ModuleMap(page.empty_mod, old.mod, zin);
        ModuleMap dout = out_it != d.maps.end()
                             ? out_it->second
                             : ModuleMap(old.mod, page.empty_mod,
                                         WeightedMatrix({}, old.mod.gen_weights));
        f2tau::HomologyResult h = f2tau::homology_at(din, dout);

        nb.basis = old.basis;
        nb.basis_w = old.basis_w;
        nb.mod = h.module;
        std::vector<TauVec> lcols;
        for (int i = 0; i < h.module.num_gens(); ++i) {
            Element rep = Element::zero();
            for (int j = 0; j < (int)old.classes.size(); ++j) {
                if (h.lifts[i][j].is_zero()) continue;
                rep = rep + scale_tau(*page.reg, old.classes[j].rep, h.lifts[i][j].e);
            }
            if (rep.is_zero())
                throw std::logic_error("turn_page: class representative collapsed");
            nb.classes.push_back(PageClass{rep, rep.min_may_filtration(*page.reg)});
            lcols.push_back(h.lifts[i]);
        }
        WeightedMatrix L =
            from_cols(old.mod.gen_weights, lcols, h.module.gen_weights);
        nb.lift = sparse_mul(old.lift, L);
        // Denominators grow by the incoming boundaries.
        nb.denom = old.denom;
        for (SparseCol& c : sparse_mul(old.lift, din.mat))
            if (!c.entries.empty()) nb.denom.push_back(std::move(c));
        rebase_to_summands(*page.reg, nb);

        // Edge-uncertainty: sticky flags.
        bool edge_in = (s + 1 > page.win.max_stem) && f >= 1;
        bool edge_out = f + 1 > page.win.max_f;
        const PageBlock* upstream = page.block(s + 1, f - 1);
        nb.flagged = old.flagged || edge_in || edge_out || d.tainted.count({s, f}) ||
                     (upstream && upstream->flagged);
    });
    return np;
}

// ---------------------------------------------------------------------------
// run_may and the chart

int EInfinityChart::dim_at(const TriDegree& d) const {
    return page.dim_at(d.s, d.f, page.classical ? 0 : d.w);
}

bool EInfinityChart::is_certain(int s, int f) const {
    auto it = certain.find({s, f});
    return it != certain.end() && it->second;
}

int Tower::index_of(int r) const {
    for (int i = 0; i < (int)std::size(kPages); ++i)
        if (kPages[i] == r) return i;
    throw std::out_of_range("Tower::index_of: no page " + std::to_string(r));
}

const Page& Tower::page_at(int r) const {
    return r == 0 ? einf : pages.at(index_of(r));
}

const Differential& Tower::diff_at(int r) const { return diffs.at(index_of(r)); }

Tower compute_tower(const tab::Dataset& ds, Window win, int threads) {
    Tower t;
    t.win = win;
    t.reg = &ds.e2;
    PagePresentation pres = presentation_from_tables(ds);
    Page page = realize_presentation(pres, win, threads);
    t.dd = build_differential_tables(ds);
    for (int r : kPages) {
        Differential d = build_differential(page, t.dd, r, threads);
        check_d_squared(page, d);
        for (const auto& w : d.warnings) t.warnings.push_back(w);
        Page next = turn_page(page, d, threads);
        t.pages.push_back(std::move(page));
        t.diffs.push_back(std::move(d));
        page = std::move(next);
    }
    t.einf = std::move(page);
    return t;
}

EInfinityChart run_may(const tab::Dataset& ds, Window win, int threads) {
    Tower t = compute_tower(ds, win, threads);
    Page page = std::move(t.einf);

    EInfinityChart chart;
    chart.warnings = std::move(t.warnings);
    for (const auto& [k, b] : page.blocks) chart.certain[k] = !b.flagged;

    // Resolve generator names where the degree pins down a unique class.
    auto try_name = [&](const std::string& name, const MayDegree& deg) {
        if (!win.contains(deg.s, deg.f)) return;
        const PageBlock* b = page.block(deg.s, deg.f);
        if (!b) return;
        int hit = -1;
        for (int j = 0; j < (int)b->classes.size(); ++j) {
            int w = page.classical ? 0 : deg.w;
            if (b->mod.gen_weights[j] != w) continue;
            if (b->classes[j].m != deg.m) continue;
            if (hit >= 0) return;  // ambiguous
            hit = j;
        }
        if (hit >= 0) chart.names[name] = {deg.s, deg.f, hit};
    };
    for (const auto& r : ds.table("may_e2_gen")) try_name(r.name, r.mayd());
    if (ds.has_table("may_einfty_temp"))
        for (const auto& r : ds.table("may_einfty_temp")) try_name(r.name, r.mayd());

    chart.page = std::move(page);
    return chart;
}

// ---------------------------------------------------------------------------
// Hidden overlay

int ExtStructure::applied_count() const {
    int n = 0;
    for (const auto& r : records) n += r.applied ? 1 : 0;
    return n;
}

ExtStructure apply_hidden_overlay(const EInfinityChart& chart, const tab::Dataset& ds) {
    ExtStructure ext;
    struct Op {
        const char* table;
        const char* op;
        TriDegree deg;
    };
    const Op ops[] = {{"may_tau", "tau", {0, 0, -1}},
                      {"may_h0", "h0", {0, 1, 0}},
                      {"may_h1", "h1", {1, 1, 1}},
                      {"may_h2", "h2", {3, 1, 2}}};
    const Window& win = chart.page.win;
    for (const Op& op : ops) {
        if (!ds.has_table(op.table)) continue;
        for (const auto& r : ds.table(op.table)) {
            OverlayRecord rec;
            rec.table = op.table;
            rec.line_no = r.line_no;
            rec.op = op.op;
            rec.source = r.name;
            rec.target = r.value;
            rec.dst_deg = r.tri();
            rec.src_deg = rec.dst_deg - op.deg;
            if (!win.contains(rec.src_deg.s, rec.src_deg.f) ||
                !win.contains(rec.dst_deg.s, rec.dst_deg.f)) {
                rec.note = "outside window";
            } else if (chart.dim_at(rec.src_deg) < 1) {
                rec.note = "source not found in chart";
            } else if (chart.dim_at(rec.dst_deg) < 1) {
                rec.note = "target not found in chart";
            } else {
                rec.applied = true;
            }
            ext.records.push_back(std::move(rec));
        }
    }
    if (ds.has_table("may_misc")) {
        for (const auto& r : ds.table("may_misc")) {
            OverlayRecord rec;
            rec.table = "may_misc";
            rec.line_no = r.line_no;
            rec.op = "misc";
            auto st = tab::split_statement(r.name);
            rec.source = st ? st->lhs : r.name;
            rec.target = st ? st->rhs : r.value;
            rec.dst_deg = rec.src_deg =
                r.degree.size() == 3 ? r.tri() : TriDegree{r.degree[0], 0, 0};
            if (!win.contains(rec.src_deg.s, rec.src_deg.f))
                rec.note = "outside window";
            else
                rec.applied = true;
            ext.records.push_back(std::move(rec));
        }
    }
    for (const char* t : {"ext_ambiguous"}) {
        if (!ds.has_table(t)) continue;
        for (const auto& r : ds.table(t))
            ext.ambiguous[r.name] = 1 + (int)tab::split_alternatives(r.value).size();
    }
    return ext;
}

}  // namespace may::eng
