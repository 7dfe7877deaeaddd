#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <random>
#include <thread>

#include "mayengine/engine.hpp"

using namespace may;
using namespace may::eng;
using f2tau::ModuleMap;
using f2tau::TauVec;

static std::filesystem::path data_dir() { return MAYENGINE_DATA_DIR; }

static int nthreads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : (int)std::min(hc, 8u);
}

// Shared fixture: the full motivic run at the default window, with every page
// and differential retained, plus a classical run with margin.
struct Fixture {
    tab::Dataset ds = tab::load_dataset(data_dir(), 70);
    tab::Dataset ds_cl = tab::load_dataset(data_dir(), 70, true);
    Window win{40, 24};
    Page scratch, e2;
    DifferentialData dd;
    std::vector<Page> pages;          // pages[i] is the page at r = kPages[i]
    std::vector<Differential> diffs;  // diffs[i] is d_{kPages[i]}
    Page einf;                        // r == 0
    EInfinityChart chart_cl;          // classical, window (26,24)

    Fixture() {
        int T = nthreads();
        e2 = realize_presentation(presentation_from_tables(ds), win, T);
        scratch = compute_e2_scratch(ds, win, T);
        dd = build_differential_tables(ds);
        Page cur = e2;
        for (int r : kPages) {
            Differential d = build_differential(cur, dd, r, T);
            check_d_squared(cur, d);
            Page next = turn_page(cur, d, T);
            pages.push_back(std::move(cur));
            diffs.push_back(std::move(d));
            cur = std::move(next);
        }
        einf = std::move(cur);
        chart_cl = run_may(ds_cl, Window{26, 24}, T);
    }
};

static Fixture& fix() {
    static Fixture f;
    return f;
}

static std::optional<TauVec> cls_coords(const Page& pg, int s, int f,
                                        const alg::Element& e) {
    const PageBlock* b = pg.block(s, f);
    if (!b) return std::nullopt;
    return b->express(pg.coords(s, f, e));
}

static alg::Element resolve(const tab::Dataset& ds, const std::string& expr) {
    auto e = ds.names.resolve(tab::parse_expression(expr), ds.e2);
    REQUIRE(e);
    return *e;
}

TEST_CASE("criterion 1: d1 is a differential on every E1 monomial in range") {
    auto& F = fix();
    auto t0 = std::chrono::steady_clock::now();
    std::atomic<long> checked{0}, bad{0};
    std::atomic<int> cursor{0};
    const int T = nthreads();
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t)
        pool.emplace_back([&] {
            for (;;) {
                int k = cursor.fetch_add(1);
                if (k > 40 * 25) break;
                int s = k / 25, f = k % 25;
                long c = 0, b = 0;
                for (int w = 0; w <= s; ++w)
                    for (const auto& mo :
                         enumerate_monomials(F.ds.e1, TriDegree{s, f, w}, true, 40)) {
                        if (mo.may_filtration(F.ds.e1) > 24) continue;
                        ++c;
                        if (!alg::d1(F.ds.e1,
                                     alg::d1(F.ds.e1, alg::Element::from(mo)))
                                 .is_zero())
                            ++b;
                    }
                checked += c;
                bad += b;
            }
        });
    for (auto& th : pool) th.join();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    CHECK(checked > 100000);
    CHECK(bad == 0);
    CHECK(secs < 60.0);
}

TEST_CASE("criterion 2: scratch and presented E2 agree; all generators detected") {
    auto& F = fix();
    long mismatches = 0;
    for (int s = 0; s <= 40; ++s)
        for (int f = 0; f <= 24; ++f)
            for (int w = 0; w <= s; ++w)
                if (F.e2.dim_at(s, f, w) != F.scratch.dim_at(s, f, w)) {
                    ++mismatches;
                    CAPTURE(s);
                    CAPTURE(f);
                    CAPTURE(w);
                    CHECK(F.e2.dim_at(s, f, w) == F.scratch.dim_at(s, f, w));
                }
    CHECK(mismatches == 0);

    for (const auto& r : F.ds.table("may_e2_gen")) {
        MayDegree d = r.mayd();
        if (d.s > 40) continue;
        CAPTURE(r.name);
        const PageBlock* b = F.scratch.block(d.s, d.f);
        REQUIRE(b);
        int hits = 0;
        for (int j = 0; j < (int)b->classes.size(); ++j)
            if (b->classes[j].m == d.m && b->mod.gen_weights[j] == d.w) ++hits;
        CHECK(hits >= 1);
        CHECK(F.ds.e2.find(r.name).has_value());
    }
}

TEST_CASE("criterion 3: every tabulated E2 relation holds in the scratch E2") {
    auto& F = fix();
    PagePresentation p = presentation_from_tables(F.ds);
    int checked = 0;
    for (size_t i = 0; i < p.relations.size(); ++i) {
        if (p.relation_degs[i].s > 46) continue;
        CAPTURE(p.relations[i].str(F.ds.e2));
        alg::Element e1 = e1_rep(F.ds, p.relations[i]);
        CHECK(scratch_e2_zero(F.ds, e1));
        ++checked;
    }
    CHECK(checked >= 40);
}

// F2 rank of the weight-w slice of a block map (modules in normal form).
static int slice_rank(const ModuleMap& f, int w) {
    std::vector<std::vector<uint64_t>> rows;  // echelon over dst gen indices
    std::vector<int> pivot_of(f.dst->num_gens(), -1);
    int rank = 0;
    for (int j = 0; j < f.src->num_gens(); ++j) {
        int wj = f.src->gen_weights[j];
        if (wj < w) continue;
        TauVec unit(f.src->num_gens());
        unit[j] = f2tau::TauScalar::tau(wj - w);
        if (f.src->is_zero(unit)) continue;  // slice basis vector is zero
        TauVec img = f.dst->reduce(f.apply(unit));
        std::vector<uint64_t> v((f.dst->num_gens() + 63) / 64, 0);
        bool any = false;
        for (int i = 0; i < (int)img.size(); ++i)
            if (!img[i].is_zero()) {
                v[i / 64] ^= 1ull << (i % 64);
                any = true;
            }
        if (!any) continue;
        for (;;) {
            int low = -1;
            for (int k = 0; k < (int)v.size() && low < 0; ++k)
                if (v[k]) low = k * 64 + __builtin_ctzll(v[k]);
            if (low < 0) break;
            if (pivot_of[low] < 0) {
                pivot_of[low] = (int)rows.size();
                rows.push_back(std::move(v));
                ++rank;
                break;
            }
            const auto& pv = rows[pivot_of[low]];
            for (size_t k = 0; k < pv.size(); ++k) v[k] ^= pv[k];
        }
    }
    return rank;
}

TEST_CASE("criterion 4: page mechanics (d^2, Leibniz, rank-nullity, monotone dims)") {
    auto& F = fix();
    for (size_t pi = 0; pi < F.pages.size(); ++pi) {
        const Page& pg = F.pages[pi];
        const Differential& d = F.diffs[pi];
        const Page& nxt = pi + 1 < F.pages.size() ? F.pages[pi + 1] : F.einf;
        CAPTURE(pg.r);

        CHECK_NOTHROW(check_d_squared(pg, d));

        // Rank-nullity and weak decrease, per weight slice.
        long rn_bad = 0, mono_bad = 0;
        for (const auto& [sf, blk] : pg.blocks) {
            auto [s, f] = sf;
            for (int w = 0; w <= s; ++w) {
                int cur = pg.dim_at(s, f, w);
                int next = nxt.dim_at(s, f, w);
                auto out_it = d.maps.find({s, f});
                auto in_it = d.maps.find({s + 1, f - 1});
                int r_out = out_it != d.maps.end() ? slice_rank(out_it->second, w) : 0;
                int r_in = in_it != d.maps.end() ? slice_rank(in_it->second, w) : 0;
                if (next != cur - r_out - r_in) ++rn_bad;
                if (next > cur) ++mono_bad;
            }
        }
        CHECK(rn_bad == 0);
        CHECK(mono_bad == 0);

        // Leibniz on 1000 random products.
        std::mt19937 rng(20240800 + pg.r);
        std::vector<SF> keys;
        for (const auto& [k, b] : pg.blocks)
            if (!b.classes.empty()) keys.push_back(k);
        long done = 0, attempts = 0, leib_bad = 0;
        while (done < 1000 && attempts < 200000) {
            ++attempts;
            SF k1 = keys[rng() % keys.size()];
            SF k2 = keys[rng() % keys.size()];
            int s = k1.first + k2.first, f = k1.second + k2.second;
            if (!pg.win.contains(s, f) || f + 1 > pg.win.max_f || s < 1) continue;
            auto m1 = d.maps.find(k1), m2 = d.maps.find(k2), mp = d.maps.find({s, f});
            if (mp == d.maps.end()) continue;
            const PageBlock& b1 = *pg.block(k1.first, k1.second);
            const PageBlock& b2 = *pg.block(k2.first, k2.second);
            int i1 = (int)(rng() % b1.classes.size());
            int i2 = (int)(rng() % b2.classes.size());
            TauVec x(b1.classes.size()), y(b2.classes.size());
            x[i1] = f2tau::TauScalar::one();
            y[i2] = f2tau::TauScalar::one();
            alg::Element ex = class_element(pg, k1, x);
            alg::Element ey = class_element(pg, k2, y);
            alg::Element exy = ex.times(ey);
            auto cxy = cls_coords(pg, s, f, exy);
            REQUIRE(cxy);
            TauVec lhs = mp->second.dst->reduce(mp->second.apply(*cxy));

            alg::Element rhs_elt = alg::Element::zero();
            if (m1 != d.maps.end()) {
                TauVec dx = m1->second.apply(x);
                rhs_elt = rhs_elt +
                          class_element(pg, {k1.first - 1, k1.second + 1}, dx).times(ey);
            }
            if (m2 != d.maps.end()) {
                TauVec dy = m2->second.apply(y);
                rhs_elt = rhs_elt +
                          ex.times(class_element(pg, {k2.first - 1, k2.second + 1}, dy));
            }
            TauVec rhs(mp->second.dst->num_gens());
            if (!rhs_elt.is_zero()) {
                auto cr = cls_coords(pg, s - 1, f + 1, rhs_elt);
                REQUIRE(cr);
                rhs = *cr;
            }
            if (!mp->second.dst->equal(lhs, rhs)) ++leib_bad;
            ++done;
        }
        CHECK(done == 1000);
        CHECK(leib_bad == 0);
    }
}

TEST_CASE("criterion 5: the landmark differentials") {
    auto& F = fix();
    const Page& p2 = F.pages[0];
    const Page& p4 = F.pages[1];
    const Page& p8 = F.pages[3];

    // d2(b20) = tau*h1^3 + h0^2*h2.
    {
        auto src = cls_coords(p2, 4, 2, resolve(F.ds, "b20"));
        REQUIRE(src);
        const ModuleMap& m = F.diffs[0].maps.at({4, 2});
        auto want = cls_coords(p2, 3, 3, resolve(F.ds, "tau*h1^3+h0^2*h2"));
        REQUIRE(want);
        CHECK(m.dst->equal(m.apply(*src), *want));
    }
    // d4(g) = h1^4*h4 and d4(tau*g) = 0 on E4.
    {
        auto src = cls_coords(p4, 20, 4, resolve(F.ds, "g"));
        REQUIRE(src);
        const ModuleMap& m = F.diffs[1].maps.at({20, 4});
        auto want = cls_coords(p4, 19, 5, resolve(F.ds, "h1^4*h4"));
        REQUIRE(want);
        CHECK(m.dst->equal(m.apply(*src), *want));
        CHECK_FALSE(m.dst->is_zero(*want));

        auto tg = cls_coords(p4, 20, 4, resolve(F.ds, "tau*g"));
        REQUIRE(tg);
        CHECK(m.dst->is_zero(m.apply(*tg)));
    }
    // d8(g^2) = h1^8*h5.
    {
        auto src = cls_coords(p8, 40, 8, resolve(F.ds, "g^2"));
        REQUIRE(src);
        const ModuleMap& m = F.diffs[3].maps.at({40, 8});
        auto want = cls_coords(p8, 39, 9, resolve(F.ds, "h1^8*h5"));
        REQUIRE(want);
        CHECK(m.dst->equal(m.apply(*src), *want));
        CHECK_FALSE(m.dst->is_zero(*want));
    }
}

TEST_CASE("criterion 6: E-infinity spot checks") {
    auto& F = fix();
    // (20,4): free of rank 1, generator weight 11 (tau*g).
    const PageBlock* b = F.einf.block(20, 4);
    REQUIRE(b);
    REQUIRE(b->mod.summands.size() == 1);
    CHECK(b->mod.summands[0].kind == f2tau::Summand::Free);
    CHECK(b->mod.summands[0].weight == 11);
    CHECK_FALSE(b->flagged);
    // The h0 tower: (0,k) free of rank 1 and weight 0 for k <= 24.
    for (int k = 0; k <= 24; ++k) {
        CAPTURE(k);
        const PageBlock* t = F.einf.block(0, k);
        REQUIRE(t);
        REQUIRE(t->mod.summands.size() == 1);
        CHECK(t->mod.summands[0].kind == f2tau::Summand::Free);
        CHECK(t->mod.summands[0].weight == 0);
    }
}

TEST_CASE("criterion 7: the Chow-degree-zero slice is the classical E-infinity") {
    auto& F = fix();
    long bad = 0;
    for (int S = 0; S <= 40; ++S)
        for (int Ff = 0; Ff <= 24; ++Ff) {
            if ((S - Ff) % 2 != 0 || S < Ff) continue;
            int s = (S - Ff) / 2;
            if (s > 13) continue;
            int w = (S + Ff) / 2;
            int mot = F.einf.dim_at(S, Ff, w);
            int cl = F.chart_cl.page.dim_at(s, Ff, 0);
            if (mot != cl) {
                ++bad;
                CAPTURE(S);
                CAPTURE(Ff);
                CAPTURE(w);
                CHECK(mot == cl);
            }
        }
    CHECK(bad == 0);
}

TEST_CASE("criterion 8: free ranks recover the classical chart after tau-inversion") {
    auto& F = fix();
    long bad = 0;
    for (int s = 0; s <= 20; ++s)
        for (int f = 0; f <= 24; ++f) {
            int mot = F.einf.free_rank_at(s, f);
            int cl = F.chart_cl.page.dim_at(s, f, 0);
            if (mot != cl) {
                ++bad;
                CAPTURE(s);
                CAPTURE(f);
                CHECK(mot == cl);
            }
        }
    CHECK(bad == 0);
}
