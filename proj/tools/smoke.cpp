// Throwaway smoke driver for engine bring-up (not part of the test suite).
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "mayengine/engine.hpp"

using namespace may;
using namespace may::eng;

static double now() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

int main(int argc, char** argv) {
    int max_stem = argc > 1 ? atoi(argv[1]) : 14;
    int max_f = argc > 2 ? atoi(argv[2]) : 10;
    int threads = argc > 3 ? atoi(argv[3]) : 4;
    tab::Dataset ds = tab::load_dataset(tab::resolve_data_dir(""), 70);
    Window win{max_stem, max_f};

    double t0 = now();
    auto pres = presentation_from_tables(ds);
    Page pe2 = realize_presentation(pres, win, threads);
    printf("realize_presentation: %.2fs\n", now() - t0);

    t0 = now();
    Page se2 = compute_e2_scratch(ds, win, threads);
    printf("compute_e2_scratch:  %.2fs\n", now() - t0);

    auto rep = cross_check(pe2, se2);
    printf("cross_check: %zu mismatches\n", rep.mismatches.size());
    for (size_t i = 0; i < rep.mismatches.size() && i < 12; ++i)
        printf("  (%d,%d): %s\n", rep.mismatches[i].s, rep.mismatches[i].f,
               rep.mismatches[i].detail.c_str());

    // dims sanity
    printf("dims: (0,0,0)=%d (1,1,1)=%d (3,1,2)=%d (4,2,2)=%d (8,4,4)=%d\n",
           pe2.dim_at(0, 0, 0), pe2.dim_at(1, 1, 1), pe2.dim_at(3, 1, 2),
           pe2.dim_at(4, 2, 2), pe2.dim_at(8, 4, 4));

    t0 = now();
    DifferentialData dd = build_differential_tables(ds);
    printf("build_differential_tables: %.2fs, %zu reps\n", now() - t0, dd.reps.size());
    for (const char* n : {"i", "r", "Q'", "Y", "X", "g2", "x", "x34"}) {
        auto it = dd.reps.find(n);
        printf("  rep[%s] = %s\n", n,
               it == dd.reps.end() ? "<none>" : it->second.str(ds.e2).c_str());
    }

    Page page = pe2;
    for (int r : kPages) {
        t0 = now();
        Differential d = build_differential(page, dd, r, threads);
        check_d_squared(page, d);
        page = turn_page(page, d, threads);
        printf("page %d -> %d: %.2fs (%zu warnings)\n", r, page.r, now() - t0,
               d.warnings.size());
        for (const auto& w : d.warnings) printf("    warn: %s\n", w.c_str());
    }
    printf("Einf dims: (0,1,0)=%d (0,4,0)=%d (14,4,8)=%d (8,3,5)=%d\n",
           page.dim_at(0, 1, 0), page.dim_at(0, 4, 0), page.dim_at(14, 4, 8),
           page.dim_at(8, 3, 5));
    return 0;
}
