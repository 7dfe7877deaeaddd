#pragma once
// The May spectral sequence engine: the E2-page computed two independent ways
// (d1-homology from scratch vs. the curated generator/relation presentation),
// Leibniz extension of the tabulated generator differentials, page turning
// through r = 2, 4, 6, 8, 12, 16, 32 to E-infinity, and the hidden-extension
// overlay on the resulting chart.
//
// Every page stores, per bidegree (s,f), a finitely presented F2[tau]-module
// whose generators are the page's classes.  A class carries a representative
// polynomial in the named E2 generators, so higher differentials are exact
// symbolic computations: a representative is factored into classes with
// tabulated (or tabulated-zero) d_r values and the derivation rule is applied.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mayengine/f2tau.hpp"
#include "mayengine/tables.hpp"

namespace may::eng {

// The computation window.  Blocks exist for 0 <= s <= max_stem, 0 <= f <= max_f.
struct Window {
    int max_stem = 40;
    int max_f = 24;
    bool contains(int s, int f) const {
        return s >= 0 && s <= max_stem && f >= 0 && f <= max_f;
    }
};

using SF = std::pair<int, int>;  // (stem, Adams filtration)

// The even pages of the motivic May spectral sequence; odd differentials vanish.
inline constexpr int kPages[] = {2, 4, 6, 8, 12, 16, 32};
int next_page(int r);  // 2->4->...->32->0 (0 denotes E-infinity)

// ---------------------------------------------------------------------------
// The E2 presentation assembled from the generator and relation tables.
struct PagePresentation {
    int r = 2;
    const alg::Registry* reg = nullptr;        // E2 generator registry
    std::vector<alg::Element> relations;       // homogeneous, over reg
    std::vector<MayDegree> relation_degs;
};
PagePresentation presentation_from_tables(const tab::Dataset& ds);

// ---------------------------------------------------------------------------
// One page r differential table: the tabulated nonzero d_r values.
struct DiffEntry {
    std::string key;                  // table name cell (possibly composite, "P*i")
    MayDegree deg;                    // listed May degree of the source
    alg::Element rep;                 // representative over the E2 registry
    alg::Element value;               // d_r value over the E2 registry (may be empty)
    std::optional<MayDegree> value_deg;  // set when the value could not be resolved
                                         // symbolically (degree-based fallback)
    bool value_unknown = false;       // a literal '?' in the table
};
struct DifferentialTable {
    int r = 2;
    std::vector<DiffEntry> entries;
};
// Tables for every page in kPages (possibly empty), from may_e2_gen's d2
// column, may_d4/may_d6/may_d8 and may_higher.  Also harvests representative
// polynomials for derived atoms (i, r, Q', Y, x34, ...) used by the Leibniz
// factorization; the harvested dictionary is returned alongside.
struct DifferentialData {
    std::map<int, DifferentialTable> tables;
    std::map<std::string, alg::Element> reps;  // atom -> polynomial over E2 gens
    // Named classes with a known degree but no polynomial (g2, x, d1, ...).
    // They are pinned to the unique page class at that degree when needed.
    // m = -1 when the May filtration is not recorded.
    std::map<std::string, MayDegree> degree_atoms;
};
DifferentialData build_differential_tables(const tab::Dataset& ds);

// A sparse weight-homogeneous column over a block's monomial basis: entry at
// row i is tau^e with e = basis_w[i] - w.
struct SparseCol {
    int w = 0;
    std::vector<std::pair<int, f2tau::TauScalar>> entries;  // (row, scalar)
};
using SparseCols = std::vector<SparseCol>;

// ---------------------------------------------------------------------------
// A page.
struct PageClass {
    alg::Element rep;  // representative over the page's registry
    int m = 0;         // May filtration of the representative
};

struct PageBlock {
    // Fixed coordinate frame: the tau-free monomials of this bidegree.
    std::vector<alg::Monomial> basis;
    std::vector<int> basis_w;
    // The page module; generators are the current classes.
    f2tau::PresentedTauModule mod;
    std::vector<PageClass> classes;
    // Class representatives and accumulated denominators in basis coordinates.
    // lift columns express classes, denom columns span relations + boundaries.
    SparseCols lift;
    SparseCols denom;
    bool flagged = false;  // edge-uncertainty (window boundary or unknown data)

    PageBlock() = default;
    PageBlock(PageBlock&&) = default;
    PageBlock& operator=(PageBlock&&) = default;
    // Copies drop the lazily built echelon cache.
    PageBlock(const PageBlock& o)
        : basis(o.basis), basis_w(o.basis_w), mod(o.mod), classes(o.classes),
          lift(o.lift), denom(o.denom), flagged(o.flagged) {}
    PageBlock& operator=(const PageBlock& o) {
        if (this != &o) *this = PageBlock(o);
        return *this;
    }

    // Express a basis-coordinate vector in class coordinates (canonical,
    // reduced); nullopt when the vector is not in the span of classes+denoms.
    std::optional<f2tau::TauVec> express(const f2tau::TauVec& v) const;
    int dim_at_weight(int w) const { return mod.dim_at_weight(w); }
    // Force the lazy coordinatizer; call before sharing the block across
    // threads (express itself is not thread-safe on first use).
    void build_echelon() const;

  private:
    mutable std::unique_ptr<f2tau::TauEchelon> ech_;
    mutable bool ech_built_ = false;
    friend struct Page;
};

struct Page {
    int r = 2;
    Window win;
    const alg::Registry* reg = nullptr;
    bool classical = false;
    std::map<SF, PageBlock> blocks;  // complete over the window
    f2tau::PresentedTauModule empty_mod;

    const PageBlock* block(int s, int f) const;
    int dim_at(int s, int f, int w) const;
    int free_rank_at(int s, int f) const;
    // Basis-coordinate vector of an element over `reg` living at block (s,f);
    // throws when a monomial falls outside the block.
    f2tau::TauVec coords(int s, int f, const alg::Element& e) const;
};

// The element (over page.reg) represented by class coordinates x at block sf.
alg::Element class_element(const Page& page, SF sf, const f2tau::TauVec& x);

// Scratch E2: per-(m,s,f) homology of (E1,d1), assembled per (s,f).
// Class representatives live over the E1 registry.
Page compute_e2_scratch(const tab::Dataset& ds, Window win, int threads = 1);

// Presented E2 over the E2 registry: monomial span modulo relation multiples.
Page realize_presentation(const PagePresentation& p, Window win, int threads = 1);

// Is a homogeneous E1 element zero as a class of the scratch E2?  Throws
// std::logic_error when the element is not a d1-cycle.
bool scratch_e2_zero(const tab::Dataset& ds, const alg::Element& e1_elt);

// Expand an element over the E2 registry into its E1-cocycle representative
// (using the may_e2_gen representative column).
alg::Element e1_rep(const tab::Dataset& ds, const alg::Element& e2_elt);

// ---------------------------------------------------------------------------
// Dual-path comparison.
struct CrossCheckReport {
    struct Mismatch {
        int s = 0, f = 0;
        std::string detail;
    };
    std::vector<Mismatch> mismatches;
    bool ok() const { return mismatches.empty(); }
};
CrossCheckReport cross_check(const Page& a, const Page& b);

// ---------------------------------------------------------------------------
// The page-r differential as per-block module maps.
struct Differential {
    int r = 2;
    // maps[(s,f)]: block (s,f) -> block (s-1,f+1).
    std::map<SF, f2tau::ModuleMap> maps;
    std::vector<std::string> warnings;  // unfactorable / unresolved-value notes
    std::set<SF> tainted;               // blocks whose map used unknown data
};
// All block maps for d_r via the Leibniz rule.  Needs the complete
// DifferentialData (not just page r's table) to decide which atoms are alive
// on page r.  Verifies that each map descends to the page modules.
Differential build_differential(const Page& page, const DifferentialData& dd, int r,
                                int threads = 1);
// Single-bidegree variant (spec operation).
f2tau::ModuleMap leibniz_matrix(const Page& page, const DifferentialData& dd, int r,
                                SF bidegree);

// Throws std::logic_error("d-squared-nonzero ...") on failure.
void check_d_squared(const Page& page, const Differential& d);

// Homology of every block; the result is the next page in kPages (or r=0 for
// E-infinity after page 32).
Page turn_page(const Page& page, const Differential& d, int threads = 1);

// ---------------------------------------------------------------------------
// The full computed tower: every retained page and differential.  This is the
// substrate for Massey products (null-homotopy solving on one page, crossing-
// differential scans across all later pages) and for the Ctau assembly.
struct Tower {
    Window win;
    const alg::Registry* reg = nullptr;
    DifferentialData dd;
    std::vector<Page> pages;          // pages[i] is the page at r = kPages[i]
    std::vector<Differential> diffs;  // diffs[i] is d_{kPages[i]}
    Page einf;                        // r == 0
    std::vector<std::string> warnings;

    int index_of(int r) const;         // position of r in kPages; throws on bad r
    const Page& page_at(int r) const;  // r in kPages, or 0 for E-infinity
    const Differential& diff_at(int r) const;
};
Tower compute_tower(const tab::Dataset& ds, Window win, int threads = 1);

// ---------------------------------------------------------------------------
// The E-infinity chart.
struct EInfinityChart {
    Page page;  // r == 0
    std::map<SF, bool> certain;  // false = edge-uncertainty flag
    // Names from may_e2_gen / may_einfty_temp resolved to a unique class:
    // name -> (s, f, class index).
    std::map<std::string, std::tuple<int, int, int>> names;
    std::vector<std::string> warnings;

    int dim_at(const TriDegree& d) const;
    bool is_certain(int s, int f) const;
};
EInfinityChart run_may(const tab::Dataset& ds, Window win, int threads = 1);

// ---------------------------------------------------------------------------
// Hidden-extension overlay.
struct OverlayRecord {
    std::string table;   // may_tau / may_h0 / may_h1 / may_h2 / may_misc
    int line_no = 0;
    std::string op;      // "tau", "h0", "h1", "h2" or "misc"
    std::string source, target;
    TriDegree src_deg{}, dst_deg{};
    bool applied = false;
    std::string note;    // reason when not applied
};
struct ExtStructure {
    std::vector<OverlayRecord> records;
    // Deliberately ambiguous names (Table Ext-ambiguous): name -> coset size.
    std::map<std::string, int> ambiguous;
    int applied_count() const;
};
ExtStructure apply_hidden_overlay(const EInfinityChart& chart, const tab::Dataset& ds);

// ---------------------------------------------------------------------------
// Exact division in the polynomial algebra over a registry: q with a = b*q,
// nullopt when b does not divide a.  (Used by the Leibniz factorization and
// exposed for tests.)
std::optional<alg::Element> exact_divide(const alg::Element& a, const alg::Element& b);

}  // namespace may::eng
