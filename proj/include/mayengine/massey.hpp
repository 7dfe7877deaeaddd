#pragma once
// Massey products in the differential graded algebra (E_r, d_r): threefold,
// matric threefold, and fourfold brackets with indeterminacy and with the
// crossing-differential convergence checks of May's Convergence Theorem.
//
// A bracket is computed from null-homotopies solved on page r; the returned
// representative is a d_r-cycle whose class on the next page detects an
// element of the Ext bracket, provided the convergence verdict is `accepted`:
// no later differential d_t whose source sits at the degree (s,f,w) of a
// null-homotopy with May filtration m' >= m and m' - t < m - r is nonzero.
// Brackets of the Hirsch form <h_n, x, h_n> use the cochain-level formula
// (tau*h1*x for n = 0, h_{n+1}*x for n >= 1), which needs no crossing scan.

#include <optional>
#include <string>
#include <vector>

#include "mayengine/engine.hpp"

namespace may::mas {

enum class Verdict { Accepted, Rejected, Unverifiable };

struct CrossingWitness {
    int t = 0;            // page of the crossing differential
    alg::Element source;  // the crossing class (over the E2 registry)
    alg::Element value;   // its nonzero d_t value
    std::string text;     // "d4(Delta*h1^2) = P*h1^2*h4"
};

struct MasseyResult {
    bool defined = false;
    std::string error;  // set when !defined: undefined | no-null-homotopy |
                        // subbracket-indeterminate | window-exceeded | ...
    int r = 2;          // page the bracket was computed on
    MayDegree deg{};    // degree of the bracket (m = detection filtration)
    alg::Element rep;   // representative, a d_r-cycle over the E2 registry
    // F2-basis of a0*(next page) + (next page)*a_last in the bracket degree.
    std::vector<alg::Element> indeterminacy;
    Verdict verdict = Verdict::Unverifiable;
    std::optional<CrossingWitness> witness;
    std::string note;  // "hirsch" when Prop. Massey-hn supplied the representative
};

// tau as an Element over a registry (degree (0,0,0,-1)).
alg::Element tau_element(const alg::Registry& reg);

// Threefold bracket <a0,a1,a2> in (E_r, d_r).  Null-homotopies a01 (with
// d_r(a01) = a0*a1) and a12 (with d_r(a12) = a1*a2) are solved canonically
// via solve_preimage, or may be supplied explicitly (validated, then used
// verbatim — this pins the convergence scan to a specific choice).
MasseyResult triple_product(const eng::Tower& tw, int r, const alg::Element& a0,
                            const alg::Element& a1, const alg::Element& a2,
                            const std::optional<alg::Element>& a01 = std::nullopt,
                            const std::optional<alg::Element>& a12 = std::nullopt);

// Matric threefold <row, col, right> with row a 1xk row vector, col a kx1
// column vector; requires sum_i row_i*col_i = 0 and each col_i*right to be a
// d_r-boundary.  The 1x1 case coincides with triple_product.
MasseyResult matric_triple(const eng::Tower& tw, int r,
                           const std::vector<alg::Element>& row,
                           const std::vector<alg::Element>& col,
                           const alg::Element& right);

// Fourfold bracket <a0,a1,a2,a3> per the fourfold Convergence Theorem.
// Requires the subbracket <a0,a1,a2> to have no indeterminacy (condition
// (4)); the symmetric condition-(5) variant is reported as unsupported
// (error "subbracket-indeterminate"), never guessed.
MasseyResult quadruple_product(const eng::Tower& tw, int r, const alg::Element& a0,
                               const alg::Element& a1, const alg::Element& a2,
                               const alg::Element& a3);

// ---------------------------------------------------------------------------
// Table verification: recompute every row of the massey / ctau_matric tables
// whose arguments resolve symbolically and whose degrees fit the window.
struct BracketCheck {
    std::string table;
    int line_no = 0;
    std::string bracket;   // the table's bracket cell
    bool attempted = false;  // false: out of window or unresolvable arguments
    bool ok = false;         // value reproduced modulo indeterminacy
    Verdict verdict = Verdict::Unverifiable;
    std::string detail;
};
std::vector<BracketCheck> check_table_brackets(const eng::Tower& tw,
                                               const tab::Dataset& ds);

// One-line serialization in the tables_io format family.
std::string to_line(const MasseyResult& res, const alg::Registry& reg);

}  // namespace may::mas
