#pragma once
// Exact linear algebra over the principal ideal ring F2[tau].
//
// Weight-homogeneity forces every matrix entry between a weight-u source
// generator and a weight-v target generator to be zero or exactly tau^(v-u),
// so entries are tau-monomials and all arithmetic stays monomial.  F2[tau]
// behaves like a discrete valuation ring on homogeneous problems: Gaussian
// elimination with minimal-exponent pivoting yields Smith normal form in a
// single pass and quotients are again monomials.
//
// Two layers live here:
//   * dense WeightedMatrix + smith_normal_form / kernel_basis / solve_preimage
//     / homology_at on PresentedTauModules (small blocks, page mechanics);
//   * TauEchelon, a bit-packed homogeneous column space over a weighted row
//     basis, used for the large per-(s,f) reductions.  A homogeneous column is
//     fully described by its weight and its row set (exponents are implied),
//     so the hot arithmetic is GF(2) XOR.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace may::f2tau {

// ---------------------------------------------------------------------------
// TauScalar: zero or a single power tau^e, e >= 0.
struct TauScalar {
    int e = -1;  // -1 encodes zero

    static TauScalar zero() { return {}; }
    static TauScalar tau(int k) {
        if (k < 0) throw std::invalid_argument("TauScalar: negative exponent");
        return {k};
    }
    static TauScalar one() { return {0}; }
    bool is_zero() const { return e < 0; }

    // F2 addition.  Homogeneity guarantees both operands share an exponent
    // whenever both are nonzero; anything else is data corruption.
    TauScalar operator+(TauScalar o) const {
        if (is_zero()) return o;
        if (o.is_zero()) return *this;
        if (e != o.e) throw std::logic_error("TauScalar: inhomogeneous addition");
        return zero();
    }
    TauScalar operator*(TauScalar o) const {
        if (is_zero() || o.is_zero()) return zero();
        return {e + o.e};
    }
    friend bool operator==(TauScalar a, TauScalar b) = default;
};

using TauVec = std::vector<TauScalar>;

// Weight of a homogeneous vector over generators with weights `ws`:
// entry tau^e at slot i means the vector's weight is ws[i] - e.
// Returns nullopt for the zero vector; throws if entries disagree.
std::optional<int> vector_weight(const TauVec& v, const std::vector<int>& ws);

// ---------------------------------------------------------------------------
// Dense matrix of TauScalars with weighted row/column labels.
// Column j is the image of source generator j (weight col_weights[j])
// expressed over target generators (weights row_weights[i]); a nonzero entry
// at (i,j) must be tau^(row_weights[i] - col_weights[j]).
struct WeightedMatrix {
    std::vector<int> row_weights;
    std::vector<int> col_weights;
    std::vector<TauScalar> a;  // row-major, rows() x cols()

    WeightedMatrix() = default;
    WeightedMatrix(std::vector<int> rw, std::vector<int> cw)
        : row_weights(std::move(rw)), col_weights(std::move(cw)),
          a(row_weights.size() * col_weights.size()) {}

    int rows() const { return (int)row_weights.size(); }
    int cols() const { return (int)col_weights.size(); }
    TauScalar& at(int i, int j) { return a[(size_t)i * col_weights.size() + j]; }
    TauScalar at(int i, int j) const { return a[(size_t)i * col_weights.size() + j]; }

    static WeightedMatrix identity(const std::vector<int>& ws);
    bool is_weight_homogeneous() const;  // entry check against the labels
    TauVec apply(const TauVec& x) const;
    TauVec column(int j) const;
    WeightedMatrix mul(const WeightedMatrix& o) const;
    bool is_zero() const;
};

// U * M * V = D with D diagonal, diagonal exponents ascending (divisibility
// chain tau^{d1} | tau^{d2} | ...), U and V invertible over F2[tau].
// Deterministic pivoting: lowest (row, col) pair among entries of minimal
// tau-exponent in the remaining submatrix.
struct SmithNF {
    WeightedMatrix D;
    WeightedMatrix U, Uinv;  // Uinv * U = I
    WeightedMatrix V;
    int rank = 0;            // number of nonzero diagonal entries

    // Solve M x = y (free modules); canonical solution with free coordinates
    // zero; nullopt when y is not in the image.
    std::optional<TauVec> solve(const TauVec& y) const;
    // Basis of ker(M) on free modules: columns of V past `rank`.
    std::vector<TauVec> kernel_columns() const;
};
SmithNF smith_normal_form(const WeightedMatrix& M);

// ---------------------------------------------------------------------------
// Finitely presented F2[tau]-module.
struct Summand {
    enum Kind { Free, Torsion } kind = Free;
    int weight = 0;   // weight of the summand generator
    int torsion = 0;  // exponent k for F2[tau]/tau^k, 0 for free
    TauVec rep;       // the summand generator expressed over the presentation's gens
};

struct PresentedTauModule {
    std::vector<int> gen_weights;
    std::vector<std::string> gen_names;  // optional, may be empty
    WeightedMatrix relations;            // columns are relations over the gens

    // Derived normal form F2[tau]^a (+) sum_i F2[tau]/tau^{k_i}.
    std::vector<Summand> summands;       // torsion first (exponents ascending), then free
    SmithNF rel_snf;

    PresentedTauModule() = default;
    // Builds the normal form on construction.
    PresentedTauModule(std::vector<int> weights, WeightedMatrix rels,
                       std::vector<std::string> names = {});
    static PresentedTauModule free_module(std::vector<int> weights,
                                          std::vector<std::string> names = {});

    int num_gens() const { return (int)gen_weights.size(); }
    int free_rank() const;
    std::vector<std::pair<int, int>> torsion_pairs() const;  // (exponent, weight), ascending

    // Canonical coordinates of an element (vector over gens) with respect to
    // the normal-form basis; zero coordinates for annihilated parts.
    TauVec reduce(const TauVec& v) const;
    bool is_zero(const TauVec& v) const;
    bool equal(const TauVec& x, const TauVec& y) const;
    // F2-dimension of the weight-w slice.
    int dim_at_weight(int w) const;
    // Enumerate an F2-basis of the weight-w slice as vectors over the gens.
    std::vector<TauVec> weight_slice_basis(int w) const;
};

// A map of presented modules given on generators.
struct ModuleMap {
    const PresentedTauModule* src = nullptr;
    const PresentedTauModule* dst = nullptr;
    WeightedMatrix mat;  // cols = src gens, rows = dst gens

    ModuleMap() = default;
    // Checks that the matrix descends to the quotients (relation span maps
    // into relation span); throws std::invalid_argument otherwise.
    ModuleMap(const PresentedTauModule& s, const PresentedTauModule& d, WeightedMatrix m);
    TauVec apply(const TauVec& x) const { return mat.apply(x); }
};

// Kernel of f as a presented module; lifts[i] is the i-th kernel generator as
// an element of the source.
struct KernelResult {
    PresentedTauModule module;
    std::vector<TauVec> lifts;
};
KernelResult kernel_basis(const ModuleMap& f);

// Canonical x with f(x) = y in the target module, or nullopt when y is not in
// the image.  y is given over the target's generators.
std::optional<TauVec> solve_preimage(const ModuleMap& f, const TauVec& y);

// ker(d_out)/im(d_in) with cycle lifts into the middle module.  Throws
// std::logic_error("composition-nonzero...") when d_out . d_in != 0.
struct HomologyResult {
    PresentedTauModule module;
    std::vector<TauVec> lifts;  // one cycle in the middle module per homology gen
};
HomologyResult homology_at(const ModuleMap& d_in, const ModuleMap& d_out);

// ---------------------------------------------------------------------------
// Bit-packed GF(2) vector.
struct BitVec {
    std::vector<uint64_t> w;

    explicit BitVec(int nbits = 0) : w(((size_t)nbits + 63) / 64) {}
    void resize_bits(int nbits) { w.resize(((size_t)nbits + 63) / 64); }
    bool get(int i) const { return (w[(size_t)i >> 6] >> (i & 63)) & 1; }
    void set(int i) { w[(size_t)i >> 6] ^= (uint64_t)1 << (i & 63); }
    void xor_with(const BitVec& o) {
        for (size_t k = 0; k < o.w.size(); ++k) w[k] ^= o.w[k];
    }
    bool any() const {
        for (uint64_t x : w)
            if (x) return true;
        return false;
    }
    int lowest() const;  // index of lowest set bit, -1 if none
    std::vector<int> bits() const;
};

// Homogeneous column space over a weighted row basis.  Columns must be
// inserted in non-increasing order of column weight; then no pivot
// replacement is ever needed, each inserted column is zero at all earlier
// pivot rows, and a single reduction pass in pivot order decides membership
// canonically.
class TauEchelon {
  public:
    struct Col {
        int weight;      // column weight u
        int pivot_row;   // row index of the pivot
        int pivot_exp;   // implied exponent at pivot row: row_weight - u
        BitVec rows;     // main part
        BitVec aug;      // combination tracking (over tracked inserted columns)
    };

    TauEchelon(const std::vector<int>* row_weights, int aug_dim = 0)
        : row_weights_(row_weights), aug_dim_(aug_dim) {}

    // Insert a column (weight u, given row set).  aug_index >= 0 marks the
    // column as tracked (its coefficient appears in reduction output).
    // Returns true if the column was independent (created a pivot).
    bool insert(int u, const std::vector<int>& rows, int aug_index = -1);

    // Reduce v (weight u, row set) by the echelon; on return `rows` is the
    // canonical remainder and `aug` holds the combination of tracked columns
    // used (implied exponents: tracked column j of weight u_j contributes
    // tau^(u_j - u)).
    void reduce(int u, BitVec& rows, BitVec& aug) const;

    bool member(int u, const std::vector<int>& rows) const;
    int num_pivots() const { return (int)cols_.size(); }
    const std::vector<Col>& columns() const { return cols_; }
    int last_weight() const { return cols_.empty() ? INT32_MAX : cols_.back().weight; }

  private:
    const std::vector<int>* row_weights_;
    int aug_dim_;
    std::vector<Col> cols_;  // in insertion (descending weight) order
};

}  // namespace may::f2tau
