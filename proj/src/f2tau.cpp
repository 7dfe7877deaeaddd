#include "mayengine/f2tau.hpp"

#include <algorithm>
#include <cassert>

namespace may::f2tau {

std::optional<int> vector_weight(const TauVec& v, const std::vector<int>& ws) {
    std::optional<int> w;
    for (size_t i = 0; i < v.size(); ++i) {
        if (v[i].is_zero()) continue;
        int wi = ws[i] - v[i].e;
        if (w && *w != wi) throw std::logic_error("vector_weight: inhomogeneous vector");
        w = wi;
    }
    return w;
}

WeightedMatrix WeightedMatrix::identity(const std::vector<int>& ws) {
    WeightedMatrix m(ws, ws);
    for (int i = 0; i < m.rows(); ++i) m.at(i, i) = TauScalar::one();
    return m;
}

bool WeightedMatrix::is_weight_homogeneous() const {
    for (int i = 0; i < rows(); ++i)
        for (int j = 0; j < cols(); ++j) {
            TauScalar t = at(i, j);
            if (!t.is_zero() && t.e != row_weights[i] - col_weights[j]) return false;
        }
    return true;
}

TauVec WeightedMatrix::apply(const TauVec& x) const {
    assert((int)x.size() == cols());
    TauVec y(rows());
    for (int i = 0; i < rows(); ++i) {
        TauScalar acc = TauScalar::zero();
        for (int j = 0; j < cols(); ++j) acc = acc + at(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

TauVec WeightedMatrix::column(int j) const {
    TauVec c(rows());
    for (int i = 0; i < rows(); ++i) c[i] = at(i, j);
    return c;
}

WeightedMatrix WeightedMatrix::mul(const WeightedMatrix& o) const {
    assert(cols() == o.rows());
    WeightedMatrix r(row_weights, o.col_weights);
    for (int i = 0; i < rows(); ++i)
        for (int j = 0; j < o.cols(); ++j) {
            TauScalar acc = TauScalar::zero();
            for (int k = 0; k < cols(); ++k) acc = acc + at(i, k) * o.at(k, j);
            r.at(i, j) = acc;
        }
    return r;
}

bool WeightedMatrix::is_zero() const {
    for (const auto& t : a)
        if (!t.is_zero()) return false;
    return true;
}

// ---------------------------------------------------------------------------

SmithNF smith_normal_form(const WeightedMatrix& M) {
    SmithNF s;
    s.D = M;
    s.U = WeightedMatrix::identity(M.row_weights);
    s.Uinv = s.U;
    s.V = WeightedMatrix::identity(M.col_weights);
    WeightedMatrix& D = s.D;
    const int nr = D.rows(), nc = D.cols();

    auto swap_rows = [&](WeightedMatrix& X, int i, int j) {
        for (int k = 0; k < X.cols(); ++k) std::swap(X.at(i, k), X.at(j, k));
    };
    auto swap_cols = [&](WeightedMatrix& X, int i, int j) {
        for (int k = 0; k < X.rows(); ++k) std::swap(X.at(k, i), X.at(k, j));
    };

    int k = 0;
    while (k < nr && k < nc) {
        // Lowest (row, col) pair among minimal-exponent entries of the
        // remaining submatrix.
        int pi = -1, pj = -1, pe = INT32_MAX;
        for (int i = k; i < nr; ++i)
            for (int j = k; j < nc; ++j) {
                TauScalar t = D.at(i, j);
                if (!t.is_zero() && t.e < pe) pe = t.e, pi = i, pj = j;
            }
        if (pi < 0) break;
        if (pi != k) {
            swap_rows(D, k, pi);
            std::swap(D.row_weights[k], D.row_weights[pi]);
            swap_rows(s.U, k, pi);
            std::swap(s.U.row_weights[k], s.U.row_weights[pi]);
            swap_cols(s.Uinv, k, pi);
            std::swap(s.Uinv.col_weights[k], s.Uinv.col_weights[pi]);
        }
        if (pj != k) {
            swap_cols(D, k, pj);
            std::swap(D.col_weights[k], D.col_weights[pj]);
            swap_cols(s.V, k, pj);
            std::swap(s.V.col_weights[k], s.V.col_weights[pj]);
        }
        const int de = D.at(k, k).e;
        // Clear column k (row operations; mirrored on U and Uinv).
        for (int i = 0; i < nr; ++i) {
            if (i == k) continue;
            TauScalar t = D.at(i, k);
            if (t.is_zero()) continue;
            TauScalar c = TauScalar::tau(t.e - de);
            for (int j = 0; j < nc; ++j) D.at(i, j) = D.at(i, j) + c * D.at(k, j);
            for (int j = 0; j < s.U.cols(); ++j) s.U.at(i, j) = s.U.at(i, j) + c * s.U.at(k, j);
            for (int j = 0; j < s.Uinv.rows(); ++j)
                s.Uinv.at(j, k) = s.Uinv.at(j, k) + c * s.Uinv.at(j, i);
        }
        // Clear row k (column operations; mirrored on V).
        for (int j = 0; j < nc; ++j) {
            if (j == k) continue;
            TauScalar t = D.at(k, j);
            if (t.is_zero()) continue;
            TauScalar c = TauScalar::tau(t.e - de);
            for (int i = 0; i < nr; ++i) D.at(i, j) = D.at(i, j) + c * D.at(i, k);
            for (int i = 0; i < s.V.rows(); ++i) s.V.at(i, j) = s.V.at(i, j) + c * s.V.at(i, k);
        }
        ++k;
    }
    s.rank = k;
    return s;
}

std::optional<TauVec> SmithNF::solve(const TauVec& y) const {
    TauVec c = U.apply(y);
    TauVec z(D.cols());
    for (int i = 0; i < D.rows(); ++i) {
        if (i < rank) {
            if (c[i].is_zero()) continue;
            int d = D.at(i, i).e;
            if (c[i].e < d) return std::nullopt;
            z[i] = TauScalar::tau(c[i].e - d);
        } else if (!c[i].is_zero()) {
            return std::nullopt;
        }
    }
    return V.apply(z);
}

std::vector<TauVec> SmithNF::kernel_columns() const {
    std::vector<TauVec> ker;
    for (int j = rank; j < V.cols(); ++j) ker.push_back(V.column(j));
    return ker;
}

// ---------------------------------------------------------------------------

PresentedTauModule::PresentedTauModule(std::vector<int> weights, WeightedMatrix rels,
                                       std::vector<std::string> names)
    : gen_weights(std::move(weights)), gen_names(std::move(names)), relations(std::move(rels)) {
    if (relations.rows() != (int)gen_weights.size())
        throw std::invalid_argument("PresentedTauModule: relation rows != generator count");
    rel_snf = smith_normal_form(relations);
    for (int i = 0; i < (int)gen_weights.size(); ++i) {
        int d = (i < rel_snf.rank) ? rel_snf.D.at(i, i).e : -1;
        if (d == 0) continue;  // summand annihilated by a unit relation
        Summand s;
        s.kind = (d > 0) ? Summand::Torsion : Summand::Free;
        s.torsion = (d > 0) ? d : 0;
        s.rep = rel_snf.Uinv.column(i);
        auto w = vector_weight(s.rep, gen_weights);
        if (!w) throw std::logic_error("PresentedTauModule: zero basis column");
        s.weight = *w;
        summands.push_back(std::move(s));
    }
    // SNF order already yields torsion exponents ascending, then free rows.
}

PresentedTauModule PresentedTauModule::free_module(std::vector<int> weights,
                                                   std::vector<std::string> names) {
    WeightedMatrix rels(weights, {});
    return PresentedTauModule(std::move(weights), std::move(rels), std::move(names));
}

int PresentedTauModule::free_rank() const {
    int r = 0;
    for (const auto& s : summands) r += (s.kind == Summand::Free);
    return r;
}

std::vector<std::pair<int, int>> PresentedTauModule::torsion_pairs() const {
    std::vector<std::pair<int, int>> t;
    for (const auto& s : summands)
        if (s.kind == Summand::Torsion) t.emplace_back(s.torsion, s.weight);
    return t;
}

TauVec PresentedTauModule::reduce(const TauVec& v) const {
    TauVec c = rel_snf.U.apply(v);
    TauVec out;
    out.reserve(summands.size());
    for (int i = 0; i < (int)gen_weights.size(); ++i) {
        int d = (i < rel_snf.rank) ? rel_snf.D.at(i, i).e : -1;
        if (d == 0) continue;  // dropped summand: coordinate is annihilated
        TauScalar x = c[i];
        if (d > 0 && !x.is_zero() && x.e >= d) x = TauScalar::zero();
        out.push_back(x);
    }
    return out;
}

bool PresentedTauModule::is_zero(const TauVec& v) const {
    for (const auto& t : reduce(v))
        if (!t.is_zero()) return false;
    return true;
}

bool PresentedTauModule::equal(const TauVec& x, const TauVec& y) const {
    TauVec d(x.size());
    for (size_t i = 0; i < x.size(); ++i) d[i] = x[i] + y[i];
    return is_zero(d);
}

int PresentedTauModule::dim_at_weight(int w) const {
    int n = 0;
    for (const auto& s : summands) {
        if (s.kind == Summand::Free)
            n += (w <= s.weight);
        else
            n += (w <= s.weight && w > s.weight - s.torsion);
    }
    return n;
}

std::vector<TauVec> PresentedTauModule::weight_slice_basis(int w) const {
    std::vector<TauVec> basis;
    for (const auto& s : summands) {
        bool in = (s.kind == Summand::Free) ? (w <= s.weight)
                                            : (w <= s.weight && w > s.weight - s.torsion);
        if (!in) continue;
        TauScalar t = TauScalar::tau(s.weight - w);
        TauVec v(gen_weights.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = t * s.rep[i];
        basis.push_back(std::move(v));
    }
    return basis;
}

// ---------------------------------------------------------------------------

ModuleMap::ModuleMap(const PresentedTauModule& s, const PresentedTauModule& d, WeightedMatrix m)
    : src(&s), dst(&d), mat(std::move(m)) {
    if (mat.cols() != s.num_gens() || mat.rows() != d.num_gens())
        throw std::invalid_argument("ModuleMap: shape mismatch");
    for (int j = 0; j < s.relations.cols(); ++j) {
        if (!d.is_zero(mat.apply(s.relations.column(j))))
            throw std::invalid_argument("ModuleMap: matrix does not descend to the quotient");
    }
}

namespace {

// [f.mat | dst.relations] as a map of free modules.
WeightedMatrix augment_with_relations(const WeightedMatrix& m, const WeightedMatrix& rels) {
    std::vector<int> cw = m.col_weights;
    cw.insert(cw.end(), rels.col_weights.begin(), rels.col_weights.end());
    WeightedMatrix a(m.row_weights, cw);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) a.at(i, j) = m.at(i, j);
        for (int j = 0; j < rels.cols(); ++j) a.at(i, m.cols() + j) = rels.at(i, j);
    }
    return a;
}

WeightedMatrix from_columns(const std::vector<int>& row_weights, const std::vector<TauVec>& cols,
                            const std::vector<int>& col_weights) {
    WeightedMatrix m(row_weights, col_weights);
    for (int j = 0; j < (int)cols.size(); ++j)
        for (int i = 0; i < (int)row_weights.size(); ++i) m.at(i, j) = cols[j][i];
    return m;
}

}  // namespace

KernelResult kernel_basis(const ModuleMap& f) {
    const int ns = f.src->num_gens();
    WeightedMatrix A = augment_with_relations(f.mat, f.dst->relations);
    SmithNF snf = smith_normal_form(A);

    std::vector<TauVec> gens;
    std::vector<int> gweights;
    for (auto& kcol : snf.kernel_columns()) {
        TauVec x(kcol.begin(), kcol.begin() + ns);
        auto w = vector_weight(x, f.src->gen_weights);
        if (!w) continue;  // kernel vector supported on the relation block only
        gens.push_back(std::move(x));
        gweights.push_back(*w);
    }

    // Relations among the kernel generators, modulo the source relations.
    WeightedMatrix K = from_columns(f.src->gen_weights, gens, gweights);
    WeightedMatrix B = augment_with_relations(K, f.src->relations);
    SmithNF snfB = smith_normal_form(B);
    std::vector<TauVec> relcols;
    std::vector<int> relweights;
    for (auto& kcol : snfB.kernel_columns()) {
        TauVec c(kcol.begin(), kcol.begin() + gens.size());
        auto w = vector_weight(c, gweights);
        if (!w) continue;
        relcols.push_back(std::move(c));
        relweights.push_back(*w);
    }
    KernelResult r{PresentedTauModule(gweights, from_columns(gweights, relcols, relweights)),
                   gens};
    return r;
}

std::optional<TauVec> solve_preimage(const ModuleMap& f, const TauVec& y) {
    WeightedMatrix A = augment_with_relations(f.mat, f.dst->relations);
    SmithNF snf = smith_normal_form(A);
    auto z = snf.solve(y);
    if (!z) return std::nullopt;
    return TauVec(z->begin(), z->begin() + f.src->num_gens());
}

HomologyResult homology_at(const ModuleMap& d_in, const ModuleMap& d_out) {
    if (d_in.dst->num_gens() != d_out.src->num_gens())
        throw std::invalid_argument("homology_at: middle module mismatch");
    const PresentedTauModule& mid = *d_out.src;

    KernelResult Z = kernel_basis(d_out);
    WeightedMatrix Zmat =
        from_columns(mid.gen_weights, Z.lifts, Z.module.gen_weights);
    WeightedMatrix A = augment_with_relations(Zmat, mid.relations);
    SmithNF snfA = smith_normal_form(A);

    // Express each boundary generator in cycle coordinates.
    std::vector<TauVec> relcols;
    std::vector<int> relweights;
    for (int j = 0; j < d_in.mat.cols(); ++j) {
        TauVec b = d_in.mat.column(j);
        auto z = snfA.solve(b);
        if (!z)
            throw std::logic_error("composition-nonzero: boundary at column " +
                                   std::to_string(j) + " is not a cycle");
        TauVec c(z->begin(), z->begin() + Z.lifts.size());
        auto w = vector_weight(c, Z.module.gen_weights);
        if (!w) continue;
        relcols.push_back(std::move(c));
        relweights.push_back(*w);
    }
    for (int j = 0; j < Z.module.relations.cols(); ++j) {
        relcols.push_back(Z.module.relations.column(j));
        relweights.push_back(Z.module.relations.col_weights[j]);
    }

    HomologyResult h{PresentedTauModule(Z.module.gen_weights,
                                        from_columns(Z.module.gen_weights, relcols, relweights)),
                     Z.lifts};
    return h;
}

// ---------------------------------------------------------------------------

int BitVec::lowest() const {
    for (size_t k = 0; k < w.size(); ++k)
        if (w[k]) return (int)(k * 64 + __builtin_ctzll(w[k]));
    return -1;
}

std::vector<int> BitVec::bits() const {
    std::vector<int> out;
    for (size_t k = 0; k < w.size(); ++k) {
        uint64_t x = w[k];
        while (x) {
            out.push_back((int)(k * 64 + __builtin_ctzll(x)));
            x &= x - 1;
        }
    }
    return out;
}

bool TauEchelon::insert(int u, const std::vector<int>& rowset, int aug_index) {
    if (!cols_.empty() && u > cols_.back().weight)
        throw std::logic_error("TauEchelon: columns must be inserted in descending weight order");
    const int nr = (int)row_weights_->size();
    BitVec rows(nr), aug(aug_dim_);
    for (int i : rowset) rows.set(i);
    if (aug_index >= 0) aug.set(aug_index);
    reduce(u, rows, aug);
    if (!rows.any()) return false;
    // Pivot: minimal implied exponent = minimal row weight; tie lowest index.
    int prow = -1, pw = INT32_MAX;
    for (int i : rows.bits())
        if ((*row_weights_)[i] < pw) pw = (*row_weights_)[i], prow = i;
    cols_.push_back(Col{u, prow, pw - u, std::move(rows), std::move(aug)});
    return true;
}

void TauEchelon::reduce(int u, BitVec& rows, BitVec& aug) const {
    for (const Col& p : cols_) {
        if (p.weight < u) continue;  // implied exponent would be negative
        if (rows.get(p.pivot_row)) {
            rows.xor_with(p.rows);
            aug.xor_with(p.aug);
        }
    }
}

bool TauEchelon::member(int u, const std::vector<int>& rowset) const {
    BitVec rows((int)row_weights_->size()), aug(aug_dim_);
    for (int i : rowset) rows.set(i);
    reduce(u, rows, aug);
    return !rows.any();
}

}  // namespace may::f2tau
