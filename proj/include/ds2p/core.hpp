#pragma once
#include <ds2p/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace ds2p {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Entries with magnitude at or below this are treated as zero when counting
// supports of generated (exact-arithmetic) matrices.
inline constexpr double nonzero_threshold = 1e-12;

// Strictly increasing set of indices into [0, r).
class SupportSet
{
public:
    SupportSet() = default;

    SupportSet(std::vector<Index> indices, Index universe)
        : indices_(std::move(indices)), universe_(universe)
    {
        std::sort(indices_.begin(), indices_.end());
        for (std::size_t i = 0; i < indices_.size(); ++i) {
            detail::require(indices_[i] >= 0 && indices_[i] < universe_,
                            "support index out of range");
            detail::require(i == 0 || indices_[i] != indices_[i - 1],
                            "duplicate support index");
        }
    }

    const std::vector<Index>& indices() const noexcept { return indices_; }
    Index universe() const noexcept { return universe_; }
    std::size_t size() const noexcept { return indices_.size(); }
    bool contains(Index i) const
    {
        return std::binary_search(indices_.begin(), indices_.end(), i);
    }

    auto begin() const noexcept { return indices_.begin(); }
    auto end() const noexcept { return indices_.end(); }

    friend bool operator==(const SupportSet&, const SupportSet&) = default;

private:
    std::vector<Index> indices_;
    Index universe_ = 0;
};

inline bool all_finite(const Matrix& a)
{
    return a.allFinite();
}

inline Index count_nonzeros(const Eigen::Ref<const Vector>& v, double tol = nonzero_threshold)
{
    return (v.array().abs() > tol).count();
}

inline SupportSet support_of(const Eigen::Ref<const Vector>& v, double tol = nonzero_threshold)
{
    std::vector<Index> idx;
    for (Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > tol) idx.push_back(i);
    }
    return SupportSet(std::move(idx), v.size());
}

// Largest per-column nonzero count.
inline Index max_column_nonzeros(const Matrix& a, double tol = nonzero_threshold)
{
    Index best = 0;
    for (Index j = 0; j < a.cols(); ++j) {
        best = std::max(best, count_nonzeros(a.col(j), tol));
    }
    return best;
}

/// Largest singular value by power iteration on AᵀA.
///
/// The start vector is the normalized all-ones vector so results are
/// reproducible. Iteration stops once the Rayleigh quotient changes by less
/// than `tol` relative to itself; a ConvergenceError carrying the last
/// estimate is thrown after `max_iter` iterations otherwise.
inline double spectral_norm(const Matrix& a, double tol = 1e-10, std::size_t max_iter = 100000)
{
    detail::require(tol > 0, "spectral_norm: tol must be positive");
    detail::require(a.size() > 0, "spectral_norm: empty matrix");
    if (a.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    // Iterate on the smaller Gram matrix.
    const bool use_rows = a.rows() < a.cols();
    const Matrix gram = use_rows ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);

    Vector v = Vector::Ones(gram.rows()).normalized();
    double lambda = v.dot(gram * v);
    for (std::size_t it = 0; it < max_iter; ++it) {
        Vector w = gram * v;
        const double norm = w.norm();
        if (norm == 0.0) {
            // Start vector lies in the null space of the Gram matrix; perturb
            // deterministically onto the first coordinate axis.
            v = Vector::Unit(gram.rows(), static_cast<Index>(it % gram.rows()));
            continue;
        }
        v = w / norm;
        const double next = v.dot(gram * v);
        if (std::abs(next - lambda) <= tol * std::abs(next)) {
            return std::sqrt(std::max(next, 0.0));
        }
        lambda = next;
    }
    throw ConvergenceError("spectral_norm: power iteration did not converge",
                           std::sqrt(std::max(lambda, 0.0)));
}

struct MinSingularValue
{
    double value = 0.0;
    bool rank_deficient = false;
};

// Smallest of the min(rows, cols) singular values. Values at or below
// 1e-12 relative to the largest are reported as 0 with the flag set.
inline MinSingularValue min_singular_value(const Matrix& a)
{
    detail::require(a.rows() >= 1 && a.cols() >= 1, "min_singular_value: empty matrix");
    Eigen::BDCSVD<Matrix> svd(a);
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    if (smax == 0.0 || smin <= 1e-12 * smax) return {0.0, true};
    return {smin, false};
}

/// Minimum-Frobenius-norm minimizer of ‖B − A X‖_F over A.
///
/// Solved as a least-squares problem in Aᵀ through a complete orthogonal
/// decomposition of Xᵀ (column-pivoted QR followed by an RQ step on the
/// rank-revealing block), which yields pseudo-inverse semantics when X is
/// rank deficient.
inline Matrix least_squares_min_norm(const Matrix& b, const Matrix& x)
{
    detail::require(b.cols() == x.cols(), "least_squares_min_norm: B.cols != X.cols");
    if (x.size() == 0 || x.cwiseAbs().maxCoeff() == 0.0) {
        throw ComputeError("least_squares_min_norm: degenerate code matrix (all zero)");
    }
    const Matrix xt = x.transpose();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xt);
    Matrix at = cod.solve(Matrix(b.transpose()));
    return at.transpose();
}

inline Vector column_norms(const Matrix& a)
{
    return a.colwise().norm().transpose();
}

inline Matrix column_normalize(const Matrix& a)
{
    Matrix out = a;
    for (Index j = 0; j < a.cols(); ++j) {
        const double n = a.col(j).norm();
        if (!(n >= 1e-12)) {
            throw DegenerateColumnError(
                "column_normalize: column " + std::to_string(j) + " has near-zero norm", j);
        }
        out.col(j) /= n;
    }
    return out;
}

} // namespace ds2p
