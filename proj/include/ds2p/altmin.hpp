#pragma once
#include <ds2p/core.hpp>
#include <ds2p/parallel.hpp>
#include <ds2p/solvers.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ds2p {

struct AltMinConfig
{
    double eps0 = 0.02;            // initial sparse-coding accuracy ε₀
    double rho = 0.5;              // ε_{t+1} = ρ·ε_t
    std::size_t max_iterations = 10;
    double threshold_const = 9.0;  // codes below threshold_const·s·ε_t are zeroed
    double stop_err = 1e-5;        // stop once dict_error(A(t+1), A(t)) < stop_err
    ConstrainedCodingConfig coding;

    void validate() const
    {
        detail::require(eps0 > 0.0, "altmin: eps0 must be positive");
        detail::require(rho > 0.0 && rho < 1.0, "altmin: rho must lie in (0, 1)");
        detail::require(max_iterations >= 1, "altmin: need at least one iteration");
        detail::require(threshold_const >= 0.0, "altmin: threshold constant must be non-negative");
        detail::require(stop_err >= 0.0, "altmin: stop_err must be non-negative");
    }
};

struct AltMinIteration
{
    std::size_t iter = 0;
    double eps = 0.0;
    double dict_change = 0.0;
    double err = std::numeric_limits<double>::quiet_NaN();  // vs truth, NaN if none
    double seconds = 0.0;
    std::size_t reinitialized_columns = 0;
    std::size_t unconverged_columns = 0;
};

struct AltMinTrace
{
    std::vector<AltMinIteration> iterations;

    std::size_t size() const noexcept { return iterations.size(); }
    bool empty() const noexcept { return iterations.empty(); }
    const AltMinIteration& back() const { return iterations.back(); }

    // CSV with header iter,eps_t,dict_change,err,seconds.
    void write_csv(std::ostream& os) const
    {
        os << "iter,eps_t,dict_change,err,seconds\n";
        os.precision(17);
        for (const auto& it : iterations) {
            os << it.iter << ',' << it.eps << ',' << it.dict_change << ',';
            if (std::isnan(it.err)) os << "nan"; else os << it.err;
            os << ',' << it.seconds << '\n';
        }
    }

    std::string csv() const
    {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }
};

// Raised when a run aborts; carries the trace up to the failing iteration.
class AltMinError : public ComputeError
{
public:
    AltMinError(const std::string& what, AltMinTrace trace)
        : ComputeError(what), trace_(std::move(trace)) {}

    const AltMinTrace& trace() const noexcept { return trace_; }

private:
    AltMinTrace trace_;
};

struct AltMinResult
{
    Matrix dictionary;
    Matrix codes;
    AltMinTrace trace;
};

// Zeroes entries with |X_ij| ≤ tau.
inline Matrix hard_threshold(const Matrix& x, double tau)
{
    detail::require(tau >= 0.0, "hard_threshold: tau must be non-negative");
    return x.unaryExpr([tau](double v) { return std::abs(v) > tau ? v : 0.0; });
}

/// max_i √(1 − ⟨a_i, â_i⟩² / (‖a_i‖²‖â_i‖²)); sign-invariant per column.
inline double dict_error(const Matrix& a_hat, const Matrix& a)
{
    detail::require(a_hat.rows() == a.rows() && a_hat.cols() == a.cols(),
                    "dict_error: dimension mismatch");
    double worst = 0.0;
    for (Index j = 0; j < a.cols(); ++j) {
        const double na = a.col(j).squaredNorm();
        const double nh = a_hat.col(j).squaredNorm();
        if (na == 0.0) throw DegenerateColumnError("dict_error: zero column " + std::to_string(j) + " in A", j);
        if (nh == 0.0) throw DegenerateColumnError("dict_error: zero column " + std::to_string(j) + " in A_hat", j);
        const double ip = a.col(j).dot(a_hat.col(j));
        const double cos2 = std::min(1.0, ip * ip / (na * nh));
        worst = std::max(worst, std::sqrt(std::max(0.0, 1.0 - cos2)));
    }
    return worst;
}

// Diagnostic for exploratory runs: dict_error after the column permutation
// of A_hat that minimizes Σ sin² (Hungarian assignment).
struct ColumnMatching
{
    std::vector<Index> match;  // match[j] = column of A_hat assigned to column j of A
    double err = 0.0;
};

inline ColumnMatching matched_dict_error(const Matrix& a_hat, const Matrix& a)
{
    detail::require(a_hat.rows() == a.rows() && a_hat.cols() == a.cols(), "matched_dict_error: dimension mismatch");
    const Matrix nh = column_normalize(a_hat);
    const Matrix na = column_normalize(a);
    const Matrix cos = na.transpose() * nh;  // rows: truth, cols: estimate
    const Index n = a.cols();
    auto cost = [&](Index i, Index j) { return 1.0 - std::min(1.0, cos(i, j) * cos(i, j)); };

    // Shortest augmenting path form, 1-based potentials.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const Index i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                if (used[uj]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
                if (cur < minv[uj]) {
                    minv[uj] = cur;
                    way[uj] = j0;
                }
                if (minv[uj] < delta) {
                    delta = minv[uj];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                if (used[uj]) {
                    u[static_cast<std::size_t>(p[uj])] += delta;
                    v[uj] -= delta;
                } else {
                    minv[uj] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const Index j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    ColumnMatching out;
    out.match.assign(static_cast<std::size_t>(n), 0);
    for (Index j = 1; j <= n; ++j) out.match[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    for (Index i = 0; i < n; ++i) {
        out.err = std::max(out.err, std::sqrt(cost(i, out.match[static_cast<std::size_t>(i)])));
    }
    return out;
}

// ε_t = eps0·ρᵗ for t = 0..T−1.
inline std::vector<double> accuracy_schedule(double eps0, double rho, std::size_t iterations)
{
    detail::require(eps0 > 0.0, "accuracy_schedule: eps0 must be positive");
    detail::require(rho > 0.0 && rho < 1.0, "accuracy_schedule: rho must lie in (0, 1)");
    std::vector<double> out(iterations);
    double e = eps0;
    for (auto& v : out) {
        v = e;
        e *= rho;
    }
    return out;
}

// Accuracy parameters required by the recovery guarantee: ε₀ = 1/(2592 s²)
// and the per-iteration multiplier 25050·μ·s³/√d.
struct TheoreticalSchedule
{
    double eps0 = 0.0;
    double ratio = 0.0;
    bool decreasing = false;  // ratio < 1
};

inline TheoreticalSchedule theoretical_schedule(double s, double mu, double d)
{
    detail::require(s >= 1 && mu > 0 && d >= 1, "theoretical_schedule: bad parameters");
    TheoreticalSchedule out;
    out.eps0 = 1.0 / (2592.0 * s * s);
    out.ratio = 25050.0 * mu * s * s * s / std::sqrt(d);
    out.decreasing = out.ratio < 1.0;
    return out;
}

/// Alternating minimization for Y = AX with s-sparse columns of X.
///
/// Each iteration sparse-codes every column under ‖y_i − A(t)x‖ ≤ ε_t,
/// zeroes codes at or below threshold_const·s·ε_t, refits the dictionary by
/// minimum-norm least squares and normalizes its columns. Columns that
/// vanish in the refit keep their previous value. A0 is normalized on entry.
inline AltMinResult altmin_dict(const Matrix& y, const Matrix& a0, const AltMinConfig& cfg, Index s,
                                const std::optional<Matrix>& truth = std::nullopt)
{
    cfg.validate();
    detail::require(y.rows() == a0.rows(), "altmin_dict: Y.rows must equal A0.rows");
    detail::require(s >= 1 && s <= a0.cols(), "altmin_dict: sparsity must lie in [1, r]");
    if (truth) {
        detail::require(truth->rows() == a0.rows() && truth->cols() == a0.cols(),
                        "altmin_dict: truth has wrong shape");
    }

    using clock = std::chrono::steady_clock;
    AltMinResult out;
    Matrix a = column_normalize(a0);
    Matrix x = Matrix::Zero(a.cols(), y.cols());
    std::vector<double> lambdas(static_cast<std::size_t>(y.cols()), 0.0);
    const auto schedule = accuracy_schedule(cfg.eps0, cfg.rho, cfg.max_iterations);

    for (std::size_t t = 0; t < cfg.max_iterations; ++t) {
        const auto start = clock::now();
        const double eps = schedule[t];
        AltMinIteration rec;
        rec.iter = t + 1;
        rec.eps = eps;

        const SparseCoder coder(a, cfg.coding);
        std::vector<char> converged(static_cast<std::size_t>(y.cols()), 1);
        parallel_for(static_cast<std::size_t>(y.cols()), [&](std::size_t i) {
            const Index col = static_cast<Index>(i);
            CodingHint hint;
            const CodingHint* hint_ptr = nullptr;
            if (t > 0 && lambdas[i] > 0.0) {
                hint.lambda = lambdas[i] * cfg.rho;
                hint.x = x.col(col);
                hint_ptr = &hint;
            }
            try {
                auto res = coder.solve(y.col(col), eps, nullptr, hint_ptr);
                x.col(col) = res.x;
                lambdas[i] = res.lambda;
                converged[i] = res.report.converged;
            } catch (const InfeasibleError& e) {
                throw AltMinError("altmin_dict: infeasible sparse coding at column " + std::to_string(i) +
                                      ", iteration " + std::to_string(t + 1) + ": " + e.what(),
                                  out.trace);
            }
        });
        for (char c : converged) rec.unconverged_columns += c ? 0 : 1;

        x = hard_threshold(x, cfg.threshold_const * static_cast<double>(s) * eps);

        Matrix a_next;
        try {
            a_next = least_squares_min_norm(y, x);
        } catch (const ComputeError& e) {
            throw AltMinError(std::string("altmin_dict: iteration ") + std::to_string(t + 1) + ": " + e.what(),
                              out.trace);
        }
        for (Index j = 0; j < a_next.cols(); ++j) {
            if (!(a_next.col(j).norm() >= 1e-12)) {
                a_next.col(j) = a.col(j);
                ++rec.reinitialized_columns;
            }
        }
        a_next = column_normalize(a_next);

        rec.dict_change = dict_error(a_next, a);
        if (truth) rec.err = dict_error(a_next, *truth);
        a = std::move(a_next);
        rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
        out.trace.iterations.push_back(rec);

        if (rec.dict_change < cfg.stop_err) break;
    }

    out.dictionary = std::move(a);
    out.codes = std::move(x);
    return out;
}

} // namespace ds2p
