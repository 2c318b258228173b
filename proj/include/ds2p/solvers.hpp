#pragma once
#include <ds2p/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace ds2p {

struct SolverReport
{
    std::size_t iterations_used = 0;
    double final_objective = 0.0;
    double final_residual_norm = 0.0;
    bool converged = false;
};

struct SolveResult
{
    Vector x;
    SolverReport report;
    double lambda = 0.0;  // penalty of the returned solution, when searched
};

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

// sgn(y)·max(|y| − λ, 0): the proximal map of λ|·|.
inline double soft_threshold(double y, double lambda)
{
    if (y > lambda) return y - lambda;
    if (y < -lambda) return y + lambda;
    return 0.0;
}

// Proximal map of λx + indicator(x ≥ 0).
inline double nonneg_soft_threshold(double y, double lambda)
{
    return relu(y - lambda);
}

inline Vector soft_threshold(const Eigen::Ref<const Vector>& y, double lambda)
{
    return y.unaryExpr([lambda](double v) { return soft_threshold(v, lambda); });
}

inline double lasso_objective(const Matrix& a, const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& x, double lambda)
{
    return 0.5 * (y - a * x).squaredNorm() + lambda * x.lpNorm<1>();
}

struct ProxGradOptions
{
    // Step constant M ≥ σ_max(AᵀA); 0 computes it from spectral_norm(A)².
    double lipschitz = 0.0;
    // Stop early once M·‖x_k − x_{k−1}‖_∞ falls below this (0 runs all K).
    double tol = 0.0;
    // FISTA only: reset momentum when it points uphill.
    bool adaptive_restart = false;
    // When set, receives the lasso objective after every iteration.
    std::vector<double>* objective_trace = nullptr;
};

namespace detail {

inline double resolve_lipschitz(const Matrix& a, double given)
{
    if (given > 0.0) return given;
    const double n = spectral_norm(a);
    return n > 0.0 ? n * n : 1.0;
}

inline void check_lasso_dims(const Matrix& a, const Eigen::Ref<const Vector>& y,
                             const Eigen::Ref<const Vector>& x0, double lambda)
{
    require(a.rows() == y.size(), "lasso: A.rows must equal y.size");
    require(a.cols() == x0.size(), "lasso: A.cols must equal x0.size");
    require(lambda >= 0.0, "lasso: lambda must be non-negative");
}

} // namespace detail

/// K iterations of x ← s_{λ/M}(x + (1/M)Aᵀ(y − Ax)).
inline SolveResult ista(const Matrix& a, const Eigen::Ref<const Vector>& y, double lambda,
                        std::size_t iterations, const Eigen::Ref<const Vector>& x0,
                        const ProxGradOptions& opts = {})
{
    detail::check_lasso_dims(a, y, x0, lambda);
    const double m = detail::resolve_lipschitz(a, opts.lipschitz);
    const double thresh = lambda / m;

    Vector x = x0;
    SolveResult out;
    std::size_t k = 0;
    for (; k < iterations; ++k) {
        Vector next = soft_threshold(x + (a.transpose() * (y - a * x)) / m, thresh);
        const double step = (next - x).lpNorm<Eigen::Infinity>() * m;
        x.swap(next);
        if (opts.objective_trace) opts.objective_trace->push_back(lasso_objective(a, y, x, lambda));
        if (opts.tol > 0.0 && step <= opts.tol) {
            ++k;
            out.report.converged = true;
            break;
        }
    }
    out.report.iterations_used = k;
    out.report.final_objective = lasso_objective(a, y, x, lambda);
    out.report.final_residual_norm = (y - a * x).norm();
    out.x = std::move(x);
    return out;
}

/// Accelerated proximal gradient with t_{k+1} = (1 + √(1 + 4t_k²))/2.
inline SolveResult fista(const Matrix& a, const Eigen::Ref<const Vector>& y, double lambda,
                         std::size_t iterations, const Eigen::Ref<const Vector>& x0,
                         const ProxGradOptions& opts = {})
{
    detail::check_lasso_dims(a, y, x0, lambda);
    const double m = detail::resolve_lipschitz(a, opts.lipschitz);
    const double thresh = lambda / m;

    Vector x = x0;
    Vector z = x0;
    double t = 1.0;
    SolveResult out;
    std::size_t k = 0;
    for (; k < iterations; ++k) {
        Vector next = soft_threshold(z + (a.transpose() * (y - a * z)) / m, thresh);
        const double step = (next - x).lpNorm<Eigen::Infinity>() * m;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (opts.adaptive_restart && (z - next).dot(next - x) > 0.0) {
            t = 1.0;
            z = next;
        } else {
            z = next + ((t - 1.0) / t_next) * (next - x);
            t = t_next;
        }
        x.swap(next);
        if (opts.objective_trace) opts.objective_trace->push_back(lasso_objective(a, y, x, lambda));
        if (opts.tol > 0.0 && step <= opts.tol) {
            ++k;
            out.report.converged = true;
            break;
        }
    }
    out.report.iterations_used = k;
    out.report.final_objective = lasso_objective(a, y, x, lambda);
    out.report.final_residual_norm = (y - a * x).norm();
    out.x = std::move(x);
    return out;
}

enum class CodingMethod {
    homotopy,   // exact lasso path followed down to the target residual
    bisection,  // λ search over warm-started FISTA solves
};

struct ConstrainedCodingConfig
{
    CodingMethod method = CodingMethod::homotopy;
    double feas_tol = 1e-3;
    std::size_t max_bisection = 60;
    std::size_t inner_max_iter = 2000;
    double inner_grad_tol = 1e-9;
    double lambda_lo_ratio = 1e-10;
    // Absolute slack on the residual constraint, relative to ‖y‖, so that
    // eps = 0 targets remain attainable at the smallest bracketed λ.
    double abs_slack = 1e-9;
    // Homotopy breakpoint budget, as a multiple of the column count.
    std::size_t homotopy_step_factor = 8;
};

// One step of the λ search: the penalty tried and the residual obtained.
struct BisectionStep
{
    double lambda = 0.0;
    double residual = 0.0;
};

// Warm start for SparseCoder::solve: a starting penalty and code, typically
// the previous alternating-minimization iterate for the same column.
struct CodingHint
{
    double lambda = 0.0;
    Vector x;
};

/// Dictionary-level data shared by every column's sparse-coding problem:
/// Gram matrix, step constant, and an orthonormal basis of range(A) used for
/// the least-squares residual floor. Build once per dictionary.
class SparseCoder
{
public:
    explicit SparseCoder(const Matrix& a, ConstrainedCodingConfig cfg = {},
                         std::optional<double> lipschitz = std::nullopt)
        : a_(a), gram_(a.transpose() * a), cfg_(cfg)
    {
        detail::require(cfg_.feas_tol > 0.0, "sparse coder: feas_tol must be positive");
        const double sn = lipschitz ? std::sqrt(*lipschitz) : spectral_norm(a);
        lipschitz_ = sn > 0.0 ? sn * sn : 1.0;

        Eigen::ColPivHouseholderQR<Matrix> qr(a);
        const Index rank = qr.rank();
        range_basis_ = Matrix(qr.householderQ()).leftCols(rank);
    }

    const Matrix& dictionary() const noexcept { return a_; }
    double lipschitz() const noexcept { return lipschitz_; }
    const ConstrainedCodingConfig& config() const noexcept { return cfg_; }

    // Least-squares distance from y to range(A).
    double residual_floor(const Eigen::Ref<const Vector>& y) const
    {
        if (range_basis_.cols() == 0) return y.norm();
        const Vector proj = range_basis_ * (range_basis_.transpose() * y);
        return (y - proj).norm();
    }

    /// argmin ‖x‖₁ s.t. ‖y − Ax‖₂ ≤ eps, up to the configured tolerances.
    ///
    /// Searches λ inside the bracket [1e-10·λ_max, λ_max], where λ_max =
    /// ‖Aᵀy‖_∞ gives x = 0. Each probe is a warm-started FISTA solve of the
    /// penalized problem; probes with residual above eps lower the top of the
    /// bracket and the others raise its bottom. Along a fixed support the
    /// residual grows linearly in λ, so probes are proposed at
    /// λ_ref·eps/res_ref from the latest probe and fall back to the geometric
    /// midpoint of the bracket when that leaves its interior (and on every
    /// other step after the first eight). `hint` seeds the first probe.
    SolveResult solve(const Eigen::Ref<const Vector>& y, double eps,
                      std::vector<BisectionStep>* trace = nullptr,
                      const CodingHint* hint = nullptr) const
    {
        if (cfg_.method == CodingMethod::homotopy) return solve_homotopy(y, eps, trace);
        return solve_bisection(y, eps, trace, hint);
    }

    /// Same problem solved along the lasso path. Starting from x = 0 at
    /// λ = ‖Aᵀy‖_∞, the solution is piecewise linear in λ: on each segment
    /// the active set S moves along x_S += γ·G_SS⁻¹ z_S until a coordinate
    /// joins or leaves S. The residual norm decreases monotonically along the
    /// path, so the segment that crosses eps is solved for exactly. `trace`
    /// receives one (λ, residual) entry per breakpoint.
    SolveResult solve_homotopy(const Eigen::Ref<const Vector>& y, double eps,
                               std::vector<BisectionStep>* trace = nullptr) const
    {
        detail::require(y.size() == a_.rows(), "sparse_code_constrained: y has wrong size");
        detail::require(eps >= 0.0, "sparse_code_constrained: eps must be non-negative");

        const Index r = a_.cols();
        const Vector b = a_.transpose() * y;
        const double ynorm = y.norm();
        const double slack = cfg_.abs_slack * std::max(1.0, ynorm);
        const double target_hi = eps * (1.0 + cfg_.feas_tol) + slack;

        SolveResult out;
        out.x = Vector::Zero(r);
        if (eps >= ynorm || r == 0) {
            out.report = {0, 0.0, ynorm, true};
            out.lambda = r > 0 ? b.lpNorm<Eigen::Infinity>() : 0.0;
            return out;
        }
        const double floor = residual_floor(y);
        if (floor > target_hi) {
            throw InfeasibleError("sparse_code_constrained: residual floor " + std::to_string(floor) +
                                      " exceeds eps " + std::to_string(eps),
                                  floor);
        }

        Vector& x = out.x;
        std::vector<Index> active;
        std::vector<double> sign;
        Index j0 = 0;
        double lambda = b.cwiseAbs().maxCoeff(&j0);
        active.push_back(j0);
        sign.push_back(b(j0) > 0 ? 1.0 : -1.0);
        Index just_dropped = -1;

        const std::size_t max_steps = cfg_.homotopy_step_factor * static_cast<std::size_t>(r) + 16;
        std::size_t steps = 0;
        bool done = false;
        Vector res = y;
        for (; steps < max_steps && !done; ++steps) {
            const auto k = static_cast<Index>(active.size());
            Matrix g_ss(k, k);
            Vector z(k);
            for (Index p = 0; p < k; ++p) {
                z(p) = sign[static_cast<std::size_t>(p)];
                for (Index q = 0; q < k; ++q) {
                    g_ss(p, q) = gram_(active[static_cast<std::size_t>(p)], active[static_cast<std::size_t>(q)]);
                }
            }
            const Eigen::LLT<Matrix> llt(g_ss);
            if (llt.info() != Eigen::Success) break;
            const Vector dir = llt.solve(z);
            if (!dir.allFinite()) break;

            // Residual and correlations recomputed from x to limit drift.
            res = y;
            Vector u = Vector::Zero(a_.rows());
            Vector corr = b;
            Vector slope = Vector::Zero(r);
            for (Index p = 0; p < k; ++p) {
                const Index j = active[static_cast<std::size_t>(p)];
                res.noalias() -= x(j) * a_.col(j);
                u.noalias() += dir(p) * a_.col(j);
                corr.noalias() -= x(j) * gram_.col(j);
                slope.noalias() += dir(p) * gram_.col(j);
            }

            double step = lambda;  // λ reaches zero
            Index join = -1;
            double join_sign = 0.0;
            Index drop = -1;
            std::vector<char> is_active(static_cast<std::size_t>(r), 0);
            for (Index j : active) is_active[static_cast<std::size_t>(j)] = 1;
            // Tied coordinates join through zero-length steps, one per pass.
            const double tie_tol = 1e-12 * std::max(1.0, lambda);
            for (Index j = 0; j < r; ++j) {
                if (is_active[static_cast<std::size_t>(j)] || j == just_dropped) continue;
                const double up = 1.0 - slope(j);
                const double dn = 1.0 + slope(j);
                if (up > 1e-14) {
                    const double g = (lambda - corr(j)) / up;
                    if (g > -tie_tol && g < step) {
                        step = std::max(0.0, g);
                        join = j;
                        join_sign = 1.0;
                    }
                }
                if (dn > 1e-14) {
                    const double g = (lambda + corr(j)) / dn;
                    if (g > -tie_tol && g < step) {
                        step = std::max(0.0, g);
                        join = j;
                        join_sign = -1.0;
                    }
                }
            }
            for (Index p = 0; p < k; ++p) {
                const Index j = active[static_cast<std::size_t>(p)];
                if (dir(p) == 0.0) continue;
                const double g = -x(j) / dir(p);
                if (g > 0.0 && g < step) {
                    step = g;
                    drop = p;
                    join = -1;
                }
            }

            // ‖res − γu‖ = eps on this segment?
            const double rr = res.squaredNorm();
            const double ru = res.dot(u);
            const double uu = u.squaredNorm();
            double gamma = step;
            if (uu > 0.0) {
                const double disc = ru * ru - uu * (rr - eps * eps);
                if (rr <= eps * eps) {
                    gamma = 0.0;
                    done = true;
                } else if (disc >= 0.0) {
                    const double g = (ru - std::sqrt(disc)) / uu;
                    if (g <= step) {
                        gamma = std::max(0.0, g);
                        done = true;
                    }
                }
            }

            for (Index p = 0; p < k; ++p) x(active[static_cast<std::size_t>(p)]) += gamma * dir(p);
            lambda -= gamma;
            if (trace) trace->push_back({lambda, (res - gamma * u).norm()});
            if (done) break;
            if (step >= lambda + gamma) {  // reached λ = 0
                lambda = 0.0;
                break;
            }

            just_dropped = -1;
            if (drop >= 0) {
                const Index j = active[static_cast<std::size_t>(drop)];
                x(j) = 0.0;
                active.erase(active.begin() + drop);
                sign.erase(sign.begin() + drop);
                just_dropped = j;
                if (active.empty()) break;
            } else if (join >= 0) {
                active.push_back(join);
                sign.push_back(join_sign);
            }
        }

        out.lambda = lambda;
        const double final_res = residual_norm(y, x);
        out.report.iterations_used = steps;
        out.report.final_residual_norm = final_res;
        out.report.final_objective = x.lpNorm<1>();
        out.report.converged = final_res <= target_hi;
        return out;
    }

    SolveResult solve_bisection(const Eigen::Ref<const Vector>& y, double eps,
                                std::vector<BisectionStep>* trace = nullptr,
                                const CodingHint* hint = nullptr) const
    {
        detail::require(y.size() == a_.rows(), "sparse_code_constrained: y has wrong size");
        detail::require(eps >= 0.0, "sparse_code_constrained: eps must be non-negative");

        const Index r = a_.cols();
        const Vector b = a_.transpose() * y;
        const double ynorm = y.norm();
        const double slack = cfg_.abs_slack * std::max(1.0, ynorm);
        const double target_hi = eps * (1.0 + cfg_.feas_tol) + slack;
        const double target_lo = eps * (1.0 - cfg_.feas_tol);

        SolveResult out;
        if (eps >= ynorm) {
            out.x = Vector::Zero(r);
            out.report = {0, 0.0, ynorm, true};
            out.lambda = b.lpNorm<Eigen::Infinity>();
            return out;
        }

        const double floor = residual_floor(y);
        if (floor > target_hi) {
            throw InfeasibleError("sparse_code_constrained: residual floor " + std::to_string(floor) +
                                      " exceeds eps " + std::to_string(eps),
                                  floor);
        }

        const double lambda_max = b.lpNorm<Eigen::Infinity>();
        double lam_hi = lambda_max;
        double res_hi = ynorm;
        Vector x_hi = Vector::Zero(r);
        double lam_lo = cfg_.lambda_lo_ratio * lambda_max;
        double res_lo = -1.0;
        Vector x_lo;
        bool lo_ok = false;
        std::size_t total_iters = 0;

        double ref_lam = lam_hi;
        double ref_res = res_hi;

        bool done = false;
        for (std::size_t it = 0; it < cfg_.max_bisection && !done; ++it) {
            const double mid = std::sqrt(lam_hi * lam_lo);
            double lam = mid;
            const Vector* warm = &x_hi;
            if (it == 0 && hint && hint->lambda > lam_lo && hint->lambda < lam_hi &&
                hint->x.size() == r) {
                lam = hint->lambda;
                warm = &hint->x;
            } else if (it < 8 || it % 2 == 1) {
                const double prop = ref_res > 0.0 ? ref_lam * eps / ref_res : mid;
                const double log_span = std::log(lam_hi / lam_lo);
                if (prop > lam_lo && prop < lam_hi && log_span > 0.0) {
                    const double frac = std::log(lam_hi / prop) / log_span;
                    if (frac > 0.01 && frac < 0.99) lam = prop;
                }
            }
            if (warm == &x_hi && res_lo >= 0.0 && std::log(lam_hi / lam) > std::log(lam / lam_lo)) {
                warm = &x_lo;
            }

            Vector x = *warm;
            const InnerResult inner = penalized(b, lam, x);
            total_iters += inner.iterations;
            const double res = residual_norm(y, x);
            if (trace) trace->push_back({lam, res});
            if (inner.converged) {
                ref_lam = lam;
                ref_res = res;
            }

            if (res >= target_lo && res <= target_hi && inner.converged) {
                out.x = std::move(x);
                out.lambda = lam;
                out.report.final_residual_norm = res;
                out.report.converged = true;
                done = true;
            } else if (res > eps) {
                lam_hi = lam;
                res_hi = res;
                x_hi = std::move(x);
            } else {
                lam_lo = lam;
                res_lo = res;
                lo_ok = inner.converged;
                x_lo = std::move(x);
            }
            if (!done && lam_hi / lam_lo < 1.0 + 1e-12) break;
        }

        if (!done) {
            if (res_lo < 0.0) {
                lam_lo = cfg_.lambda_lo_ratio * lambda_max;
                x_lo = x_hi;
                const InnerResult inner = penalized(b, lam_lo, x_lo);
                total_iters += inner.iterations;
                res_lo = residual_norm(y, x_lo);
                lo_ok = inner.converged && res_lo <= target_hi;
                if (trace) trace->push_back({lam_lo, res_lo});
            }
            out.x = std::move(x_lo);
            out.lambda = lam_lo;
            out.report.final_residual_norm = res_lo;
            out.report.converged = lo_ok;
        }
        out.report.iterations_used = total_iters;
        out.report.final_objective = out.x.lpNorm<1>();
        return out;
    }

private:
    // ‖y − Ax‖ accumulated over the support of x only.
    double residual_norm(const Eigen::Ref<const Vector>& y, const Vector& x) const
    {
        Vector res = y;
        for (Index j = 0; j < x.size(); ++j) {
            if (x(j) != 0.0) res.noalias() -= a_.col(j) * x(j);
        }
        return res.norm();
    }

    struct InnerResult
    {
        std::size_t iterations = 0;
        bool converged = false;
    };

    // Exact lasso solution on the current support of x, if one exists: solves
    // G_SS x_S = b_S − λ·sgn(x_S) and accepts it when the signs are reproduced
    // and every off-support coordinate satisfies |b_j − G_jS x_S| ≤ λ.
    bool polish(const Vector& b, double lambda, Vector& x) const
    {
        std::vector<Index> supp;
        for (Index j = 0; j < x.size(); ++j) {
            if (x(j) != 0.0) supp.push_back(j);
        }
        const double kkt_tol = lambda * 1e-9 + 1e-14 * std::max(1.0, b.lpNorm<Eigen::Infinity>());
        if (supp.empty()) {
            return b.lpNorm<Eigen::Infinity>() <= lambda + kkt_tol;
        }
        const auto k = static_cast<Index>(supp.size());
        if (k > a_.rows()) return false;

        Matrix g_ss(k, k);
        Vector rhs(k);
        for (Index p = 0; p < k; ++p) {
            for (Index q = 0; q < k; ++q) g_ss(p, q) = gram_(supp[p], supp[q]);
            rhs(p) = b(supp[p]) - lambda * (x(supp[p]) > 0.0 ? 1.0 : -1.0);
        }
        Eigen::LDLT<Matrix> ldlt(g_ss);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
        const Vector xs = ldlt.solve(rhs);
        if (!xs.allFinite()) return false;
        for (Index p = 0; p < k; ++p) {
            if (xs(p) == 0.0 || (xs(p) > 0.0) != (x(supp[p]) > 0.0)) return false;
        }
        Vector corr = b;
        for (Index p = 0; p < k; ++p) corr.noalias() -= gram_.col(supp[p]) * xs(p);
        for (Index j = 0; j < x.size(); ++j) {
            if (x(j) == 0.0 && std::abs(corr(j)) > lambda + kkt_tol) return false;
        }
        x.setZero();
        for (Index p = 0; p < k; ++p) x(supp[p]) = xs(p);
        return true;
    }

    // FISTA with adaptive restart on ½‖y − Ax‖² + λ‖x‖₁ in Gram form; the
    // gradient Gz − b is accumulated over the nonzeros of z only. Every few
    // iterations the current support is tested with polish(), which ends the
    // solve with the exact minimizer once FISTA has found the right support.
    InnerResult penalized(const Vector& b, double lambda, Vector& x) const
    {
        const Index r = x.size();
        const double m = lipschitz_;
        const double thresh = lambda / m;
        const double stop = cfg_.inner_grad_tol * std::max(1.0, b.lpNorm<Eigen::Infinity>());
        constexpr std::size_t polish_every = 10;

        if (polish(b, lambda, x)) return {0, true};

        Vector z = x;
        Vector grad(r);
        Vector next(r);
        double t = 1.0;
        std::size_t k = 0;
        while (k < cfg_.inner_max_iter) {
            grad = -b;
            for (Index j = 0; j < r; ++j) {
                if (z(j) != 0.0) grad.noalias() += gram_.col(j) * z(j);
            }
            double step = 0.0;
            for (Index j = 0; j < r; ++j) {
                next(j) = soft_threshold(z(j) - grad(j) / m, thresh);
                step = std::max(step, std::abs(next(j) - x(j)));
            }
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            if ((z - next).dot(next - x) > 0.0) {
                t = 1.0;
                z = next;
            } else {
                z = next + ((t - 1.0) / t_next) * (next - x);
                t = t_next;
            }
            x.swap(next);
            ++k;
            if (step * m <= stop) return {k, true};
            if (k % polish_every == 0 && polish(b, lambda, x)) return {k, true};
        }
        return {k, polish(b, lambda, x)};
    }

    Matrix a_;
    Matrix gram_;
    Matrix range_basis_;
    ConstrainedCodingConfig cfg_;
    double lipschitz_ = 1.0;
};

// One-shot wrapper; build a SparseCoder directly to amortize over columns.
inline SolveResult sparse_code_constrained(const Matrix& a, const Eigen::Ref<const Vector>& y,
                                           double eps, const ConstrainedCodingConfig& cfg = {},
                                           std::vector<BisectionStep>* trace = nullptr)
{
    return SparseCoder(a, cfg).solve(y, eps, trace);
}

struct MlFistaOptions
{
    // Per-layer step constants M_l (index 0 is A₁); empty computes ‖A_l‖².
    std::vector<double> lipschitz;
    // Momentum is reset every this many iterations (0 disables).
    std::size_t restart_every = 200;
};

/// Multi-layer FISTA for
///   min ½‖y − A_L···A₁x‖² + Σ_l λ_l ‖A_{l−1}···A₁x‖₁.
///
/// Each iteration evaluates the nested proximal map at the extrapolated
/// point z: starting from the outermost layer, u_L = s(P_{L−1}z −
/// η_L A_Lᵀ(A_L P_{L−1}z − y)), then u_{l−1} = s(P_{l−1}z −
/// η_l A_lᵀ(A_l P_{l−1}z − u_l)) down to the code, where P_l = A_l···A₁ and
/// η_l = 1/M_l. The layer-l threshold is λ_l·η_l···η_L, so with all inner
/// λ = 0 an iteration is exactly a FISTA step on the product with
/// M = M₁···M_L.
inline Vector ml_fista(const std::vector<Matrix>& dicts, const Eigen::Ref<const Vector>& y,
                       const std::vector<double>& lambdas, std::size_t iterations,
                       const MlFistaOptions& opts = {})
{
    const std::size_t layers = dicts.size();
    detail::require(layers >= 1, "ml_fista: at least one dictionary required");
    detail::require(lambdas.size() == layers, "ml_fista: need one lambda per layer");
    detail::require(dicts.back().rows() == y.size(), "ml_fista: y has wrong size");
    for (std::size_t l = 1; l < layers; ++l) {
        detail::require(dicts[l].cols() == dicts[l - 1].rows(), "ml_fista: dictionaries not chainable");
    }
    for (double lam : lambdas) detail::require(lam >= 0.0, "ml_fista: lambdas must be non-negative");

    std::vector<double> eta(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        double m = 0.0;
        if (!opts.lipschitz.empty()) {
            detail::require(opts.lipschitz.size() == layers, "ml_fista: need one step constant per layer");
            m = opts.lipschitz[l];
        } else {
            const double sn = spectral_norm(dicts[l]);
            m = sn > 0.0 ? sn * sn : 1.0;
        }
        eta[l] = 1.0 / m;
    }
    // Cumulative step for layer l: η_l···η_L.
    std::vector<double> cum(layers);
    double acc = 1.0;
    for (std::size_t l = layers; l-- > 0;) {
        acc *= eta[l];
        cum[l] = acc;
    }

    const Index r = dicts.front().cols();
    Vector x = Vector::Zero(r);
    Vector z = x;
    double t = 1.0;
    std::vector<Vector> partial(layers);  // partial[l] = A_l···A₁ z (0-based l)

    for (std::size_t k = 0; k < iterations; ++k) {
        if (opts.restart_every && k > 0 && k % opts.restart_every == 0) {
            t = 1.0;
            z = x;
        }
        Vector cur = z;
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            cur = dicts[l] * cur;
            partial[l] = cur;
        }
        Vector target = y;
        for (std::size_t l = layers; l-- > 1;) {
            const Vector& input = partial[l - 1];
            const Vector v = input - eta[l] * (dicts[l].transpose() * (dicts[l] * input - target));
            target = soft_threshold(v, lambdas[l] * cum[l]);
        }
        const Vector v = z - eta[0] * (dicts[0].transpose() * (dicts[0] * z - target));
        Vector next = soft_threshold(v, lambdas[0] * cum[0]);

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = next + ((t - 1.0) / t_next) * (next - x);
        t = t_next;
        x.swap(next);
    }
    return x;
}

} // namespace ds2p
