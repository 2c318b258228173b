#pragma once
#include <ds2p/core.hpp>
#include <ds2p/genmodel.hpp>
#include <ds2p/parallel.hpp>
#include <ds2p/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/SVD>

namespace ds2p {

// Supports enumerated exhaustively when C(cols, s) is at most this.
inline constexpr double exhaustive_support_limit = 1e5;

/// Estimate of the order-s restricted isometry constant.
///
/// In exhaustive mode delta_hat is the exact constant; otherwise it is a
/// lower bound from `trials` sampled supports.
struct RipEstimate
{
    Index order = 0;
    double delta_hat = 0.0;
    std::size_t trials = 0;  // supports examined
    bool exhaustive = false;
    SupportSet worst_support;
    double sigma_min = 1.0;  // extreme singular values on the worst support
    double sigma_max = 1.0;

    bool lower_bound() const noexcept { return !exhaustive; }
};

// C(n, k) in floating point; saturates to +inf.
inline double binomial(Index n, Index k)
{
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double out = 1.0;
    for (Index i = 1; i <= k; ++i) {
        out *= static_cast<double>(n - k + i) / static_cast<double>(i);
        if (!std::isfinite(out)) return std::numeric_limits<double>::infinity();
    }
    return std::round(out);
}

namespace detail {

struct SupportDeviation
{
    double delta = 0.0;
    double smin = 1.0;
    double smax = 1.0;
};

inline SupportDeviation support_deviation(const Matrix& a, const std::vector<Index>& support)
{
    Matrix sub(a.rows(), static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(support[k]);
    const Eigen::JacobiSVD<Matrix> svd(sub);
    const Vector sv = svd.singularValues();
    SupportDeviation out;
    out.smax = sv(0);
    // Wide submatrices (more columns than rows) have zero singular values
    // beyond the rank.
    out.smin = sub.cols() > sub.rows() ? 0.0 : sv(sv.size() - 1);
    out.delta = std::max(1.0 - out.smin * out.smin, out.smax * out.smax - 1.0);
    return out;
}

// Advances `idx` to the next s-combination of {0..n-1} in lexicographic order.
inline bool next_combination(std::vector<Index>& idx, Index n)
{
    const auto s = static_cast<Index>(idx.size());
    for (Index i = s - 1; i >= 0; --i) {
        if (idx[static_cast<std::size_t>(i)] < n - s + i) {
            ++idx[static_cast<std::size_t>(i)];
            for (Index j = i + 1; j < s; ++j) {
                idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
            }
            return true;
        }
    }
    return false;
}

} // namespace detail

/// δ̂_s = max over supports S of max(1 − σ_min(A_S)², σ_max(A_S)² − 1).
///
/// Enumerates every support when C(cols, s) ≤ 1e5, otherwise draws `trials`
/// uniform supports, trial t from rng.split(t), so a run with more trials
/// extends the run with fewer. The matrix is used as given.
inline RipEstimate rip_constant_estimate(const Matrix& a, Index s, std::size_t trials, const Rng& rng)
{
    detail::require(s >= 1 && s <= a.cols(), "rip_constant_estimate: order must lie in [1, cols]");
    RipEstimate out;
    out.order = s;

    std::vector<std::vector<Index>> supports;
    const double total = binomial(a.cols(), s);
    if (total <= exhaustive_support_limit) {
        out.exhaustive = true;
        std::vector<Index> idx(static_cast<std::size_t>(s));
        std::iota(idx.begin(), idx.end(), Index{0});
        do {
            supports.push_back(idx);
        } while (detail::next_combination(idx, a.cols()));
    } else {
        detail::require(trials >= 1, "rip_constant_estimate: need at least one trial");
        supports.resize(trials);
        for (std::size_t t = 0; t < trials; ++t) {
            Rng stream = rng.split(t);
            supports[t] = sample_support(a.cols(), s, stream).indices();
        }
    }

    std::vector<detail::SupportDeviation> dev(supports.size());
    parallel_for(supports.size(), [&](std::size_t t) { dev[t] = detail::support_deviation(a, supports[t]); });

    std::size_t worst = 0;
    for (std::size_t t = 1; t < dev.size(); ++t) {
        if (dev[t].delta > dev[worst].delta) worst = t;
    }
    out.trials = supports.size();
    out.delta_hat = std::max(0.0, dev[worst].delta);
    out.sigma_min = dev[worst].smin;
    out.sigma_max = dev[worst].smax;
    out.worst_support = SupportSet(supports[worst], a.cols());
    return out;
}

// max(1 − ∏(1 − δ_l), ∏(1 + δ_l) − 1).
inline double product_rip_bound(const std::vector<double>& deltas)
{
    double lo = 1.0;
    double hi = 1.0;
    for (double d : deltas) {
        detail::require(d >= 0.0 && d < 1.0, "product_rip_bound: each delta must lie in [0, 1)");
        lo *= 1.0 - d;
        hi *= 1.0 + d;
    }
    return std::max(1.0 - lo, hi - 1.0);
}

struct ConcentrationReport
{
    Index d = 0;
    Index r = 0;
    Index s_a = 0;
    std::size_t trials = 0;
    bool in_regime = false;  // r ≥ 10·d
    std::vector<double> sigma_min_ratio;  // σ_min(Aᵀ)/√r per trial
    std::vector<double> sigma_max_ratio;  // σ_max(Aᵀ)/√r per trial
    std::vector<double> deviation;        // max(|σ_max/√r − 1|, |1 − σ_min/√r|)
    double median = 0.0;
    double q90 = 0.0;
    double max = 0.0;
    double reference = 0.0;  // 3·√(d/r)
    bool passed = false;     // median < reference; only meaningful in regime
};

inline double quantile(std::vector<double> v, double q)
{
    detail::require(!v.empty(), "quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Singular values of raw sparse random matrices against √r(1 ± δ).
inline ConcentrationReport singular_concentration_check(Index d, Index r, Index s_a, std::size_t trials,
                                                        const Rng& rng)
{
    detail::require(trials >= 1, "singular_concentration_check: need at least one trial");
    detail::require(d >= 1 && r >= 1, "singular_concentration_check: empty dims");
    ConcentrationReport out;
    out.d = d;
    out.r = r;
    out.s_a = s_a;
    out.trials = trials;
    out.in_regime = r >= 10 * d;
    out.sigma_min_ratio.resize(trials);
    out.sigma_max_ratio.resize(trials);
    out.deviation.resize(trials);
    const double root_r = std::sqrt(static_cast<double>(r));

    for (std::size_t t = 0; t < trials; ++t) {
        Rng stream = rng.split(t);
        const Matrix a = sample_sparse_dictionary(d, r, s_a, NonzeroLaw::rademacher(), stream);
        // σ(Aᵀ) = σ(A); the d×d Gram matrix is cheap to decompose.
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(a * a.transpose(), Eigen::EigenvaluesOnly);
        const Vector ev = eig.eigenvalues().cwiseMax(0.0);
        const double smin = d <= r ? std::sqrt(ev(0)) : 0.0;
        const double smax = std::sqrt(ev(ev.size() - 1));
        out.sigma_min_ratio[t] = smin / root_r;
        out.sigma_max_ratio[t] = smax / root_r;
        out.deviation[t] = std::max(std::abs(smax / root_r - 1.0), std::abs(1.0 - smin / root_r));
    }
    out.median = quantile(out.deviation, 0.5);
    out.q90 = quantile(out.deviation, 0.9);
    out.max = *std::max_element(out.deviation.begin(), out.deviation.end());
    out.reference = 3.0 * std::sqrt(static_cast<double>(d) / static_cast<double>(r));
    out.passed = out.in_regime && out.median < out.reference;
    return out;
}

struct CouponEstimate
{
    double mean_draws = 0.0;
    double stderr_draws = 0.0;
    std::size_t trials = 0;
};

/// Draws of uniform s-subsets of {0..r−1} until every index has appeared,
/// averaged over trials (trial t uses rng.split(t)).
inline CouponEstimate coupon_collector_trials(Index r, Index s, std::size_t trials, const Rng& rng)
{
    detail::require(s >= 1 && s <= r, "coupon_collector_trials: need 1 <= s <= r");
    detail::require(trials >= 1, "coupon_collector_trials: need at least one trial");
    std::vector<double> draws(trials);
    parallel_for(trials, [&](std::size_t t) {
        Rng stream = rng.split(t);
        std::vector<char> seen(static_cast<std::size_t>(r), 0);
        Index missing = r;
        std::size_t count = 0;
        while (missing > 0) {
            ++count;
            const SupportSet support = sample_support(r, s, stream);
            for (Index i : support.indices()) {
                auto& flag = seen[static_cast<std::size_t>(i)];
                if (!flag) {
                    flag = 1;
                    --missing;
                }
            }
        }
        draws[t] = static_cast<double>(count);
    });

    CouponEstimate out;
    out.trials = trials;
    double sum = 0.0;
    for (double v : draws) sum += v;
    out.mean_draws = sum / static_cast<double>(trials);
    if (trials > 1) {
        double ss = 0.0;
        for (double v : draws) ss += (v - out.mean_draws) * (v - out.mean_draws);
        out.stderr_draws = std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials));
    }
    return out;
}

// One evaluated bound; universal constants are set to 1.
struct ComplexityTerm
{
    std::string name;   // A5a, A5b, B5, lower_bound
    std::size_t layer = 0;
    double value = 0.0;
    bool constant_free = true;
    std::string expression;
};

/// Bracketed expressions of the sample-complexity and hidden-unit bounds.
///
/// `deltas[l]` is the failure parameter for layer l+1 (one entry is
/// broadcast). Terms: A5a for layer 1; A5b for layers 1..L−1 (δ of layer
/// l+1); B5 for every layer, with M_{Y(l−1)} the a-priori bound on
/// σ_(0→l−1)·|Y⁽ˡ⁻¹⁾|; and the coupon-collector lower bound (r₁/s)·ln r₁.
inline std::vector<ComplexityTerm> complexity_expressions(const DeepModelSpec& spec, const std::vector<double>& deltas,
                                                          const std::vector<double>& sigma)
{
    spec.validate();
    const std::size_t layers = spec.layers();
    detail::require(deltas.size() == 1 || deltas.size() == layers,
                    "complexity_expressions: need one delta or one per layer");
    detail::require(sigma.size() == layers, "complexity_expressions: need one scale per layer");
    auto delta = [&](std::size_t l) {  // 1-based
        const double d = deltas.size() == 1 ? deltas[0] : deltas[l - 1];
        detail::require(d > 0.0, "complexity_expressions: deltas must be positive");
        return d;
    };
    auto r = [&](std::size_t l) { return static_cast<double>(spec.dims[l - 1].r); };

    const double s = static_cast<double>(spec.code_sparsity);
    const double m0 = spec.amplitude_bound(0);
    std::vector<ComplexityTerm> out;

    out.push_back({"A5a", 1, std::max(r(1) * r(1), r(1) * m0 * m0 * s) * std::log(2.0 * r(1) / delta(1)), true,
                   "max(r1^2, r1*M0^2*s)*log(2*r1/delta)"});

    for (std::size_t l = 1; l < layers; ++l) {
        const double ml = spec.amplitude_bound(l);
        const double sl = static_cast<double>(spec.column_sparsities[l - 1]);
        out.push_back({"A5b", l,
                       std::max(r(l + 1) * r(l + 1), r(l + 1) * ml * ml * sl) * std::log(2.0 * r(l + 1) / delta(l + 1)),
                       true, "max(r_{l+1}^2, r_{l+1}*M_l^2*s_l)*log(2*r_{l+1}/delta_{l+1})"});
    }

    // Spec-level bound on |Y(l)|: each entry sums s_Y(l−1) products of a
    // dictionary entry (at most M_l/√s_l) and an input entry.
    std::vector<double> y_bound{m0};
    double s_y = s;
    std::vector<double> s_ys{s};
    for (std::size_t l = 1; l < layers; ++l) {
        const double sl = static_cast<double>(spec.column_sparsities[l - 1]);
        y_bound.push_back(s_y * spec.amplitude_bound(l) / std::sqrt(sl) * y_bound.back());
        s_y *= sl;
        s_ys.push_back(s_y);
    }
    for (std::size_t l = 1; l <= layers; ++l) {
        const double m = sigma[l - 1] * y_bound[l - 1];
        const double sy = s_ys[l - 1];
        const double v = std::max(r(1) * r(l) * sy / s * std::log(2.0 * r(1) / delta(l)),
                                  r(l) * m * m * sy * std::log(2.0 * r(l) / delta(l)));
        out.push_back({"B5", l, v, true,
                       "max(r1*r_l*s_Y(l-1)/s*log(2*r1/delta_l), r_l*M_Y(l-1)^2*s_Y(l-1)*log(2*r_l/delta_l))"});
    }

    out.push_back({"lower_bound", 1, r(1) / s * std::log(r(1)), true, "(r1/s)*ln(r1)"});
    return out;
}

} // namespace ds2p
