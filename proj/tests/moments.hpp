#pragma once
// Monte Carlo moment battery for the raw column-sparse generator.

#include <ds2p/genmodel.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace testutil {

struct MomentCheck
{
    std::string name;
    double expected = 0.0;
    double mean = 0.0;
    double stderr_mean = 0.0;

    bool within(double k) const { return std::abs(mean - expected) <= k * stderr_mean + 1e-15; }
};

inline MomentCheck sample_moment(std::string name, double expected, const std::vector<double>& values)
{
    MomentCheck c;
    c.name = std::move(name);
    c.expected = expected;
    double sum = 0.0;
    for (double v : values) sum += v;
    const double n = static_cast<double>(values.size());
    c.mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - c.mean) * (v - c.mean);
    c.stderr_mean = std::sqrt(ss / (n - 1.0) / n);
    return c;
}

struct MomentBattery
{
    std::vector<MomentCheck> checks;
    double max_column_norm_sq = 0.0;  // must not exceed d
};

inline MomentBattery moment_battery(ds2p::Index d, ds2p::Index r, ds2p::Index s_a, std::uint64_t seed)
{
    using namespace ds2p;
    Rng rng(seed);
    const Matrix a = sample_sparse_dictionary(d, r, s_a, NonzeroLaw::rademacher(), rng);
    const double p = static_cast<double>(s_a) / static_cast<double>(d);

    std::vector<double> sq;
    std::vector<double> ind;
    sq.reserve(static_cast<std::size_t>(a.size()));
    ind.reserve(static_cast<std::size_t>(a.size()));
    for (Index j = 0; j < r; ++j) {
        for (Index i = 0; i < d; ++i) {
            sq.push_back(a(i, j) * a(i, j));
            ind.push_back(a(i, j) != 0.0 ? 1.0 : 0.0);
        }
    }
    // Disjoint pairs so each product is used once.
    std::vector<double> cross;
    std::vector<double> pair_other_cols;
    for (Index j = 0; j + 1 < r; j += 2) {
        for (Index i = 0; i < d; ++i) {
            cross.push_back(a(i, j) * a(i, j + 1));
            pair_other_cols.push_back((a(i, j) != 0.0 && a(i, j + 1) != 0.0) ? 1.0 : 0.0);
        }
    }
    std::vector<double> pair_same_col;
    for (Index j = 0; j < r; ++j) {
        for (Index i = 0; i + 1 < d; i += 2) {
            pair_same_col.push_back((a(i, j) != 0.0 && a(i + 1, j) != 0.0) ? 1.0 : 0.0);
        }
    }

    MomentBattery out;
    out.checks.push_back(sample_moment("E[A_ij^2] = 1", 1.0, sq));
    out.checks.push_back(sample_moment("E[A_ij A_ij'] = 0", 0.0, cross));
    out.checks.push_back(sample_moment("P[U_ij = 1] = s_A/d", p, ind));
    out.checks.push_back(sample_moment("P[U_ij = 1, U_i'j = 1] = (s_A/d)(s_A-1)/(d-1)",
                                       p * (static_cast<double>(s_a) - 1.0) / (static_cast<double>(d) - 1.0),
                                       pair_same_col));
    out.checks.push_back(sample_moment("P[U_ij = 1, U_ij' = 1] = (s_A/d)^2", p * p, pair_other_cols));
    for (Index j = 0; j < r; ++j) out.max_column_norm_sq = std::max(out.max_column_norm_sq, a.col(j).squaredNorm());
    return out;
}

} // namespace testutil
