#pragma once
#include <ds2p/core.hpp>
#include <ds2p/parallel.hpp>
#include <ds2p/rng.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace ds2p {

// Distribution of the nonzero entries of sparse codes and sparse dictionaries.
struct NonzeroLaw
{
    enum class Kind { rademacher, uniform_shell, gaussian_truncated };

    Kind kind = Kind::rademacher;
    double lo = 1.0;  // uniform_shell: magnitude lower bound
    double hi = 1.0;  // uniform_shell: magnitude upper bound; gaussian_truncated: |v| cap

    static NonzeroLaw rademacher() { return {Kind::rademacher, 1.0, 1.0}; }
    static NonzeroLaw uniform_shell(double lo, double hi) { return {Kind::uniform_shell, lo, hi}; }
    static NonzeroLaw gaussian_truncated(double cap) { return {Kind::gaussian_truncated, 0.0, cap}; }

    // Almost-sure bound on |value|.
    double amplitude_bound() const
    {
        switch (kind) {
        case Kind::rademacher: return 1.0;
        case Kind::uniform_shell: return hi;
        case Kind::gaussian_truncated: return hi;
        }
        return hi;
    }

    void validate() const
    {
        if (kind == Kind::uniform_shell) {
            detail::require(lo > 0 && hi >= lo, "uniform_shell requires 0 < lo <= hi");
        } else if (kind == Kind::gaussian_truncated) {
            detail::require(hi > 0, "gaussian_truncated requires a positive cap");
        }
    }

    double draw(Rng& rng) const
    {
        switch (kind) {
        case Kind::rademacher:
            return rng.rademacher();
        case Kind::uniform_shell: {
            const double sign = rng.rademacher();
            return sign * rng.uniform(lo, hi);
        }
        case Kind::gaussian_truncated: {
            for (;;) {
                const double v = rng.normal();
                if (std::abs(v) <= hi) return v;
            }
        }
        }
        return 0.0;
    }

    std::string name() const
    {
        switch (kind) {
        case Kind::rademacher: return "rademacher";
        case Kind::uniform_shell: return "uniform_shell";
        case Kind::gaussian_truncated: return "gaussian_truncated";
        }
        return "unknown";
    }
};

struct LayerDims
{
    Index d = 0;  // rows
    Index r = 0;  // cols
};

/// Architecture of the deep sparse model Y = A⁽ᴸ⁾···A⁽¹⁾X.
///
/// `dims[l]` holds the shape of A⁽ˡ⁺¹⁾ (layer 1 is the deepest, applied
/// directly to the codes). `column_sparsities[l]` is the per-column nonzero
/// count of A⁽ˡ⁺¹⁾ for the L−1 sparse layers. `amplitude_bounds[l]` is
/// M_(l): the bound on |X_ij| for l = 0 and on |√s_(l)·A⁽ˡ⁾_ij| above.
struct DeepModelSpec
{
    std::vector<LayerDims> dims;
    Index code_sparsity = 1;
    std::vector<Index> column_sparsities;
    std::vector<double> amplitude_bounds;
    NonzeroLaw code_law = NonzeroLaw::uniform_shell(1.0, 2.0);
    NonzeroLaw dict_law = NonzeroLaw::rademacher();

    std::size_t layers() const noexcept { return dims.size(); }
    Index code_dim() const { return dims.front().r; }
    Index observation_dim() const { return dims.back().d; }

    void validate() const
    {
        detail::require(!dims.empty(), "model spec: at least one layer required");
        for (std::size_t l = 0; l < dims.size(); ++l) {
            detail::require(dims[l].d >= 1 && dims[l].r >= 1,
                            "model spec: layer " + std::to_string(l + 1) + " has empty dims");
        }
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            detail::require(dims[l + 1].r == dims[l].d,
                            "model spec: cols of A" + std::to_string(l + 2) + " (" +
                                std::to_string(dims[l + 1].r) + ") must equal rows of A" +
                                std::to_string(l + 1) + " (" + std::to_string(dims[l].d) + ")");
        }
        detail::require(code_sparsity >= 1 && code_sparsity <= dims.front().r,
                        "model spec: code sparsity must lie in [1, r1]");
        detail::require(column_sparsities.size() + 1 == dims.size(),
                        "model spec: need exactly L-1 column sparsities");
        for (std::size_t l = 0; l < column_sparsities.size(); ++l) {
            detail::require(column_sparsities[l] >= 1 && column_sparsities[l] <= dims[l].d,
                            "model spec: column sparsity of A" + std::to_string(l + 1) +
                                " must lie in [1, d]");
        }
        detail::require(amplitude_bounds.empty() || amplitude_bounds.size() == dims.size(),
                        "model spec: need L amplitude bounds (or none)");
        code_law.validate();
        dict_law.validate();
    }

    // M_(l) for l = 0..L−1; defaults follow the nonzero laws.
    double amplitude_bound(std::size_t l) const
    {
        if (!amplitude_bounds.empty()) return amplitude_bounds.at(l);
        return l == 0 ? code_law.amplitude_bound() : dict_law.amplitude_bound();
    }

    // Two-layer model with the dimensions used for the reported simulations.
    static DeepModelSpec full_two_layer()
    {
        DeepModelSpec spec;
        spec.dims = {{200, 800}, {100, 200}};
        spec.code_sparsity = 3;
        spec.column_sparsities = {3};
        return spec;
    }

    // Scaled-down two-layer model that runs in minutes.
    static DeepModelSpec desk_two_layer()
    {
        DeepModelSpec spec;
        spec.dims = {{60, 150}, {40, 60}};
        spec.code_sparsity = 3;
        spec.column_sparsities = {3};
        return spec;
    }

    static DeepModelSpec shallow(Index d, Index r, Index s)
    {
        DeepModelSpec spec;
        spec.dims = {{d, r}};
        spec.code_sparsity = s;
        return spec;
    }
};

struct DeepModelInstance
{
    DeepModelSpec spec;
    std::vector<Matrix> dicts;          // A⁽¹⁾ .. A⁽ᴸ⁾
    Matrix codes;                       // X, r1 × n
    std::vector<Matrix> intermediates;  // Y⁽¹⁾ .. Y⁽ᴸ⁻¹⁾
    Matrix observations;                // Y, d_L × n
    std::uint64_t seed = 0;

    // A-priori bounds on |Y⁽ˡ⁾_ij| for l = 0..L−1 (l = 0 is X), built from
    // the sparsity of each input column and the largest dictionary entry.
    std::vector<double> amplitude_bounds;

    Index samples() const { return codes.cols(); }

    // A⁽ˡ→ᴸ⁾ = A⁽ᴸ⁾···A⁽ˡ⁾ for 1-based l.
    Matrix product_from(std::size_t l) const
    {
        detail::require(l >= 1 && l <= dicts.size(), "product_from: layer out of range");
        Matrix p = dicts.back();
        for (std::size_t k = dicts.size() - 1; k >= l; --k) {
            p = p * dicts[k - 1];
        }
        return p;
    }

    // Y⁽ˡ⁾ for 0-based l in [0, L]: X, the intermediates, then Y.
    const Matrix& layer_output(std::size_t l) const
    {
        if (l == 0) return codes;
        if (l == dicts.size()) return observations;
        return intermediates.at(l - 1);
    }
};

/// Uniform s-subset of {0..r−1} by partial Fisher-Yates shuffle.
inline SupportSet sample_support(Index r, Index s, Rng& rng)
{
    detail::require(r >= 1 && s >= 1 && s <= r, "sample_support: need 1 <= s <= r");
    std::vector<Index> pool(static_cast<std::size_t>(r));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < s; ++i) {
        const auto j = i + static_cast<Index>(rng.index(static_cast<std::uint64_t>(r - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(s));
    return SupportSet(std::move(pool), r);
}

namespace detail {

// Fills each column with `s` nonzeros (scale · law) on a uniform support.
// Column j draws from its own stream so columns may be filled in parallel.
inline Matrix sample_column_sparse(Index rows, Index cols, Index s, double scale,
                                   const NonzeroLaw& law, Rng& rng)
{
    law.validate();
    const Rng base = rng.split(rng());
    Matrix out = Matrix::Zero(rows, cols);
    parallel_for(static_cast<std::size_t>(cols), [&](std::size_t j) {
        Rng col_rng = base.split(j);
        const SupportSet supp = sample_support(rows, s, col_rng);
        for (Index i : supp) {
            out(i, static_cast<Index>(j)) = scale * law.draw(col_rng);
        }
    });
    return out;
}

} // namespace detail

/// Column-sparse random dictionary with entries √(d/s_A)·U_ij·V_ij.
///
/// U selects s_A rows per column uniformly without replacement, V follows
/// `law`. The result is NOT column-normalized.
inline Matrix sample_sparse_dictionary(Index d, Index r, Index s_a, const NonzeroLaw& law, Rng& rng)
{
    detail::require(d >= 1 && r >= 1, "sample_sparse_dictionary: empty dims");
    detail::require(s_a >= 1 && s_a <= d, "sample_sparse_dictionary: need 1 <= s_A <= d");
    const double scale = std::sqrt(static_cast<double>(d) / static_cast<double>(s_a));
    return detail::sample_column_sparse(d, r, s_a, scale, law, rng);
}

// I.i.d. N(0, 1/d) entries, unnormalized.
inline Matrix sample_dense_dictionary(Index d, Index r, Rng& rng)
{
    detail::require(d >= 1 && r >= 1, "sample_dense_dictionary: empty dims");
    const Rng base = rng.split(rng());
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix out(d, r);
    parallel_for(static_cast<std::size_t>(r), [&](std::size_t j) {
        Rng col_rng = base.split(j);
        for (Index i = 0; i < d; ++i) out(i, static_cast<Index>(j)) = sd * col_rng.normal();
    });
    return out;
}

// n columns, each exactly s-sparse on a uniform support.
inline Matrix sample_codes(Index r, Index n, Index s, const NonzeroLaw& law, Rng& rng)
{
    detail::require(r >= 1 && n >= 1, "sample_codes: empty dims");
    detail::require(s >= 1 && s <= r, "sample_codes: need 1 <= s <= r");
    return detail::sample_column_sparse(r, n, s, 1.0, law, rng);
}

/// Draws a full instance of the deep model.
///
/// A⁽ᴸ⁾ is dense Gaussian, A⁽ˡ⁾ for l < L are column-sparse; every
/// dictionary is column-normalized. Each factor and the codes use a stream
/// derived from (seed, layer), so the instance is a pure function of
/// (spec, n, seed).
inline DeepModelInstance synthesize(const DeepModelSpec& spec, Index n, std::uint64_t seed)
{
    spec.validate();
    detail::require(n >= 1, "synthesize: need at least one sample");

    const Rng root(seed);
    const std::size_t layers = spec.layers();

    DeepModelInstance inst;
    inst.spec = spec;
    inst.seed = seed;
    inst.dicts.resize(layers);

    for (std::size_t l = 0; l < layers; ++l) {
        Rng stream = root.split(l + 1);
        const auto& dm = spec.dims[l];
        if (l + 1 == layers) {
            inst.dicts[l] = column_normalize(sample_dense_dictionary(dm.d, dm.r, stream));
        } else {
            inst.dicts[l] = column_normalize(
                sample_sparse_dictionary(dm.d, dm.r, spec.column_sparsities[l], spec.dict_law, stream));
        }
    }

    Rng code_stream = root.split(0);
    inst.codes = sample_codes(spec.code_dim(), n, spec.code_sparsity, spec.code_law, code_stream);

    inst.amplitude_bounds.push_back(spec.amplitude_bound(0));
    Index input_sparsity = spec.code_sparsity;
    Matrix current = inst.codes;
    for (std::size_t l = 0; l < layers; ++l) {
        current = inst.dicts[l] * current;
        if (l + 1 < layers) {
            inst.intermediates.push_back(current);
            const double max_entry = inst.dicts[l].cwiseAbs().maxCoeff();
            inst.amplitude_bounds.push_back(static_cast<double>(input_sparsity) * max_entry *
                                            inst.amplitude_bounds.back());
            input_sparsity *= spec.column_sparsities[l];
        }
    }
    inst.observations = std::move(current);
    return inst;
}

struct PerturbedDictionary
{
    Matrix dictionary;
    double snr_db = 0.0;
};

// SNR in dB of an initialization A + αZ: −10·log10(α²).
inline double snr_db_from_alpha(double alpha)
{
    detail::require(alpha > 0, "alpha must be positive");
    return -10.0 * std::log10(alpha * alpha);
}

inline double alpha_from_snr_db(double snr_db)
{
    return std::pow(10.0, -snr_db / 20.0);
}

/// A + Z with Z_ij i.i.d. α·N(0, 1/d); not renormalized.
inline PerturbedDictionary perturb_dictionary(const Matrix& a, double alpha, Rng& rng)
{
    detail::require(alpha > 0, "perturb_dictionary: alpha must be positive");
    PerturbedDictionary out;
    out.dictionary = a + alpha * sample_dense_dictionary(a.rows(), a.cols(), rng);
    out.snr_db = snr_db_from_alpha(alpha);
    return out;
}

} // namespace ds2p
