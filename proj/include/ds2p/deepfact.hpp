#pragma once
#include <ds2p/altmin.hpp>
#include <ds2p/analysis.hpp>
#include <ds2p/core.hpp>
#include <ds2p/genmodel.hpp>
#include <ds2p/rng.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ds2p {

enum class FactorMode { forward, backward };

inline std::string to_string(FactorMode m) { return m == FactorMode::forward ? "forward" : "backward"; }

inline FactorMode parse_factor_mode(const std::string& s)
{
    if (s == "forward") return FactorMode::forward;
    if (s == "backward") return FactorMode::backward;
    throw ParameterError("unknown factorization mode '" + s + "'");
}

// Which product defines σ_(0→l): from_first_layer gives σ_(0→0) = 1 and
// σ_(0→l) = ∏_{l'=1..l} √s_(l'); including_codes also multiplies by √s for
// every l (so σ_(0→0) = √s).
enum class SigmaConvention { from_first_layer, including_codes };

inline std::string to_string(SigmaConvention c)
{
    return c == SigmaConvention::from_first_layer ? "from_first_layer" : "including_codes";
}

inline SigmaConvention parse_sigma_convention(const std::string& s)
{
    if (s == "from_first_layer") return SigmaConvention::from_first_layer;
    if (s == "including_codes") return SigmaConvention::including_codes;
    throw ParameterError("unknown sigma convention '" + s + "'");
}

struct SparsityLedger
{
    std::vector<Index> s_y;     // s_Y(l) for l = 0..L−1
    std::vector<double> sigma;  // σ_(0→l) for l = 0..L−1
    std::vector<Index> column_sparsities;  // s_(l) for l = 1..L−1
    Index code_sparsity = 1;
    SigmaConvention convention = SigmaConvention::from_first_layer;

    std::size_t layers() const noexcept { return s_y.size(); }

    // s_(l) with s_(0) = s.
    Index level_sparsity(std::size_t l) const
    {
        return l == 0 ? code_sparsity : column_sparsities.at(l - 1);
    }
};

inline SparsityLedger sparsity_levels(const DeepModelSpec& spec,
                                      SigmaConvention convention = SigmaConvention::from_first_layer)
{
    spec.validate();
    SparsityLedger out;
    out.convention = convention;
    out.code_sparsity = spec.code_sparsity;
    out.column_sparsities = spec.column_sparsities;
    Index s_y = spec.code_sparsity;
    double sigma = convention == SigmaConvention::from_first_layer
                       ? 1.0
                       : std::sqrt(static_cast<double>(spec.code_sparsity));
    out.s_y.push_back(s_y);
    out.sigma.push_back(sigma);
    for (std::size_t l = 1; l < spec.layers(); ++l) {
        const Index sl = spec.column_sparsities[l - 1];
        s_y *= sl;
        sigma *= std::sqrt(static_cast<double>(sl));
        out.s_y.push_back(s_y);
        out.sigma.push_back(sigma);
    }
    return out;
}

inline AltMinConfig deep_altmin_defaults()
{
    AltMinConfig cfg;
    cfg.rho = 0.85;
    return cfg;
}

struct FactorizationConfig
{
    AltMinConfig altmin = deep_altmin_defaults();
    // When positive, stage ε₀ = eps0_numerator / sqrt(s_stage), where s_stage
    // is the sparsity passed to that stage; otherwise altmin.eps0 throughout.
    double eps0_numerator = 0.03;
    // ℓ̄: forward runs stages 1..ℓ̄, backward runs L..ℓ̄. 0 runs all stages.
    std::size_t last_level = 0;

    AltMinConfig stage_config(Index stage_sparsity) const
    {
        AltMinConfig cfg = altmin;
        if (eps0_numerator > 0.0) {
            cfg.eps0 = eps0_numerator / std::sqrt(static_cast<double>(stage_sparsity));
        }
        return cfg;
    }
};

struct FactorizationStage
{
    std::size_t level = 0;  // l of the stage
    Index sparsity = 0;     // sparsity passed to the alternating minimization
    double input_scale = 1.0;
    double eps0 = 0.0;
    std::string dictionary_name;  // e.g. "A1->2", "A2"
    std::string codes_name;       // e.g. "X", "Y1", "A1"
    Matrix dictionary;
    Matrix codes;  // unscaled; column-normalized when it estimates a dictionary
    AltMinTrace trace;
    double dictionary_err = std::numeric_limits<double>::quiet_NaN();
    // dict_error when the codes estimate a dictionary, relative Frobenius
    // error when they estimate X or an intermediate.
    double codes_err = std::numeric_limits<double>::quiet_NaN();
    bool codes_are_dictionary = false;
};

struct FactorizationReport
{
    FactorMode mode = FactorMode::forward;
    std::size_t layers = 0;
    std::vector<FactorizationStage> stages;
    std::uint64_t data_seed = 0;
    std::uint64_t init_seed = 0;
    double init_snr_db = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<std::string, std::string>> config;

    // Error of a named recovered factor ("A1->2", "A2", "A1", "X", ...).
    std::optional<double> error_of(const std::string& name) const
    {
        for (const auto& st : stages) {
            if (st.dictionary_name == name) return st.dictionary_err;
            if (st.codes_name == name) return st.codes_err;
        }
        return std::nullopt;
    }
};

class FactorizationError : public ComputeError
{
public:
    FactorizationError(const std::string& what, FactorizationReport partial)
        : ComputeError(what), partial_(std::move(partial)) {}

    const FactorizationReport& partial() const noexcept { return partial_; }

private:
    FactorizationReport partial_;
};

// "A{l}->{L}", or "A{L}" when l == L.
inline std::string product_name(std::size_t l, std::size_t layers)
{
    if (l == layers) return "A" + std::to_string(l);
    return "A" + std::to_string(l) + "->" + std::to_string(layers);
}

namespace detail {

// Normalizes columns that are not numerically zero and leaves the rest.
inline Matrix normalize_nonzero_columns(Matrix a)
{
    for (Index j = 0; j < a.cols(); ++j) {
        const double n = a.col(j).norm();
        if (n >= 1e-12) a.col(j) /= n;
    }
    return a;
}

// dict_error with a zero estimated column counted as the worst case.
inline double dict_error_or_worst(const Matrix& a_hat, const Matrix& a)
{
    try {
        return dict_error(a_hat, a);
    } catch (const DegenerateColumnError&) {
        return 1.0;
    }
}

inline double relative_error(const Matrix& est, const Matrix& truth)
{
    const double n = truth.norm();
    return n > 0.0 ? (est - truth).norm() / n : est.norm();
}

inline void check_truth(const DeepModelInstance* truth, Index d, Index n, std::size_t layers)
{
    if (!truth) return;
    require(truth->dicts.size() == layers, "factorize: truth has a different depth");
    require(truth->observations.rows() == d && truth->observations.cols() == n,
            "factorize: truth observations differ in shape from Y");
}

} // namespace detail

/// Forward factorization: learn A⁽¹→ᴸ⁾ and X from Y, then peel one
/// factor per stage. Stage l ≥ 2 learns A⁽ˡ→ᴸ⁾ from √s_(l−1)·Â⁽ˡ⁻¹→ᴸ⁾;
/// its codes, divided by √s_(l−1) and column-normalized, estimate A⁽ˡ⁻¹⁾.
/// `inits[k]` initializes stage k+1.
inline FactorizationReport forward_factorize(const Matrix& y, const std::vector<Matrix>& inits,
                                             const SparsityLedger& ledger, const FactorizationConfig& cfg,
                                             const DeepModelInstance* truth = nullptr)
{
    const std::size_t layers = ledger.layers();
    detail::require(layers >= 1, "forward_factorize: empty ledger");
    const std::size_t last = cfg.last_level == 0 ? layers : cfg.last_level;
    detail::require(last >= 1 && last <= layers, "forward_factorize: last level out of range");
    detail::require(inits.size() >= last, "forward_factorize: need one initial dictionary per stage");
    detail::check_truth(truth, y.rows(), y.cols(), layers);

    FactorizationReport rep;
    rep.mode = FactorMode::forward;
    rep.layers = layers;

    Matrix input = y;
    for (std::size_t l = 1; l <= last; ++l) {
        FactorizationStage st;
        st.level = l;
        st.sparsity = ledger.level_sparsity(l - 1);
        st.input_scale = l == 1 ? 1.0 : std::sqrt(static_cast<double>(st.sparsity));
        st.dictionary_name = product_name(l, layers);
        st.codes_name = l == 1 ? "X" : "A" + std::to_string(l - 1);
        st.codes_are_dictionary = l > 1;
        const AltMinConfig acfg = cfg.stage_config(st.sparsity);
        st.eps0 = acfg.eps0;

        detail::require(inits[l - 1].rows() == input.rows(),
                        "forward_factorize: initial dictionary for stage " + std::to_string(l) + " has wrong rows");
        std::optional<Matrix> stage_truth;
        if (truth) stage_truth = column_normalize(truth->product_from(l));

        AltMinResult res;
        try {
            res = altmin_dict(st.input_scale * input, inits[l - 1], acfg, st.sparsity, stage_truth);
        } catch (const AltMinError& e) {
            st.trace = e.trace();
            rep.stages.push_back(std::move(st));
            throw FactorizationError("forward stage " + std::to_string(l) + ": " + e.what(), rep);
        }

        st.dictionary = std::move(res.dictionary);
        st.trace = std::move(res.trace);
        if (l == 1) {
            st.codes = std::move(res.codes);
        } else {
            st.codes = detail::normalize_nonzero_columns(res.codes / st.input_scale);
        }
        if (truth) {
            st.dictionary_err = detail::dict_error_or_worst(st.dictionary, *stage_truth);
            st.codes_err = l == 1 ? detail::relative_error(st.codes, truth->codes)
                                  : detail::dict_error_or_worst(st.codes, truth->dicts[l - 2]);
        }
        input = st.dictionary;
        rep.stages.push_back(std::move(st));
    }
    return rep;
}

/// Backward factorization: learn A⁽ᴸ⁾ from σ_(0→L−1)·Y, then feed each
/// recovered intermediate, rescaled by σ, to the next stage down to A⁽ˡ̄⁾.
/// Stage codes are divided by σ before being reported. `inits[k]`
/// initializes the k-th stage run, i.e. A⁽ᴸ⁻ᵏ⁾.
inline FactorizationReport backward_factorize(const Matrix& y, const std::vector<Matrix>& inits,
                                              const SparsityLedger& ledger, const FactorizationConfig& cfg,
                                              const DeepModelInstance* truth = nullptr)
{
    const std::size_t layers = ledger.layers();
    detail::require(layers >= 1, "backward_factorize: empty ledger");
    const std::size_t last = cfg.last_level == 0 ? 1 : cfg.last_level;
    detail::require(last >= 1 && last <= layers, "backward_factorize: last level out of range");
    detail::require(inits.size() >= layers - last + 1, "backward_factorize: need one initial dictionary per stage");
    detail::check_truth(truth, y.rows(), y.cols(), layers);

    FactorizationReport rep;
    rep.mode = FactorMode::backward;
    rep.layers = layers;

    Matrix current = y;  // Ŷ⁽ˡ⁾, unscaled
    for (std::size_t l = layers, k = 0; l >= last; --l, ++k) {
        FactorizationStage st;
        st.level = l;
        st.sparsity = ledger.s_y[l - 1];
        st.input_scale = ledger.sigma[l - 1];
        st.dictionary_name = "A" + std::to_string(l);
        st.codes_name = l == 1 ? "X" : "Y" + std::to_string(l - 1);
        const AltMinConfig acfg = cfg.stage_config(st.sparsity);
        st.eps0 = acfg.eps0;

        detail::require(inits[k].rows() == current.rows(),
                        "backward_factorize: initial dictionary for stage " + std::to_string(l) + " has wrong rows");
        std::optional<Matrix> stage_truth;
        if (truth) stage_truth = truth->dicts[l - 1];

        AltMinResult res;
        try {
            res = altmin_dict(st.input_scale * current, inits[k], acfg, st.sparsity, stage_truth);
        } catch (const AltMinError& e) {
            st.trace = e.trace();
            rep.stages.push_back(std::move(st));
            throw FactorizationError("backward stage " + std::to_string(l) + ": " + e.what(), rep);
        }

        st.dictionary = std::move(res.dictionary);
        st.trace = std::move(res.trace);
        st.codes = res.codes / st.input_scale;
        if (truth) {
            st.dictionary_err = detail::dict_error_or_worst(st.dictionary, *stage_truth);
            st.codes_err = detail::relative_error(st.codes, truth->layer_output(l - 1));
        }
        current = st.codes;
        rep.stages.push_back(std::move(st));
        if (l == 1) break;
    }
    return rep;
}

inline FactorizationReport factorize(FactorMode mode, const Matrix& y, const std::vector<Matrix>& inits,
                                     const SparsityLedger& ledger, const FactorizationConfig& cfg,
                                     const DeepModelInstance* truth = nullptr)
{
    return mode == FactorMode::forward ? forward_factorize(y, inits, ledger, cfg, truth)
                                       : backward_factorize(y, inits, ledger, cfg, truth);
}

/// Perturbed ground-truth initializations in stage order: normalized
/// A⁽ˡ→ᴸ⁾ for l = 1..L (forward) or A⁽ᴸ⁾..A⁽¹⁾ (backward), each plus
/// α·N(0, 1/d) noise from its own stream of `seed`.
inline std::vector<Matrix> initial_dictionaries(const DeepModelInstance& inst, FactorMode mode, double alpha,
                                                std::uint64_t seed)
{
    const std::size_t layers = inst.dicts.size();
    const Rng root(seed);
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < layers; ++k) {
        const std::size_t l = mode == FactorMode::forward ? k + 1 : layers - k;
        const Matrix truth = mode == FactorMode::forward && l < layers ? column_normalize(inst.product_from(l))
                                                                       : inst.dicts[l - 1];
        Rng stream = root.split(l);
        out.push_back(perturb_dictionary(truth, alpha, stream).dictionary);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Assumption audits

struct AuditOptions
{
    std::optional<double> rip_delta;  // pass threshold for the RIP records
    double mu = 2.0;                  // spectral-norm constant
    double mu_min = 0.1;              // smallest-singular-value constant
    double delta = 0.1;               // failure parameter of the complexity terms
    std::size_t rip_trials = 2000;
    std::uint64_t seed = 0;
    SigmaConvention sigma = SigmaConvention::from_first_layer;
};

struct AuditRecord
{
    std::string id;          // "A1", "B2c", ...
    std::size_t layer = 0;   // l the record refers to
    std::string quantity;
    double measured = 0.0;
    double bound = 0.0;
    std::optional<bool> passed;  // empty when no threshold applies
    bool constant_free = false;  // bound evaluated with unknown constants set to 1
    std::string note;
};

struct AuditReport
{
    FactorMode mode = FactorMode::forward;
    std::vector<AuditRecord> records;

    const AuditRecord* find(const std::string& id, std::size_t layer) const
    {
        for (const auto& r : records) {
            if (r.id == id && r.layer == layer) return &r;
        }
        return nullptr;
    }

    std::vector<const AuditRecord*> failures() const
    {
        std::vector<const AuditRecord*> out;
        for (const auto& r : records) {
            if (r.passed && !*r.passed) out.push_back(&r);
        }
        return out;
    }
};

namespace detail {

struct EntryStats
{
    double mean = 0.0;
    double mean_square = 0.0;
    double max_abs = 0.0;
    double stderr_mean = 0.0;
    std::size_t count = 0;
};

inline EntryStats nonzero_stats(const Matrix& m)
{
    EntryStats st;
    double sum = 0.0;
    double sq = 0.0;
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            const double v = m(i, j);
            if (std::abs(v) <= nonzero_threshold) continue;
            ++st.count;
            sum += v;
            sq += v * v;
            st.max_abs = std::max(st.max_abs, std::abs(v));
        }
    }
    if (st.count > 0) {
        const double n = static_cast<double>(st.count);
        st.mean = sum / n;
        st.mean_square = sq / n;
        st.stderr_mean = std::sqrt(std::max(0.0, st.mean_square - st.mean * st.mean) / n);
    }
    return st;
}

inline bool exact_column_sparsity(const Matrix& m, Index s)
{
    for (Index j = 0; j < m.cols(); ++j) {
        if (count_nonzeros(m.col(j)) != s) return false;
    }
    return true;
}

inline Matrix indicator(const Matrix& m)
{
    return m.unaryExpr([](double v) { return std::abs(v) > nonzero_threshold ? 1.0 : 0.0; });
}

// max_i min_z ‖z·a0_i − a_i‖ on normalized columns.
inline double init_distance(const Matrix& a0, const Matrix& a)
{
    const Matrix n0 = column_normalize(a0);
    const Matrix n = column_normalize(a);
    double worst = 0.0;
    for (Index j = 0; j < n.cols(); ++j) {
        worst = std::max(worst, std::min((n0.col(j) - n.col(j)).norm(), (n0.col(j) + n.col(j)).norm()));
    }
    return worst;
}

inline AuditRecord rip_record(const std::string& id, std::size_t layer, const Matrix& a, Index order,
                              const AuditOptions& opt)
{
    const Index s = std::min(order, a.cols());
    const auto est = rip_constant_estimate(a, s, opt.rip_trials, Rng(opt.seed).split(layer));
    AuditRecord r{id, layer, "delta_" + std::to_string(s), est.delta_hat, 0.1, std::nullopt, false, ""};
    if (opt.rip_delta) r.passed = est.delta_hat < *opt.rip_delta;
    r.note = est.exhaustive ? "exact (all supports)" : "lower bound from " + std::to_string(est.trials) + " sampled supports";
    if (s < order) r.note += "; order clipped to column count";
    return r;
}

inline void code_records(AuditReport& rep, const DeepModelInstance& inst, const std::string& prefix, bool check_mean)
{
    const auto st = nonzero_stats(inst.codes);
    const double m0 = inst.spec.amplitude_bound(0);
    if (check_mean) {
        rep.records.push_back({prefix, 0, "mean of X nonzeros", st.mean, 0.0,
                               std::abs(st.mean) <= 3.0 * st.stderr_mean + 1e-12, false, "within 3 standard errors"});
    }
    rep.records.push_back({prefix, 0, "E[X_ij^2] over nonzeros", st.mean_square, 1.0,
                           std::abs(st.mean_square - 1.0) <= 0.05, false, "5% relative tolerance"});
    rep.records.push_back({prefix, 0, "max |X_ij|", st.max_abs, m0, st.max_abs <= m0 + 1e-12, false, ""});
}

inline AuditRecord sparsity_bound_record(const std::string& id, std::size_t layer, const std::string& what,
                                         Index s, Index d)
{
    const double bound = std::pow(static_cast<double>(d), 1.0 / 6.0);
    return {id, layer, what, static_cast<double>(s), bound, static_cast<double>(s) <= bound, true,
            "bound d^(1/6) with c2 = mu = 1"};
}

} // namespace detail

/// Measures the forward-mode assumptions on a realized instance. `inits`
/// (stage order, optional) enables the initialization-radius record.
inline AuditReport audit_assumptions_forward(const DeepModelInstance& inst, const AuditOptions& opt = {},
                                             const std::vector<Matrix>* inits = nullptr)
{
    const auto& spec = inst.spec;
    const std::size_t layers = spec.layers();
    const auto ledger = sparsity_levels(spec, opt.sigma);
    const Index d_l = spec.observation_dim();
    const double n = static_cast<double>(inst.samples());
    AuditReport rep;
    rep.mode = FactorMode::forward;

    std::vector<double> mu_hat(layers + 1, 0.0);
    for (std::size_t l = 1; l <= layers; ++l) {
        const Matrix p = column_normalize(inst.product_from(l));
        rep.records.push_back(detail::rip_record("A1", l, p, 2 * ledger.level_sparsity(l - 1), opt));

        const double norm = spectral_norm(p);
        const double scale = std::sqrt(static_cast<double>(spec.dims[l - 1].r) / static_cast<double>(d_l));
        mu_hat[l] = norm / scale;
        rep.records.push_back({"A2", l, "spectral norm of normalized A(l->L)", norm, opt.mu * scale,
                               norm < opt.mu * scale, false, "mu_hat = " + std::to_string(mu_hat[l])});
    }

    detail::code_records(rep, inst, "A3a", false);
    for (std::size_t l = 1; l < layers; ++l) {
        const auto st = detail::nonzero_stats(inst.dicts[l - 1]);
        const double sl = static_cast<double>(spec.column_sparsities[l - 1]);
        rep.records.push_back({"A3b", l, "E[A_ij^2] over nonzeros", st.mean_square, 1.0 / sl,
                               std::abs(st.mean_square * sl - 1.0) <= 0.05, false, "5% relative tolerance"});
        const double ml = spec.amplitude_bound(l);
        rep.records.push_back({"A3b", l, "max |sqrt(s_l) A_ij|", std::sqrt(sl) * st.max_abs, ml,
                               std::sqrt(sl) * st.max_abs <= ml + 1e-12, false, ""});
    }

    for (std::size_t l = 0; l < layers; ++l) {
        const Index s = ledger.level_sparsity(l);
        const Matrix& m = l == 0 ? inst.codes : inst.dicts[l - 1];
        rep.records.push_back({"A4", l, "columns with exactly s_l nonzeros", 1.0, 1.0,
                               detail::exact_column_sparsity(m, s), false, "1 = all columns"});
        rep.records.push_back(detail::sparsity_bound_record("A4", l, "s_l", s, d_l));
    }

    const std::vector<double> sigma = ledger.sigma;
    for (const auto& t : complexity_expressions(spec, {opt.delta}, sigma)) {
        if (t.name == "A5a") {
            AuditRecord r{"A5a", 1, "samples n", n, t.value, n >= t.value, true, t.expression};
            if (n < t.value) {
                r.note += "; n is far below the quadratic term, which is not binding in practice";
            }
            rep.records.push_back(r);
        } else if (t.name == "A5b") {
            const double rl = static_cast<double>(spec.dims[t.layer - 1].r);
            rep.records.push_back({"A5b", t.layer, "hidden units r_l", rl, t.value, rl >= t.value, true, t.expression});
        }
    }

    for (std::size_t l = 1; l <= layers; ++l) {
        const double s = static_cast<double>(ledger.level_sparsity(l - 1));
        const double radius = 1.0 / (2592.0 * s * s);
        if (inits && inits->size() >= l) {
            const double dist = detail::init_distance((*inits)[l - 1], inst.product_from(l));
            rep.records.push_back({"A6", l, "max column distance of initialization", dist, radius, dist <= radius,
                                   false, ""});
        }
        const auto sched = theoretical_schedule(s, mu_hat[l], static_cast<double>(d_l));
        rep.records.push_back({"A7", l, "accuracy ratio 25050*mu*s^3/sqrt(d_L)", sched.ratio, 1.0, sched.decreasing,
                               false, "eps0 = " + std::to_string(sched.eps0)});
    }
    return rep;
}

/// Measures the backward-mode assumptions on a realized instance.
inline AuditReport audit_assumptions_backward(const DeepModelInstance& inst, const AuditOptions& opt = {},
                                              const std::vector<Matrix>* inits = nullptr)
{
    const auto& spec = inst.spec;
    const std::size_t layers = spec.layers();
    const auto ledger = sparsity_levels(spec, opt.sigma);
    const double n = static_cast<double>(inst.samples());
    AuditReport rep;
    rep.mode = FactorMode::backward;

    std::vector<double> mu_hat(layers + 1, 0.0);
    for (std::size_t l = 1; l <= layers; ++l) {
        const Matrix& a = inst.dicts[l - 1];
        const double dl = static_cast<double>(spec.dims[l - 1].d);
        const double rl = static_cast<double>(spec.dims[l - 1].r);
        const double scale = std::sqrt(rl / dl);
        rep.records.push_back(detail::rip_record("B1", l, a, 2 * ledger.s_y[l - 1], opt));

        const double norm = spectral_norm(a);
        mu_hat[l] = norm / scale;
        rep.records.push_back({"B2a", l, "spectral norm of A(l)", norm, opt.mu * scale, norm < opt.mu * scale, false,
                               "mu_hat = " + std::to_string(mu_hat[l])});
        if (l < layers) {
            const auto smin = min_singular_value(a.transpose());
            rep.records.push_back({"B2b", l, "smallest singular value of A(l)^T", smin.value, opt.mu_min * scale,
                                   smin.value > opt.mu_min * scale, false,
                                   smin.rank_deficient ? "rank deficient" : ""});
            const Matrix u = detail::indicator(a);
            const double sl = static_cast<double>(spec.column_sparsities[l - 1]);
            const double r_next = static_cast<double>(spec.dims[l].r);
            const double bound = 2.0 * std::sqrt(sl * sl * rl / r_next);
            const double un = spectral_norm(u);
            rep.records.push_back({"B2c", l, "spectral norm of indicator U(l)", un, bound, un <= bound, false,
                                   "bound 2*sqrt(s_l^2 * r_l / r_{l+1})"});
        }
    }

    detail::code_records(rep, inst, "B3", true);

    rep.records.push_back(detail::sparsity_bound_record("B4", 0, "s", spec.code_sparsity, spec.dims[0].d));
    for (std::size_t l = 1; l < layers; ++l) {
        rep.records.push_back(
            detail::sparsity_bound_record("B4", l, "s_Y(l)", ledger.s_y[l], spec.dims[l].d));
    }

    double worst = 0.0;
    for (const auto& t : complexity_expressions(spec, {opt.delta}, ledger.sigma)) {
        if (t.name != "B5") continue;
        worst = std::max(worst, t.value);
        rep.records.push_back({"B5", t.layer, "term of layer l", t.value, n, std::nullopt, true, t.expression});
    }
    {
        AuditRecord r{"B5", 0, "samples n", n, worst, n >= worst, true, "maximum over layers"};
        if (n < worst) r.note += "; n is far below the quadratic term, which is not binding in practice";
        rep.records.push_back(r);
    }

    for (std::size_t l = 1; l <= layers; ++l) {
        const double s = static_cast<double>(ledger.s_y[l - 1]);
        const double radius = 1.0 / (2592.0 * s * s);
        const std::size_t k = layers - l;
        if (inits && inits->size() > k) {
            const double dist = detail::init_distance((*inits)[k], inst.dicts[l - 1]);
            rep.records.push_back({"B6", l, "max column distance of initialization", dist, radius, dist <= radius,
                                   false, ""});
        }
        const auto sched = theoretical_schedule(s, mu_hat[l], static_cast<double>(spec.dims[l - 1].d));
        rep.records.push_back({"B7", l, "accuracy ratio 25050*mu*s_Y^3/sqrt(d_l)", sched.ratio, 1.0, sched.decreasing,
                               false, "eps0 = " + std::to_string(sched.eps0)});
    }
    return rep;
}

} // namespace ds2p
