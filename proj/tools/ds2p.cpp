#include "config.hpp"

#include <ds2p/analysis.hpp>
#include <ds2p/deepfact.hpp>
#include <ds2p/genmodel.hpp>
#include <ds2p/io.hpp>
#include <ds2p/parallel.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ds2p;
using ds2p::cli::Settings;

namespace {

const std::set<std::string> model_keys = {"preset", "dims", "code_sparsity", "column_sparsities", "n",
                                          "code_law", "dict_law"};
const std::set<std::string> altmin_keys = {"eps0", "rho", "max_iterations", "threshold_const", "stop_err",
                                           "eps0_numerator", "sigma_convention", "last_level", "coding_method",
                                           "timing"};
const std::set<std::string> audit_keys = {"rip_trials", "delta", "mu", "mu_min", "rip_delta"};
const std::set<std::string> common_keys = {"seed", "threads", "out"};

std::set<std::string> keys(std::initializer_list<std::set<std::string>> groups, std::set<std::string> extra = {})
{
    std::set<std::string> out = common_keys;
    for (const auto& g : groups) out.insert(g.begin(), g.end());
    out.insert(extra.begin(), extra.end());
    return out;
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// "rademacher", "uniform_shell:LO:HI", "gaussian_truncated:CAP"
NonzeroLaw parse_law(const std::string& key, const std::string& text)
{
    const auto parts = Settings::split(text, ':');
    auto num = [&](std::size_t i) {
        try {
            return std::stod(parts.at(i));
        } catch (const std::exception&) {
            throw ParameterError("key '" + key + "': malformed law '" + text + "'");
        }
    };
    NonzeroLaw law;
    if (!parts.empty() && parts[0] == "rademacher" && parts.size() == 1) {
        law = NonzeroLaw::rademacher();
    } else if (!parts.empty() && parts[0] == "uniform_shell" && parts.size() == 3) {
        law = NonzeroLaw::uniform_shell(num(1), num(2));
    } else if (!parts.empty() && parts[0] == "gaussian_truncated" && parts.size() == 2) {
        law = NonzeroLaw::gaussian_truncated(num(1));
    } else {
        throw ParameterError("key '" + key + "': unknown law '" + text +
                             "' (rademacher, uniform_shell:LO:HI, gaussian_truncated:CAP)");
    }
    law.validate();
    return law;
}

struct ModelChoice
{
    DeepModelSpec spec;
    Index n = 0;
};

ModelChoice model_from(const Settings& s)
{
    ModelChoice m;
    const std::string preset = s.str("preset", "desk");
    if (preset == "desk") {
        m.spec = DeepModelSpec::desk_two_layer();
        m.n = 2000;
    } else if (preset == "full") {
        m.spec = DeepModelSpec::full_two_layer();
        m.n = 6400;
    } else if (preset == "shallow") {
        m.spec = DeepModelSpec::shallow(50, 100, 3);
        m.n = 1500;
    } else {
        throw ParameterError("unknown preset '" + preset + "' (desk, full, shallow)");
    }
    if (s.has("dims")) {
        // "d1xr1,d2xr2,..." from the layer nearest the codes outwards.
        m.spec.dims.clear();
        for (const auto& item : Settings::split(s.str("dims", ""), ',')) {
            const auto x = item.find('x');
            if (x == std::string::npos) throw ParameterError("key 'dims': expected DxR, got '" + item + "'");
            try {
                m.spec.dims.push_back({std::stol(item.substr(0, x)), std::stol(item.substr(x + 1))});
            } catch (const std::exception&) {
                throw ParameterError("key 'dims': expected DxR, got '" + item + "'");
            }
        }
        if (!s.has("column_sparsities")) {
            m.spec.column_sparsities.assign(m.spec.dims.size() - 1, m.spec.column_sparsities.empty()
                                                                        ? 3
                                                                        : m.spec.column_sparsities.front());
        }
    }
    m.spec.code_sparsity = s.integer("code_sparsity", m.spec.code_sparsity);
    if (s.has("column_sparsities")) {
        m.spec.column_sparsities.clear();
        for (long long v : s.integers("column_sparsities", {})) m.spec.column_sparsities.push_back(v);
    }
    if (s.has("code_law")) m.spec.code_law = parse_law("code_law", s.str("code_law", ""));
    if (s.has("dict_law")) m.spec.dict_law = parse_law("dict_law", s.str("dict_law", ""));
    m.n = s.integer("n", m.n);
    if (m.n < 1) throw ParameterError("key 'n' must be positive");
    m.spec.validate();
    return m;
}

struct RunChoice
{
    FactorizationConfig cfg;
    SigmaConvention sigma = SigmaConvention::from_first_layer;
    bool timing = false;
    std::vector<std::pair<std::string, std::string>> pairs;
};

RunChoice run_from(const Settings& s)
{
    RunChoice rc;
    auto& a = rc.cfg.altmin;
    a.eps0 = s.real("eps0", a.eps0);
    a.rho = s.real("rho", a.rho);
    const long long iters = s.integer("max_iterations", static_cast<long long>(a.max_iterations));
    if (iters < 1) throw ParameterError("key 'max_iterations' must be at least 1");
    a.max_iterations = static_cast<std::size_t>(iters);
    a.threshold_const = s.real("threshold_const", a.threshold_const);
    a.stop_err = s.real("stop_err", a.stop_err);
    const std::string method = s.str("coding_method", "homotopy");
    if (method == "homotopy") {
        a.coding.method = CodingMethod::homotopy;
    } else if (method == "bisection") {
        a.coding.method = CodingMethod::bisection;
    } else {
        throw ParameterError("unknown coding_method '" + method + "' (homotopy, bisection)");
    }
    a.validate();
    // An explicit eps0 disables the per-stage rule unless both are given.
    rc.cfg.eps0_numerator = s.real("eps0_numerator", s.has("eps0") ? 0.0 : rc.cfg.eps0_numerator);
    if (rc.cfg.eps0_numerator < 0.0) throw ParameterError("key 'eps0_numerator' must be non-negative");
    const long long last = s.integer("last_level", 0);
    if (last < 0) throw ParameterError("key 'last_level' must be non-negative");
    rc.cfg.last_level = static_cast<std::size_t>(last);
    rc.sigma = parse_sigma_convention(s.str("sigma_convention", "from_first_layer"));
    rc.timing = s.boolean("timing", false);
    rc.pairs = {{"eps0", fmt(a.eps0)},
                {"eps0_numerator", fmt(rc.cfg.eps0_numerator)},
                {"rho", fmt(a.rho)},
                {"max_iterations", std::to_string(a.max_iterations)},
                {"threshold_const", fmt(a.threshold_const)},
                {"stop_err", fmt(a.stop_err)},
                {"coding_method", method},
                {"sigma_convention", to_string(rc.sigma)},
                {"last_level", std::to_string(rc.cfg.last_level)}};
    return rc;
}

AuditOptions audit_from(const Settings& s, std::uint64_t seed, SigmaConvention sigma)
{
    AuditOptions opt;
    const long long trials = s.integer("rip_trials", static_cast<long long>(opt.rip_trials));
    if (trials < 1) throw ParameterError("key 'rip_trials' must be positive");
    opt.rip_trials = static_cast<std::size_t>(trials);
    opt.delta = s.real("delta", opt.delta);
    opt.mu = s.real("mu", opt.mu);
    opt.mu_min = s.real("mu_min", opt.mu_min);
    if (s.has("rip_delta")) opt.rip_delta = s.real("rip_delta", 0.0);
    opt.seed = seed;
    opt.sigma = sigma;
    return opt;
}

std::vector<FactorMode> modes_from(const Settings& s)
{
    const std::string m = s.str("mode", "both");
    if (m == "both") return {FactorMode::forward, FactorMode::backward};
    return {parse_factor_mode(m)};
}

double alpha_from(const Settings& s)
{
    if (s.has("alpha") && s.has("snr_db")) throw ParameterError("give either 'alpha' or 'snr_db', not both");
    const double alpha = s.has("alpha") ? s.real("alpha", 0.0) : alpha_from_snr_db(s.real("snr_db", 6.0));
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("initialization noise must be non-negative");
    return alpha;
}

AuditReport run_audit(const DeepModelInstance& inst, FactorMode mode, const AuditOptions& opt,
                      const std::vector<Matrix>* inits)
{
    return mode == FactorMode::forward ? audit_assumptions_forward(inst, opt, inits)
                                       : audit_assumptions_backward(inst, opt, inits);
}

void print_report(const FactorizationReport& rep)
{
    for (const auto& st : rep.stages) {
        std::cout << "  " << to_string(rep.mode) << " stage " << st.level << ": " << st.dictionary_name
                  << " err " << short_fmt(st.dictionary_err) << ", " << st.codes_name << " err "
                  << short_fmt(st.codes_err) << " (" << st.trace.size() << " iterations, eps0 "
                  << short_fmt(st.eps0) << ")\n";
    }
}

struct Context
{
    Settings settings;
    std::uint64_t seed = 1;
    fs::path out = "ds2p_out";
};

// Runs one factorization; on abort the partial report is saved before rethrowing.
FactorizationReport run_factorization(const DeepModelInstance& inst, FactorMode mode, const RunChoice& rc,
                                      double alpha, std::uint64_t init_seed, const std::vector<Matrix>& inits,
                                      const fs::path& dir, const AuditReport* audit)
{
    auto fill = [&](FactorizationReport& rep) {
        rep.data_seed = inst.seed;
        rep.init_seed = init_seed;
        rep.init_snr_db = snr_db_from_alpha(alpha);
        rep.config = rc.pairs;
    };
    const auto ledger = sparsity_levels(inst.spec, rc.sigma);
    try {
        auto rep = factorize(mode, inst.observations, inits, ledger, rc.cfg, &inst);
        fill(rep);
        save_report(dir, rep, audit, rc.timing);
        return rep;
    } catch (const FactorizationError& e) {
        auto partial = e.partial();
        fill(partial);
        save_report(dir, partial, audit, rc.timing);
        throw;
    }
}

int cmd_generate(const Context& ctx)
{
    ctx.settings.reject_unknown(keys({model_keys}), "generate");
    const auto m = model_from(ctx.settings);
    const auto inst = synthesize(m.spec, m.n, ctx.seed);
    save_instance(ctx.out, inst);
    std::cout << "generated " << m.spec.layers() << "-layer instance, n = " << m.n << ", seed = " << ctx.seed
              << " -> " << ctx.out.string() << "\n";
    return 0;
}

int cmd_factorize(const Context& ctx)
{
    const auto& s = ctx.settings;
    s.reject_unknown(keys({altmin_keys, audit_keys}, {"instance", "mode", "snr_db", "alpha", "init_seed"}),
                     "factorize");
    const auto inst = load_instance(s.required("instance"));
    const auto rc = run_from(s);
    const double alpha = alpha_from(s);
    const std::uint64_t init_seed = s.unsigned_integer("init_seed", ctx.seed);
    const auto opt = audit_from(s, ctx.seed, rc.sigma);
    const auto modes = modes_from(s);
    for (const auto mode : modes) {
        const auto inits = initial_dictionaries(inst, mode, alpha, init_seed);
        const auto audit = run_audit(inst, mode, opt, &inits);
        const fs::path dir = modes.size() > 1 ? ctx.out / to_string(mode) : ctx.out;
        const auto rep = run_factorization(inst, mode, rc, alpha, init_seed, inits, dir, &audit);
        print_report(rep);
    }
    return 0;
}

int cmd_snr_sweep(const Context& ctx)
{
    const auto& s = ctx.settings;
    s.reject_unknown(keys({altmin_keys}, {"instance", "mode", "snr_grid", "seeds"}), "snr-sweep");
    const auto inst = load_instance(s.required("instance"));
    const auto rc = run_from(s);
    const auto grid = s.reals("snr_grid", {-3.0, 0.0, 3.0, 6.0, 9.0});
    const auto seeds = s.integers("seeds", {static_cast<long long>(ctx.seed)});
    const auto modes = modes_from(s);
    const auto ledger = sparsity_levels(inst.spec, rc.sigma);
    const std::size_t layers = inst.spec.layers();

    std::ostringstream csv;
    csv << "snr_db,algo,stage,final_err,seed\n";
    bool aborted = false;
    for (const double snr : grid) {
        const double alpha = alpha_from_snr_db(snr);
        for (const auto mode : modes) {
            // Reported factors: forward A1->L..A_L, backward A_L..A1.
            std::vector<std::string> names;
            for (std::size_t k = 0; k < layers; ++k) {
                names.push_back(mode == FactorMode::forward ? product_name(k + 1, layers)
                                                            : "A" + std::to_string(layers - k));
            }
            for (const long long seed : seeds) {
                if (seed < 0) throw ParameterError("key 'seeds' must be non-negative");
                const auto inits = initial_dictionaries(inst, mode, alpha, static_cast<std::uint64_t>(seed));
                FactorizationReport rep;
                try {
                    rep = factorize(mode, inst.observations, inits, ledger, rc.cfg, &inst);
                } catch (const FactorizationError& e) {
                    std::cerr << "snr " << snr << " " << to_string(mode) << " seed " << seed
                              << ": aborted: " << e.what() << "\n";
                    rep = e.partial();
                    aborted = true;
                }
                for (const auto& name : names) {
                    const auto err = rep.error_of(name);
                    csv << fmt(snr) << ',' << to_string(mode) << ',' << name << ','
                        << (err && std::isfinite(*err) ? fmt(*err) : "nan") << ',' << seed << '\n';
                }
                std::cout << "snr " << snr << " dB " << to_string(mode) << " seed " << seed << ":";
                for (const auto& name : names) {
                    const auto err = rep.error_of(name);
                    std::cout << " " << name << " " << (err ? short_fmt(*err) : "nan");
                }
                std::cout << "\n";
            }
        }
    }
    atomic_write(ctx.out / "snr_sweep.csv", csv.str());
    return aborted ? 1 : 0;
}

int cmd_audit(const Context& ctx)
{
    const auto& s = ctx.settings;
    s.reject_unknown(keys({audit_keys}, {"instance", "mode", "sigma_convention", "snr_db", "alpha", "init_seed"}),
                     "audit");
    const auto inst = load_instance(s.required("instance"));
    const auto sigma = parse_sigma_convention(s.str("sigma_convention", "from_first_layer"));
    const auto opt = audit_from(s, ctx.seed, sigma);
    const double alpha = alpha_from(s);
    const std::uint64_t init_seed = s.unsigned_integer("init_seed", ctx.seed);
    for (const auto mode : modes_from(s)) {
        const auto inits = initial_dictionaries(inst, mode, alpha, init_seed);
        const auto rep = run_audit(inst, mode, opt, &inits);
        write_json(ctx.out / ("audit_" + to_string(mode) + ".json"), audit_to_json(rep));
        const auto failed = rep.failures();
        std::cout << to_string(mode) << ": " << rep.records.size() << " records, " << failed.size() << " failed";
        for (const auto* r : failed) std::cout << " " << r->id << "/" << r->layer;
        std::cout << "\n";
    }
    return 0;
}

int cmd_rip(const Context& ctx)
{
    const auto& s = ctx.settings;
    s.reject_unknown(keys({}, {"matrix", "order", "trials", "normalize"}), "rip");
    Matrix a = read_matrix(s.required("matrix"));
    if (s.boolean("normalize", false)) a = column_normalize(a);
    const long long order = s.integer("order", 0);
    if (order < 1) throw ParameterError("key 'order' must be a positive integer");
    const long long trials = s.integer("trials", 2000);
    if (trials < 1) throw ParameterError("key 'trials' must be positive");
    const auto est = rip_constant_estimate(a, order, static_cast<std::size_t>(trials), Rng(ctx.seed));
    nlohmann::json j = {{"order", est.order},
                        {"delta_hat", est.delta_hat},
                        {"trials", est.trials},
                        {"exhaustive", est.exhaustive},
                        {"lower_bound", est.lower_bound()},
                        {"worst_support", est.worst_support.indices()},
                        {"sigma_min", est.sigma_min},
                        {"sigma_max", est.sigma_max},
                        {"seed", ctx.seed}};
    write_json(ctx.out / "rip.json", j);
    std::cout << "delta_" << est.order << " " << (est.exhaustive ? "= " : ">= ") << short_fmt(est.delta_hat)
              << " over " << est.trials << " supports\n";
    return 0;
}

int cmd_coupon(const Context& ctx)
{
    const auto& s = ctx.settings;
    s.reject_unknown(keys({}, {"r", "s", "trials"}), "coupon");
    const long long r = s.integer("r", 0);
    const long long sp = s.integer("s", 1);
    const long long trials = s.integer("trials", 1000);
    if (r < 1 || sp < 1 || sp > r) throw ParameterError("coupon: need 1 <= s <= r");
    if (trials < 1) throw ParameterError("key 'trials' must be positive");
    const auto est = coupon_collector_trials(r, sp, static_cast<std::size_t>(trials), Rng(ctx.seed));
    double harmonic = 0.0;
    for (long long k = 1; k <= r; ++k) harmonic += 1.0 / static_cast<double>(k);
    const double reference = static_cast<double>(r) / static_cast<double>(sp) * std::log(static_cast<double>(r));
    nlohmann::json j = {{"r", r},
                        {"s", sp},
                        {"trials", est.trials},
                        {"mean_draws", est.mean_draws},
                        {"stderr_draws", est.stderr_draws},
                        {"r_harmonic", static_cast<double>(r) * harmonic},
                        {"r_over_s_log_r", reference},
                        {"seed", ctx.seed}};
    write_json(ctx.out / "coupon.json", j);
    std::cout << "mean draws " << short_fmt(est.mean_draws) << " +- " << short_fmt(est.stderr_draws)
              << " (r/s ln r = " << short_fmt(reference) << ")\n";
    return 0;
}

int cmd_experiment_recovery(const Context& ctx)
{
    const auto& s = ctx.settings;
    s.reject_unknown(keys({model_keys, altmin_keys, audit_keys}, {"mode", "snr_db", "alpha", "init_seed"}),
                     "experiment-recovery");
    const auto m = model_from(s);
    const auto rc = run_from(s);
    const double alpha = alpha_from(s);
    const std::uint64_t init_seed = s.unsigned_integer("init_seed", ctx.seed);
    const auto inst = synthesize(m.spec, m.n, ctx.seed);
    save_instance(ctx.out / "instance", inst);
    const auto opt = audit_from(s, ctx.seed, rc.sigma);

    std::ostringstream csv;
    csv << "algo,stage,iter,eps_t,err\n";
    int status = 0;
    for (const auto mode : modes_from(s)) {
        const auto inits = initial_dictionaries(inst, mode, alpha, init_seed);
        const auto audit = run_audit(inst, mode, opt, &inits);
        FactorizationReport rep;
        try {
            rep = run_factorization(inst, mode, rc, alpha, init_seed, inits, ctx.out / to_string(mode), &audit);
        } catch (const FactorizationError& e) {
            std::cerr << to_string(mode) << ": aborted: " << e.what() << "\n";
            rep = e.partial();
            status = 1;
        }
        for (const auto& st : rep.stages) {
            for (const auto& it : st.trace.iterations) {
                csv << to_string(mode) << ',' << st.dictionary_name << ',' << it.iter << ',' << fmt(it.eps) << ','
                    << (std::isnan(it.err) ? "nan" : fmt(it.err)) << '\n';
            }
        }
        print_report(rep);
    }
    atomic_write(ctx.out / "recovery.csv", csv.str());
    return status;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Deep sparse coding: synthetic models, layer-wise factorization and assumption audits"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    bool paper_scale = false;
    std::vector<std::string> assignments;

    app.add_option("--config", config_path, "flat key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed");
    app.add_option("--threads", threads, "worker threads (0 = hardware)");
    app.add_option("--out", out, "output directory");
    app.add_option("--mode", mode, "factorization mode")->check(CLI::IsMember({"forward", "backward", "both"}));
    app.add_flag("--paper-scale", paper_scale, "use the full-size two-layer model");
    app.add_option("--set", assignments, "override a configuration key (KEY=VALUE)");

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"generate", "synthesize a deep sparse instance"},
        {"factorize", "run forward/backward factorization on an instance"},
        {"snr-sweep", "final errors over initialization SNRs and seeds"},
        {"audit", "measure the model assumptions on an instance"},
        {"rip", "sampled restricted-isometry estimate of a matrix"},
        {"coupon", "coupon-collector draws for s-subsets"},
        {"experiment-recovery", "generate, factorize in both modes and record error curves"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        Context ctx;
        if (!config_path.empty()) ctx.settings = Settings::from_file(config_path);
        for (const auto& kv : assignments) ctx.settings.set_assignment(kv);
        if (seed) ctx.settings.set("seed", std::to_string(*seed));
        if (threads) ctx.settings.set("threads", std::to_string(*threads));
        if (out) ctx.settings.set("out", *out);
        if (mode) ctx.settings.set("mode", *mode);
        if (paper_scale) ctx.settings.set("preset", "full");

        ctx.seed = ctx.settings.unsigned_integer("seed", 1);
        set_threads(static_cast<unsigned>(ctx.settings.unsigned_integer("threads", 0)));
        ctx.out = ctx.settings.str("out", "ds2p_out");

        if (command == "generate") return cmd_generate(ctx);
        if (command == "factorize") return cmd_factorize(ctx);
        if (command == "snr-sweep") return cmd_snr_sweep(ctx);
        if (command == "audit") return cmd_audit(ctx);
        if (command == "rip") return cmd_rip(ctx);
        if (command == "coupon") return cmd_coupon(ctx);
        return cmd_experiment_recovery(ctx);
    } catch (const ParameterError& e) {
        std::cerr << "ds2p " << command << ": " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "ds2p " << command << ": " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "ds2p " << command << ": malformed file: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "ds2p " << command << ": " << e.what() << "\n";
        return 2;
    } catch (const ComputeError& e) {
        std::cerr << "ds2p " << command << ": aborted: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ds2p " << command << ": " << e.what() << "\n";
        return 1;
    }
}
