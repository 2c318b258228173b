#pragma once
#include <ds2p/deepfact.hpp>
#include <ds2p/genmodel.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include <json.hpp>

namespace ds2p {

namespace fs = std::filesystem;

class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char matrix_magic[8] = {'D', 'S', '2', 'P', 'M', 'A', 'T', '1'};
inline constexpr const char* matrix_extension = ".ds2pmat";

namespace detail {

template <class T>
void put_le(std::string& out, T value)
{
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const char* p)
{
    static_assert(sizeof(T) == 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

} // namespace detail

// Writes `bytes` to a sibling temporary file and renames it over `path`.
inline void atomic_write(const fs::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.flush();
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

inline std::string read_file(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// DS2PMAT1: magic, rows and cols as u64 LE, then row-major f64 LE.
inline std::string encode_matrix(const Matrix& m)
{
    std::string out(matrix_magic, 8);
    out.reserve(24 + 8 * static_cast<std::size_t>(m.size()));
    detail::put_le(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_le(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) detail::put_le(out, m(i, j));
    }
    return out;
}

inline Matrix decode_matrix(const std::string& bytes, const std::string& origin = "matrix")
{
    if (bytes.size() < 24 || std::memcmp(bytes.data(), matrix_magic, 8) != 0) {
        throw IoError(origin + ": not a DS2PMAT1 file");
    }
    const auto rows = detail::get_le<std::uint64_t>(bytes.data() + 8);
    const auto cols = detail::get_le<std::uint64_t>(bytes.data() + 16);
    if (rows == 0 || cols == 0) throw IoError(origin + ": empty dimensions");
    if (rows > (bytes.size() - 24) / 8 / cols || bytes.size() != 24 + 8 * rows * cols) {
        throw IoError(origin + ": size does not match header");
    }
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    const char* p = bytes.data() + 24;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j, p += 8) m(i, j) = detail::get_le<double>(p);
    }
    if (!all_finite(m)) throw IoError(origin + ": non-finite entries");
    return m;
}

inline void write_matrix(const fs::path& path, const Matrix& m) { atomic_write(path, encode_matrix(m)); }

inline Matrix read_matrix(const fs::path& path) { return decode_matrix(read_file(path), path.string()); }

// Pretty-printed JSON with a trailing newline.
inline void write_json(const fs::path& path, const nlohmann::json& j) { atomic_write(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path)
{
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Instances

inline nlohmann::json law_to_json(const NonzeroLaw& law)
{
    return {{"kind", law.name()}, {"lo", law.lo}, {"hi", law.hi}};
}

inline NonzeroLaw law_from_json(const nlohmann::json& j)
{
    const std::string kind = j.at("kind").get<std::string>();
    NonzeroLaw law;
    if (kind == "rademacher") {
        law = NonzeroLaw::rademacher();
    } else if (kind == "uniform_shell") {
        law = NonzeroLaw::uniform_shell(j.at("lo").get<double>(), j.at("hi").get<double>());
    } else if (kind == "gaussian_truncated") {
        law = NonzeroLaw::gaussian_truncated(j.at("hi").get<double>());
    } else {
        throw IoError("unknown nonzero law '" + kind + "'");
    }
    return law;
}

inline nlohmann::json spec_to_json(const DeepModelSpec& spec)
{
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : spec.dims) dims.push_back({d.d, d.r});
    nlohmann::json bounds = nlohmann::json::array();
    for (std::size_t l = 0; l < spec.layers(); ++l) bounds.push_back(spec.amplitude_bound(l));
    return {{"layers", spec.layers()},
            {"dims", dims},
            {"code_sparsity", spec.code_sparsity},
            {"column_sparsities", spec.column_sparsities},
            {"amplitude_bounds", bounds},
            {"code_law", law_to_json(spec.code_law)},
            {"dict_law", law_to_json(spec.dict_law)}};
}

inline DeepModelSpec spec_from_json(const nlohmann::json& j)
{
    DeepModelSpec spec;
    for (const auto& d : j.at("dims")) spec.dims.push_back({d.at(0).get<Index>(), d.at(1).get<Index>()});
    spec.code_sparsity = j.at("code_sparsity").get<Index>();
    spec.column_sparsities = j.at("column_sparsities").get<std::vector<Index>>();
    spec.amplitude_bounds = j.at("amplitude_bounds").get<std::vector<double>>();
    spec.code_law = law_from_json(j.at("code_law"));
    spec.dict_law = law_from_json(j.at("dict_law"));
    spec.validate();
    return spec;
}

/// Directory layout: manifest.json, A1..AL, X, Y1..Y(L−1), Y (DS2PMAT1).
inline void save_instance(const fs::path& dir, const DeepModelInstance& inst)
{
    fs::create_directories(dir);
    nlohmann::json files = nlohmann::json::object();
    auto put = [&](const std::string& name, const Matrix& m) {
        const std::string file = name + matrix_extension;
        write_matrix(dir / file, m);
        files[name] = {{"file", file}, {"rows", m.rows()}, {"cols", m.cols()}};
    };
    for (std::size_t l = 0; l < inst.dicts.size(); ++l) put("A" + std::to_string(l + 1), inst.dicts[l]);
    put("X", inst.codes);
    for (std::size_t l = 0; l < inst.intermediates.size(); ++l) put("Y" + std::to_string(l + 1), inst.intermediates[l]);
    put("Y", inst.observations);

    const nlohmann::json manifest = {{"format", "ds2p-instance"},
                                     {"version", 1},
                                     {"seed", inst.seed},
                                     {"n", inst.samples()},
                                     {"spec", spec_to_json(inst.spec)},
                                     {"layer_amplitude_bounds", inst.amplitude_bounds},
                                     {"files", files}};
    write_json(dir / "manifest.json", manifest);
}

inline DeepModelInstance load_instance(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw IoError("instance directory not found: " + dir.string());
    const auto manifest = read_json(dir / "manifest.json");
    if (manifest.value("format", "") != "ds2p-instance") {
        throw IoError(dir.string() + ": manifest is not a ds2p instance");
    }
    DeepModelInstance inst;
    try {
        inst.spec = spec_from_json(manifest.at("spec"));
        inst.seed = manifest.at("seed").get<std::uint64_t>();
        inst.amplitude_bounds = manifest.at("layer_amplitude_bounds").get<std::vector<double>>();
        const auto& files = manifest.at("files");
        auto get = [&](const std::string& name) {
            return read_matrix(dir / files.at(name).at("file").get<std::string>());
        };
        const std::size_t layers = inst.spec.layers();
        for (std::size_t l = 0; l < layers; ++l) inst.dicts.push_back(get("A" + std::to_string(l + 1)));
        inst.codes = get("X");
        for (std::size_t l = 1; l < layers; ++l) inst.intermediates.push_back(get("Y" + std::to_string(l)));
        inst.observations = get("Y");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(dir.string() + ": malformed manifest: " + e.what());
    }
    for (std::size_t l = 0; l < inst.dicts.size(); ++l) {
        const auto& dm = inst.spec.dims[l];
        if (inst.dicts[l].rows() != dm.d || inst.dicts[l].cols() != dm.r) {
            throw IoError(dir.string() + ": A" + std::to_string(l + 1) + " does not match the manifest dims");
        }
    }
    return inst;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json audit_to_json(const AuditReport& rep)
{
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : rep.records) {
        nlohmann::json j = {{"id", r.id},
                            {"layer", r.layer},
                            {"quantity", r.quantity},
                            {"measured", r.measured},
                            {"bound", r.bound},
                            {"constant_free", r.constant_free},
                            {"note", r.note}};
        j["passed"] = r.passed ? nlohmann::json(*r.passed) : nlohmann::json(nullptr);
        records.push_back(std::move(j));
    }
    nlohmann::json failed = nlohmann::json::array();
    for (const auto* r : rep.failures()) failed.push_back(r->id + "/" + std::to_string(r->layer));
    return {{"mode", to_string(rep.mode)}, {"records", records}, {"failed", failed}};
}

// File-name friendly factor name: "A1->2" becomes "A1_to_2".
inline std::string file_stem(const std::string& name)
{
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
        if (name.compare(i, 2, "->") == 0) {
            out += "_to_";
            ++i;
        } else {
            out += name[i];
        }
    }
    return out;
}

// Trace CSV; the seconds column is written as 0 unless `timing` is set so
// that reruns are byte-identical.
inline std::string trace_csv(const AltMinTrace& trace, bool timing)
{
    if (timing) return trace.csv();
    AltMinTrace copy = trace;
    for (auto& it : copy.iterations) it.seconds = 0.0;
    return copy.csv();
}

inline nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

/// Run directory: manifest.json, stage matrices, stage trace CSVs and,
/// when given, audit.json.
inline void save_report(const fs::path& dir, const FactorizationReport& rep, const AuditReport* audit = nullptr,
                        bool timing = false)
{
    fs::create_directories(dir);
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t k = 0; k < rep.stages.size(); ++k) {
        const auto& st = rep.stages[k];
        const std::string prefix = "stage" + std::to_string(k + 1) + "_";
        nlohmann::json j = {{"level", st.level},
                            {"sparsity", st.sparsity},
                            {"input_scale", st.input_scale},
                            {"eps0", st.eps0},
                            {"iterations", st.trace.size()},
                            {"dictionary", st.dictionary_name},
                            {"codes", st.codes_name},
                            {"dictionary_err", number_or_null(st.dictionary_err)},
                            {"codes_err", number_or_null(st.codes_err)},
                            {"codes_metric", st.codes_are_dictionary ? "dict_error" : "relative_frobenius"}};
        if (st.dictionary.size() > 0) {
            const std::string f = prefix + file_stem(st.dictionary_name) + matrix_extension;
            write_matrix(dir / f, st.dictionary);
            j["dictionary_file"] = f;
        }
        if (st.codes.size() > 0) {
            const std::string f = prefix + file_stem(st.codes_name) + matrix_extension;
            write_matrix(dir / f, st.codes);
            j["codes_file"] = f;
        }
        const std::string tf = prefix + "trace.csv";
        atomic_write(dir / tf, trace_csv(st.trace, timing));
        j["trace_file"] = tf;
        stages.push_back(std::move(j));
    }
    nlohmann::json config = nlohmann::json::object();
    for (const auto& [k, v] : rep.config) config[k] = v;
    nlohmann::json manifest = {{"format", "ds2p-factorization"},
                               {"version", 1},
                               {"mode", to_string(rep.mode)},
                               {"layers", rep.layers},
                               {"data_seed", rep.data_seed},
                               {"init_seed", rep.init_seed},
                               {"init_snr_db", number_or_null(rep.init_snr_db)},
                               {"complete", rep.stages.size() > 0 && rep.stages.back().dictionary.size() > 0},
                               {"config", config},
                               {"stages", stages}};
    if (audit) {
        write_json(dir / "audit.json", audit_to_json(*audit));
        manifest["audit_file"] = "audit.json";
    }
    write_json(dir / "manifest.json", manifest);
}

} // namespace ds2p
