#pragma once

// Checkpoints, model cache, CSV tables and run manifests. Exact integers are
// written as decimal strings, reals as shortest round-trip decimals.
//
// Cache directory layout:
//   cycles/gcyc_p{p}.bin   models/{s}_{p0}.json   runs/{timestamp}.manifest.json

#include <gmpxx.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sievedyn/constellation.hpp"
#include "sievedyn/cycle_file.hpp"
#include "sievedyn/errors.hpp"
#include "sievedyn/legendre.hpp"
#include "sievedyn/popmodel.hpp"
#include "sievedyn/population.hpp"
#include "sievedyn/survival.hpp"

namespace sievedyn {

using json = nlohmann::ordered_json;

template <class T>
std::string shortest(T x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw InvariantError("shortest: to_chars failed");
    return std::string(buf, end);
}

inline long double parse_real(const std::string& s) {
    long double x = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || end != s.data() + s.size()) throw FormatError("malformed real '" + s + "'");
    return x;
}

inline mpz_class parse_integer(const std::string& s) {
    bool ok = !s.empty();
    for (std::size_t i = 0; i < s.size() && ok; ++i) ok = (s[i] >= '0' && s[i] <= '9') || (i == 0 && s[i] == '-' && s.size() > 1);
    if (!ok) throw FormatError("malformed decimal integer '" + s + "'");
    return mpz_class(s, 10);
}

namespace detail {

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PreconditionError("cannot write " + tmp);
        out << text;
        if (!out) throw PreconditionError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("bad JSON in " + where + ": " + e.what());
    }
}

inline Constellation constellation_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw FormatError("constellation must be a nonempty array of gaps");
    std::vector<std::uint32_t> gaps;
    for (const auto& g : j) {
        if (!g.is_number_unsigned()) throw FormatError("constellation gaps must be unsigned integers");
        gaps.push_back(g.get<std::uint32_t>());
    }
    try {
        return Constellation(std::move(gaps));
    } catch (const PreconditionError& e) {
        throw FormatError(e.what());
    }
}

inline json constellation_to_json(const Constellation& s) {
    json j = json::array();
    for (auto g : s.gaps()) j.push_back(g);
    return j;
}

}  // namespace detail

// ---- populations

inline json to_json(const PopulationVector& v) {
    json j;
    j["s"] = detail::constellation_to_json(v.s);
    j["p"] = v.p;
    json n = json::array();
    for (const auto& x : v.n) n.push_back(x.get_str());
    j["n"] = std::move(n);
    if (!v.exact) j["exact"] = false;
    return j;
}

inline PopulationVector population_from_json(const json& j) {
    try {
        PopulationVector v{detail::constellation_from_json(j.at("s")), j.at("p").get<u64>(), {}, j.value("exact", true)};
        for (const auto& x : j.at("n")) {
            if (!x.is_string()) throw FormatError("population counts must be decimal strings");
            v.n.push_back(parse_integer(x.get<std::string>()));
        }
        if (v.n.size() != v.s.max_driving_length() - v.s.length() + 1)
            throw FormatError("population vector length does not match |s|/2 - J + 1");
        return v;
    } catch (const json::exception& e) {
        throw FormatError(std::string("population checkpoint: ") + e.what());
    }
}

inline void save_populations(const std::filesystem::path& path, const std::vector<PopulationVector>& vs) {
    json arr = json::array();
    for (const auto& v : vs) arr.push_back(to_json(v));
    detail::write_text_atomic(path, arr.dump(2) + "\n");
}

inline std::vector<PopulationVector> load_populations(const std::filesystem::path& path) {
    const json j = detail::parse_json(detail::read_text(path), path.string());
    std::vector<PopulationVector> out;
    if (j.is_object())
        out.push_back(population_from_json(j));
    else if (j.is_array())
        for (const auto& e : j) out.push_back(population_from_json(e));
    else
        throw FormatError("population checkpoint must be an object or array");
    return out;
}

// ---- models

inline json to_json(const ModelCoefficients& m) {
    json j;
    j["p0"] = m.p0;
    j["s"] = detail::constellation_to_json(m.s);
    j["w_inf"] = shortest(m.w_inf);
    json l = json::array();
    for (auto x : m.l) l.push_back(shortest(x));
    j["l"] = std::move(l);
    j["stages_used"] = m.stages_used;
    j["residual"] = shortest(m.residual);
    j["p_start"] = m.p_start;
    j["lambda_convention"] = m.lambda_convention;
    return j;
}

inline ModelCoefficients model_from_json(const json& j) {
    try {
        ModelCoefficients m{detail::constellation_from_json(j.at("s")), j.at("p0").get<u64>(), 0, 0, {}, {}, 0,
                            kLambdaConvention};
        m.p_start = j.value("p_start", next_prime(m.p0));
        m.w_inf = parse_real(j.at("w_inf").get<std::string>());
        for (const auto& x : j.at("l")) m.l.push_back(parse_real(x.get<std::string>()));
        m.stages_used = j.at("stages_used").get<std::vector<u64>>();
        m.residual = parse_real(j.at("residual").get<std::string>());
        m.lambda_convention = j.value("lambda_convention", std::string(kLambdaConvention));
        if (m.l.size() != m.s.max_driving_length() - m.s.length())
            throw FormatError("model has the wrong number of l coefficients");
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file: ") + e.what());
    }
}

inline void save_model(const std::filesystem::path& path, const ModelCoefficients& m) {
    detail::write_text_atomic(path, to_json(m).dump(2) + "\n");
}

inline ModelCoefficients load_model(const std::filesystem::path& path) {
    return model_from_json(detail::parse_json(detail::read_text(path), path.string()));
}

inline std::filesystem::path model_path(const std::filesystem::path& cache_dir, const Constellation& s, u64 p0) {
    return cache_dir / "models" / (s.key() + "_" + std::to_string(p0) + ".json");
}

// ---- CSV

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
};

inline void emit_csv(const CsvTable& t, const std::filesystem::path& path) {
    for (const auto& r : t.rows)
        if (r.size() != t.header.size())
            throw PreconditionError("emit_csv: row has " + std::to_string(r.size()) + " fields, schema has " +
                                    std::to_string(t.header.size()));
    detail::write_text_atomic(path, t.str());
}

inline std::string csv_real(long double x) { return shortest(static_cast<double>(x)); }

inline CsvTable survival_table(std::vector<SurvivalRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return a.interval.p_k != b.interval.p_k ? a.interval.p_k < b.interval.p_k : a.s < b.s;
    });
    CsvTable t{{"p_k", "p_next", "g3", "s", "expected", "eta_expected", "observed", "eta_observed"}, {}};
    for (const auto& r : records)
        t.rows.push_back({std::to_string(r.interval.p_k), std::to_string(r.interval.p_next),
                          std::to_string(r.interval.g3), r.s.key(), csv_real(r.expected), csv_real(r.eta_expected),
                          std::to_string(r.observed), csv_real(r.eta_observed)});
    return t;
}

inline CsvTable summary_table(const std::vector<SampleSummary>& summary) {
    CsvTable t{{"s", "n_samples", "mean_eta_obs", "std_eta_obs", "mean_eta_model"}, {}};
    for (const auto& s : summary)
        t.rows.push_back({s.s.key(), std::to_string(s.n_samples), csv_real(s.mean_eta_obs), csv_real(s.std_eta_obs),
                          csv_real(s.mean_eta_model)});
    return t;
}

inline CsvTable constraint_table(const std::vector<std::vector<ConstraintPoint>>& chart) {
    CsvTable t{{"p_k", "g2", "g3", "J", "f", "delta", "satisfied"}, {}};
    for (const auto& row : chart)
        for (const auto& c : row)
            t.rows.push_back({std::to_string(c.p_k), std::to_string(c.g2), std::to_string(c.g3), std::to_string(c.J),
                              csv_real(c.f), c.delta ? csv_real(*c.delta) : "", c.satisfied ? "1" : "0"});
    return t;
}

// ---- threat reports

inline json to_json(const ThreatReport& r) {
    json j;
    j["p_k"] = r.p_k;
    j["g3"] = r.g3;
    j["gmax_interval"] = r.gmax_interval;
    j["per_quadratic"] = r.per_quadratic;
    json threats = json::array();
    for (const auto& t : r.threats) {
        json e;
        e["gap"] = t.gap;
        e["at"] = t.at;
        e["class"] = to_string(t.cls);
        if (t.covered_n) e["covered_n"] = *t.covered_n;
        e["severity"] = to_string(t.severity);
        e["position"] = shortest(static_cast<double>(t.position));
        threats.push_back(std::move(e));
    }
    j["threats"] = std::move(threats);
    return j;
}

// ---- run manifests

// 64-bit FNV-1a over a file's bytes.
inline std::string fnv1a_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> parameters;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
    std::vector<std::string> outputs;
    std::string started;
    std::string finished;

    void add_input(const std::filesystem::path& p) { inputs.emplace_back(p.string(), fnv1a_file(p)); }

    json to_json() const {
        json j;
        j["command"] = command;
        j["parameters"] = parameters;
        json in = json::array();
        for (const auto& [path, digest] : inputs) in.push_back({{"path", path}, {"fnv1a64", digest}});
        j["inputs"] = std::move(in);
        j["outputs"] = outputs;
        j["started"] = started;
        j["finished"] = finished;
        return j;
    }

    // Written under the cache directory, never next to the outputs, so
    // repeated runs leave the output directory byte-identical.
    std::filesystem::path write(const std::filesystem::path& cache_dir) const {
        const auto dir = cache_dir / "runs";
        std::filesystem::create_directories(dir);
        auto path = dir / (started + ".manifest.json");
        for (int i = 1; std::filesystem::exists(path); ++i)
            path = dir / (started + "-" + std::to_string(i) + ".manifest.json");
        detail::write_text_atomic(path, to_json().dump(2) + "\n");
        return path;
    }
};

}  // namespace sievedyn
