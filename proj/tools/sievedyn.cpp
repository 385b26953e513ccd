// sievedyn: command-line front end. Each subcommand writes its data to --out
// (or stdout) and records a run manifest under --cache-dir.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sievedyn/cycle_cache.hpp"
#include "sievedyn/legendre.hpp"
#include "sievedyn/popmodel.hpp"
#include "sievedyn/store.hpp"
#include "sievedyn/survival.hpp"

namespace fs = std::filesystem;
using namespace sievedyn;

namespace {

struct Config {
    std::string cache_dir = ".sievedyn-cache";
    std::string out_dir;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    u64 cycle_budget = kDefaultCycleBudget;
    u64 sieve_budget = kDefaultSieveBudget;
    u64 prime_budget = kDefaultPrimeBudget;
    std::string format = "csv";
    bool no_cache = false;
};

class Run {
  public:
    Run(const Config& cfg, std::string command) : cfg_(cfg), cache_(cache_path(cfg), cfg.cycle_budget) {
        manifest_.command = std::move(command);
        manifest_.started = utc_timestamp(std::chrono::system_clock::now());
        manifest_.parameters["cycle_budget"] = std::to_string(cfg.cycle_budget);
        manifest_.parameters["sieve_budget"] = std::to_string(cfg.sieve_budget);
        manifest_.parameters["prime_budget"] = std::to_string(cfg.prime_budget);
        manifest_.parameters["format"] = cfg.format;
    }

    CycleCache& cache() { return cache_; }
    RunManifest& manifest() { return manifest_; }
    void param(const std::string& k, const std::string& v) { manifest_.parameters[k] = v; }

    // Writes `text` to --out/name, or to stdout without --out.
    void emit(const std::string& name, const std::string& text) {
        if (cfg_.out_dir.empty()) {
            std::cout << text;
            return;
        }
        const fs::path path = fs::path(cfg_.out_dir) / name;
        detail::write_text_atomic(path, text);
        manifest_.outputs.push_back(path.string());
    }

    void emit_table(const std::string& stem, const CsvTable& t) {
        if (cfg_.format == "json")
            emit(stem + ".json", table_json(t).dump(2) + "\n");
        else
            emit(stem + ".csv", t.str());
    }

    void finish() {
        if (!cache_path(cfg_)) return;
        for (const auto& f : cache_.files_used()) manifest_.add_input(f);
        manifest_.finished = utc_timestamp(std::chrono::system_clock::now());
        manifest_.write(cfg_.cache_dir);
    }

  private:
    static std::optional<fs::path> cache_path(const Config& cfg) {
        if (cfg.no_cache || cfg.cache_dir.empty()) return std::nullopt;
        return fs::path(cfg.cache_dir);
    }

    static json table_json(const CsvTable& t) {
        json arr = json::array();
        for (const auto& row : t.rows) {
            json obj = json::object();
            for (std::size_t i = 0; i < row.size(); ++i) obj[t.header[i]] = cell_json(row[i]);
            arr.push_back(std::move(obj));
        }
        return arr;
    }

    static json cell_json(const std::string& cell) {
        if (cell.empty()) return nullptr;
        std::int64_t iv = 0;
        if (auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), iv);
            ec == std::errc{} && p == cell.data() + cell.size())
            return iv;
        double dv = 0;
        if (auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), dv);
            ec == std::errc{} && p == cell.data() + cell.size())
            return dv;
        return cell;
    }

    const Config& cfg_;
    CycleCache cache_;
    RunManifest manifest_;
};

std::vector<Constellation> parse_targets(const std::vector<std::string>& items) {
    std::vector<Constellation> out;
    for (const auto& t : items) out.push_back(Constellation::parse(t));
    return out;
}

std::string join_keys(const std::vector<Constellation>& ts) {
    std::string s;
    for (const auto& t : ts) s += (s.empty() ? "" : " ") + t.key();
    return s;
}

// Cached model when present and readable, otherwise a fresh fit.
ModelCoefficients get_model(Run& run, const Config& cfg, const Constellation& s, u64 p0) {
    if (!cfg.no_cache && !cfg.cache_dir.empty()) {
        const auto path = model_path(cfg.cache_dir, s, p0);
        if (fs::exists(path)) {
            run.manifest().add_input(path);
            return load_model(path);
        }
        auto m = fit_coefficients(s, p0, run.cache());
        save_model(path, m);
        return m;
    }
    return fit_coefficients(s, p0, run.cache());
}

int cmd_build_cycle(const Config& cfg, u64 p) {
    Run run(cfg, "build-cycle");
    run.param("p", std::to_string(p));
    const GapCycle& c = run.cache().get(p);
    std::ostringstream os;
    os << "p=" << c.p() << " phi=" << c.size() << " span=" << c.span() << " max_gap=" << max_gap(c) << "\n";
    run.emit("cycle_p" + std::to_string(p) + ".txt", os.str());
    run.finish();
    return 0;
}

int cmd_model(const Config& cfg, const std::string& text, u64 p0, u64 rebase_to) {
    Run run(cfg, "model");
    const Constellation s = Constellation::parse(text);
    if (p0 == 0) p0 = default_model_stage(s);
    run.param("s", s.key());
    run.param("p0", std::to_string(p0));
    ModelCoefficients m = get_model(run, cfg, s, p0);
    if (rebase_to) {
        run.param("rebase", std::to_string(rebase_to));
        m = rebase(m, rebase_to);
    }
    if (cfg.format == "json") {
        run.emit("model_" + s.key() + "_" + std::to_string(m.p0) + ".json", to_json(m).dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << "s=" << s.key() << " p0=" << m.p0 << " p_start=" << m.p_start << "\n";
        os << "w_inf=" << shortest(m.w_inf) << "\n";
        for (std::size_t k = 0; k < m.l.size(); ++k) os << "l_" << k + 2 << "=" << shortest(m.l[k]) << "\n";
        os << "residual=" << shortest(static_cast<double>(m.residual)) << "\n";
        run.emit("model_" + s.key() + "_" + std::to_string(m.p0) + ".txt", os.str());
    }
    run.finish();
    return 0;
}

int cmd_eta(const Config& cfg, u64 p_k, const std::vector<std::string>& items) {
    Run run(cfg, "eta");
    const auto targets = parse_targets(items);
    run.param("p_k", std::to_string(p_k));
    run.param("targets", join_keys(targets));
    const auto eta = eta_table(p_k, targets, run.cache(), cfg.prime_budget);
    CsvTable t{{"p_k", "s", "eta"}, {}};
    for (std::size_t i = 0; i < targets.size(); ++i)
        t.rows.push_back({std::to_string(p_k), targets[i].key(), csv_real(eta[i])});
    run.emit_table("eta_" + std::to_string(p_k), t);
    run.finish();
    return 0;
}

int cmd_sample(const Config& cfg, u64 p_lo, u64 count, const std::vector<std::string>& items) {
    Run run(cfg, "sample");
    const auto targets = parse_targets(items);
    run.param("p_lo", std::to_string(p_lo));
    run.param("count", std::to_string(count));
    run.param("targets", join_keys(targets));
    const auto res = sample_run(p_lo, count, targets, run.cache(),
                                SampleOptions{cfg.threads, cfg.sieve_budget, cfg.prime_budget});
    run.emit_table("survival", survival_table(res.records));
    run.emit_table("summary", summary_table(res.summary));
    run.finish();
    return 0;
}

int cmd_fchart(const Config& cfg, u64 p_lo, u64 p_hi, unsigned j_max) {
    Run run(cfg, "fchart");
    run.param("p_lo", std::to_string(p_lo));
    run.param("p_hi", std::to_string(p_hi));
    run.param("J_max", std::to_string(j_max));
    run.emit_table("fchart", constraint_table(constraint_chart(p_lo, p_hi, j_max)));
    run.finish();
    return 0;
}

int cmd_crossing(const Config& cfg, unsigned ga, unsigned gb, u64 p0, u64 p_base) {
    Run run(cfg, "crossing");
    run.param("g_a", std::to_string(ga));
    run.param("g_b", std::to_string(gb));
    run.param("p0", std::to_string(p0));
    run.param("lambda_base", std::to_string(p_base));
    const Constellation a({ga}), b({gb});
    auto ma = get_model(run, cfg, a, p0), mb = get_model(run, cfg, b, p0);
    if (p_base > p0) {
        ma = rebase(ma, p_base);
        mb = rebase(mb, p_base);
    }
    const long double lam = crossing_lambda(ma, mb);
    json j;
    j["g_a"] = ga;
    j["g_b"] = gb;
    j["p0"] = p0;
    j["p_start"] = ma.p_start;
    j["lambda"] = shortest(static_cast<double>(lam));
    try {
        j["prime"] = prime_for_lambda(lam, ma.p_start, 1, cfg.prime_budget);
    } catch (const BudgetError&) {
        // past the prime budget: extrapolate with Mertens from the budget edge
        const u64 ref = prev_prime(cfg.prime_budget);
        const long double lp = log_prime_for_lambda_estimate(lam, ma.p_start, 1, ref);
        j["prime"] = nullptr;
        j["log_prime_estimate"] = shortest(static_cast<double>(lp));
        j["prime_estimate"] = shortest(static_cast<double>(std::exp(lp)));
    }
    if (cfg.format == "json") {
        run.emit("crossing_" + std::to_string(ga) + "_" + std::to_string(gb) + ".json", j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << "lambda=" << j["lambda"].get<std::string>();
        if (!j["prime"].is_null())
            os << " prime=" << j["prime"].get<u64>();
        else
            os << " prime~" << j["prime_estimate"].get<std::string>();
        os << "\n";
        run.emit("crossing_" + std::to_string(ga) + "_" + std::to_string(gb) + ".txt", os.str());
    }
    run.finish();
    return 0;
}

int cmd_legendre_scan(const Config& cfg, u64 p_lo, u64 p_hi) {
    Run run(cfg, "legendre scan");
    if (p_hi == 0) p_hi = p_lo;
    run.param("p_lo", std::to_string(p_lo));
    run.param("p_hi", std::to_string(p_hi));
    const auto reports = threat_scan_range(p_lo, p_hi, cfg.threads, cfg.sieve_budget);
    json out;
    if (reports.size() == 1) {
        out = to_json(reports[0]);
    } else {
        out = json::array();
        for (const auto& r : reports)
            if (!r.threats.empty()) out.push_back(to_json(r));
    }
    run.emit("threats_" + std::to_string(p_lo) + "_" + std::to_string(p_hi) + ".json", out.dump(2) + "\n");
    std::size_t n = 0;
    for (const auto& r : reports) n += r.threats.size();
    std::cerr << reports.size() << " intervals scanned, " << n << " threats\n";
    run.finish();
    return 0;
}

int cmd_legendre_verify(const Config& cfg, u64 n_lo, u64 n_hi) {
    Run run(cfg, "legendre verify");
    run.param("n_lo", std::to_string(n_lo));
    run.param("n_hi", std::to_string(n_hi));
    const auto v = legendre_verify(n_lo, n_hi, cfg.sieve_budget);
    json j;
    j["n_lo"] = n_lo;
    j["n_hi"] = n_hi;
    j["violations"] = v;
    run.emit("legendre_" + std::to_string(n_lo) + "_" + std::to_string(n_hi) + ".json", j.dump(2) + "\n");
    std::cerr << (v.empty() ? "no violations" : std::to_string(v.size()) + " violations") << "\n";
    run.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Eratosthenes sieve as a dynamic system: gap cycles, population models, survival sampling"};
    app.require_subcommand(1);
    Config cfg;
    app.add_option("--cache-dir", cfg.cache_dir, "cycle/model cache and run manifests")->capture_default_str();
    app.add_flag("--no-cache", cfg.no_cache, "keep everything in memory");
    app.add_option("--out", cfg.out_dir, "output directory (default: stdout)");
    app.add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--cycle-budget", cfg.cycle_budget, "max gaps in a built cycle")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--sieve-budget", cfg.sieve_budget, "max integers sieved per request")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--prime-budget", cfg.prime_budget, "largest prime stage walked")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--format", cfg.format, "table format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    std::function<int()> action;

    u64 cycle_p = 0;
    auto* build = app.add_subcommand("build-cycle", "build and cache G(p#)");
    build->add_option("p", cycle_p, "odd prime stage")->required();
    build->callback([&] { action = [&] { return cmd_build_cycle(cfg, cycle_p); }; });

    std::string model_s;
    u64 model_p0 = 0, model_rebase = 0;
    auto* model = app.add_subcommand("model", "fit the closed-form relative population model");
    model->add_option("s", model_s, "constellation, e.g. 6 or 2,4")->required();
    model->add_option("--p0", model_p0, "base stage (default: 17 for gaps, 13 otherwise)");
    model->add_option("--rebase", model_rebase, "re-express with this base stage");
    model->callback([&] { action = [&] { return cmd_model(cfg, model_s, model_p0, model_rebase); }; });

    u64 eta_pk = 0;
    std::vector<std::string> eta_targets;
    auto* eta = app.add_subcommand("eta", "model quadratic densities at stage p_k");
    eta->add_option("p_k", eta_pk, "prime stage")->required();
    eta->add_option("targets", eta_targets, "constellations")->required();
    eta->callback([&] { action = [&] { return cmd_eta(cfg, eta_pk, eta_targets); }; });

    u64 sample_lo = 0, sample_count = 0;
    std::vector<std::string> sample_targets;
    auto* sample = app.add_subcommand("sample", "observed vs expected counts over intervals of survival");
    sample->add_option("p_lo", sample_lo, "first interval starts at the first prime >= p_lo")->required();
    sample->add_option("count", sample_count, "number of consecutive intervals")->required();
    sample->add_option("targets", sample_targets, "constellations")->required();
    sample->callback([&] { action = [&] { return cmd_sample(cfg, sample_lo, sample_count, sample_targets); }; });

    u64 fc_lo = 0, fc_hi = 0;
    unsigned fc_j = 0;
    auto* fchart = app.add_subcommand("fchart", "sign chart of f(p_k, J)");
    fchart->add_option("p_lo", fc_lo)->required();
    fchart->add_option("p_hi", fc_hi)->required();
    fchart->add_option("J_max", fc_j)->required()->check(CLI::PositiveNumber);
    fchart->callback([&] { action = [&] { return cmd_fchart(cfg, fc_lo, fc_hi, fc_j); }; });

    unsigned cr_a = 0, cr_b = 0;
    u64 cr_p0 = 17, cr_base = 37;
    auto* crossing = app.add_subcommand("crossing", "lambda where model w_b overtakes w_a");
    crossing->add_option("g_a", cr_a)->required();
    crossing->add_option("g_b", cr_b)->required();
    crossing->add_option("--p0", cr_p0, "fitting base stage")->capture_default_str();
    crossing->add_option("--lambda-base", cr_base, "stage where lambda = 1")->capture_default_str();
    crossing->callback([&] { action = [&] { return cmd_crossing(cfg, cr_a, cr_b, cr_p0, cr_base); }; });

    auto* legendre = app.add_subcommand("legendre", "Legendre threat scan and direct verification");
    legendre->require_subcommand(1);
    u64 ls_lo = 0, ls_hi = 0, lv_lo = 0, lv_hi = 0;
    auto* scan = legendre->add_subcommand("scan", "threat reports for primes in [p_lo, p_hi]");
    scan->add_option("p_lo", ls_lo)->required();
    scan->add_option("p_hi", ls_hi);
    scan->callback([&] { action = [&] { return cmd_legendre_scan(cfg, ls_lo, ls_hi); }; });
    auto* verify = legendre->add_subcommand("verify", "check every [n^2, (n+1)^2] for a prime");
    verify->add_option("n_lo", lv_lo)->required();
    verify->add_option("n_hi", lv_hi)->required();
    verify->callback([&] { action = [&] { return cmd_legendre_verify(cfg, lv_lo, lv_hi); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return action();
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
