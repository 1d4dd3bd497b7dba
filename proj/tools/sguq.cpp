#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <sguq/adaptivity.hpp>
#include <sguq/enhanced.hpp>
#include <sguq/kle.hpp>
#include <sguq/lhs.hpp>
#include <sguq/serialize.hpp>
#include <sguq/study.hpp>

using nlohmann::json;
using namespace sguq;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return json::parse(in);
}

/// The model block of a config: either the nested "model" object or, when the
/// file is flat (or "model" is the name string itself), the whole document.
json model_block(const json& cfg) {
    if (cfg.contains("model") && cfg.at("model").is_object()) return cfg.at("model");
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << text;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> parse_xi(const std::string& text, int dim) {
    if (text.empty()) return std::vector<double>(dim, 0.5);
    std::vector<double> xi;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) xi.push_back(std::stod(item));
    if (static_cast<int>(xi.size()) != dim)
        throw std::runtime_error("--xi needs " + std::to_string(dim) + " components, got " +
                                 std::to_string(xi.size()));
    for (double x : xi)
        if (x < 0.0 || x > 1.0) throw std::runtime_error("--xi components must lie in [0,1]");
    return xi;
}

/// Owns the optional trace stream so subcommands can pass an ostream*.
struct TraceSink {
    std::ofstream file;

    std::ostream* open(const std::string& path) {
        if (path.empty()) return nullptr;
        file.open(path);
        if (!file) throw std::runtime_error("cannot open trace file: " + path);
        return &file;
    }
};

KleConfig kle_config_from(const json& mb) {
    KleConfig kc;
    kc.modes = mb.value("d", 25);
    kc.correlation_length = mb.value("l_c", 0.1);
    kc.amplitude = mb.value("sigma_a", 1.0);
    kc.mean = mb.value("a_bar", 0.0);
    kc.nodes = mb.value("kle_nodes", 401);
    return kc;
}

int cmd_kle(const std::string& config_path, const std::string& out_path) {
    json mb = model_block(load_config(config_path));
    if (mb.value("model", "diffusion") != "diffusion")
        throw std::runtime_error("kle applies to the diffusion model only");
    KleConfig kc = kle_config_from(mb);
    KleField field = build_kle(kc);

    json eigenvalues = json::array();
    for (int k = 0; k < field.num_modes(); ++k) eigenvalues.push_back(field.eigenvalues(k));
    json x = json::array();
    json phi = json::array();
    for (int k = 0; k < field.num_modes(); ++k) {
        json col = json::array();
        for (int i = 0; i < kc.nodes; ++i) col.push_back(field.eigenfunctions(i, k));
        phi.push_back(std::move(col));
    }
    for (int i = 0; i < kc.nodes; ++i) x.push_back(field.nodes(i));

    json out{{"modes", field.num_modes()},
             {"nodes", kc.nodes},
             {"correlation_length", kc.correlation_length},
             {"amplitude", kc.amplitude},
             {"mean", kc.mean},
             {"eigenvalues", std::move(eigenvalues)},
             {"eigenvalue_sum_all", field.eigenvalue_sum_all},
             {"x", std::move(x)},
             {"eigenfunctions", std::move(phi)}};
    write_text(out_path, out.dump(2) + "\n");
    return 0;
}

int cmd_solve(const std::string& config_path, const std::string& out_path,
              const std::string& xi_text, bool with_adjoint) {
    json cfg = load_config(config_path);
    auto model = model_from_json(model_block(cfg));
    std::vector<double> xi = parse_xi(xi_text, model->dimension());

    ModelEval eval = model->solve(xi, with_adjoint);
    CostLedger ledger;
    ledger.cost_ratio = model->cost_ratio();
    ledger.forward_solves = 1;
    json out{{"dimension", model->dimension()}, {"xi", xi}, {"qoi", eval.qoi}};
    if (with_adjoint) {
        ledger.adjoint_solves = 1;
        ledger.residual_evals = 1;
        double est = model->error_estimate(eval.forward, eval.adjoint, xi);
        out["error_estimate"] = est;
        out["corrected_qoi"] = eval.qoi + est;
    }
    out["ledger"] = to_json(ledger);
    write_text(out_path, out.dump(2) + "\n");
    return 0;
}

RefinementConfig build_config_from(const json& block, const std::string& strategy_override) {
    RefinementConfig rc;
    rc.strategy = strategy_from_string(
        !strategy_override.empty() ? strategy_override : block.value("strategy", "dim_surplus"));
    rc.budget = block.value("budget", 100.0);
    rc.tolerance = block.value("tolerance", 0.0);
    rc.max_level = block.value("max_level", 12);
    rc.with_fields = block.value("with_fields", false);
    return rc;
}

int cmd_build(const std::string& config_path, const std::string& out_path,
              const std::string& strategy_override, double budget_override,
              const std::string& trace_path) {
    json cfg = load_config(config_path);
    auto model = model_from_json(model_block(cfg));
    RefinementConfig rc = build_config_from(cfg.value("build", json::object()), strategy_override);
    if (budget_override > 0.0) rc.budget = budget_override;
    TraceSink trace;
    rc.trace = trace.open(trace_path);

    AdaptiveDriver driver(*model, rc);
    driver.run();
    const Surrogate& s = driver.surrogate();
    json out{{"surrogate", to_json(s)},
             {"ledger", to_json(driver.ledger())},
             {"eta", driver.eta()},
             {"stop", to_string(driver.stop_reason())},
             {"iterations", driver.iterations()},
             {"points", s.size()}};
    write_text(out_path, out.dump(2) + "\n");
    std::cerr << "build: " << s.size() << " points, cost " << driver.ledger().total()
              << ", eta " << driver.eta() << ", stop " << to_string(driver.stop_reason())
              << "\n";
    return 0;
}

int cmd_enhance(const std::string& config_path, const std::string& out_path,
                const std::string& strategy_override, double budget_override,
                const std::string& trace_path) {
    json cfg = load_config(config_path);
    auto model = model_from_json(model_block(cfg));
    json block = cfg.value("enhance", json::object());

    EnhancedOptions opts;
    opts.strategy = strategy_from_string(
        !strategy_override.empty() ? strategy_override : block.value("strategy", "dim_surplus"));
    opts.budget = budget_override > 0.0 ? budget_override : block.value("budget", 100.0);
    opts.tolerance = block.value("tolerance", 0.0);
    opts.max_level = block.value("max_level", 12);
    if (block.contains("tau_rule"))
        opts.tau_rule = tau_rule_from_string(block.at("tau_rule").get<std::string>());
    TraceSink trace;
    opts.trace = trace.open(trace_path);

    EnhancedResult r = enhanced_interp(*model, opts);
    write_text(out_path, to_json(r).dump(2) + "\n");
    std::cerr << "enhance: base " << r.base.size() << " points, enhanced " << r.enhanced.size()
              << " points, cost " << r.ledger.total() << ", delta_max " << r.delta_max
              << ", tau_eps " << r.tau_eps << ", phase2 " << to_string(r.phase2_stop) << "\n";
    return 0;
}

int cmd_study(const std::string& config_path, const std::string& out_path,
              const std::string& strategy_override, std::int64_t seed_override, bool verbose) {
    json cfg = load_config(config_path);
    auto model = model_from_json(model_block(cfg));
    StudyConfig sc = study_from_json(cfg.value("study", json::object()));
    if (!strategy_override.empty()) sc.strategies = {strategy_from_string(strategy_override)};
    if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);

    StudyResult result = run_study(*model, sc, verbose ? &std::cerr : nullptr);
    std::ostringstream csv;
    write_csv(csv, result.records);
    write_text(out_path, csv.str());
    for (const auto& w : result.warnings)
        std::cerr << "warning: " << w.variant << " at checkpoint " << w.checkpoint << ": "
                  << w.message << "\n";
    std::cerr << "study: " << result.records.size() << " records, " << result.cache_misses
              << " reference solves, " << result.cache_hits << " cache hits\n";
    return 0;
}

int cmd_sample(const std::string& surrogate_path, const std::string& out_path, int samples,
               std::int64_t seed, const std::string& which) {
    std::ifstream in(surrogate_path);
    if (!in) throw std::runtime_error("cannot open surrogate file: " + surrogate_path);
    json j = json::parse(in);
    // Accept either a bare surrogate document or an enhanced-result document;
    // for the latter, --which selects the grid.
    const json* doc = &j;
    if (j.contains("surrogate")) doc = &j.at("surrogate");
    else if (j.contains("base") && j.contains("enhanced"))
        doc = which == "base" ? &j.at("base") : &j.at("enhanced");
    Surrogate s = surrogate_from_json(*doc);

    auto pts = lhs_sample(samples, s.dimension(), static_cast<std::uint64_t>(seed < 0 ? 0 : seed));
    std::string csv;
    for (int k = 0; k < s.dimension(); ++k) csv += (k ? ",xi_" : "xi_") + std::to_string(k);
    csv += ",value\n";
    for (const auto& x : pts) {
        for (int k = 0; k < s.dimension(); ++k) csv += (k ? "," : "") + format_double(x[k]);
        csv += "," + format_double(s.interpolate_component(x)) + "\n";
    }
    write_text(out_path, csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive sparse grid collocation with adjoint-based error correction"};
    app.require_subcommand(1);

    std::string config_path, out_path, strategy, xi_text, trace_path, surrogate_path;
    std::string which = "enhanced";
    bool with_adjoint = false, verbose = false;
    double budget = 0.0;
    std::int64_t seed = -1;
    int samples = 100;

    auto* kle = app.add_subcommand("kle", "Dump the Karhunen-Loeve eigenpairs of the "
                                          "log-diffusivity field");
    kle->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    kle->add_option("--out", out_path, "output JSON path (default: stdout)");

    auto* solve = app.add_subcommand("solve", "Solve the model once at a parameter point");
    solve->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    solve->add_option("--out", out_path, "output JSON path (default: stdout)");
    solve->add_option("--xi", xi_text, "comma-separated point in [0,1]^d (default: center)");
    solve->add_flag("--adjoint", with_adjoint, "also solve the adjoint and report the "
                                               "error estimate");

    auto* build = app.add_subcommand("build", "Build an adaptive surrogate");
    build->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    build->add_option("--out", out_path, "output JSON path (default: stdout)");
    build->add_option("--strategy", strategy, "refinement strategy override");
    build->add_option("--budget", budget, "budget override in solve units");
    build->add_option("--trace", trace_path, "JSONL refinement trace path");

    auto* enhance = app.add_subcommand("enhance", "Build the two-phase corrected surrogate");
    enhance->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    enhance->add_option("--out", out_path, "output JSON path (default: stdout)");
    enhance->add_option("--strategy", strategy, "refinement strategy override");
    enhance->add_option("--budget", budget, "total budget override in solve units");
    enhance->add_option("--trace", trace_path, "JSONL refinement trace path");

    auto* study = app.add_subcommand("study", "Run a cost/accuracy comparison study");
    study->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    study->add_option("--out", out_path, "output CSV path (default: stdout)");
    study->add_option("--strategy", strategy, "restrict the study to one strategy");
    study->add_option("--seed", seed, "validation sampling seed override");
    study->add_flag("--verbose", verbose, "log study progress to stderr");

    auto* sample = app.add_subcommand("sample", "Evaluate a stored surrogate at Latin "
                                                "hypercube points");
    sample->add_option("--surrogate", surrogate_path, "surrogate JSON from build or enhance")
        ->required()
        ->check(CLI::ExistingFile);
    sample->add_option("--out", out_path, "output CSV path (default: stdout)");
    sample->add_option("--samples", samples, "number of sample points")
        ->check(CLI::PositiveNumber);
    sample->add_option("--seed", seed, "sampling seed");
    sample->add_option("--which", which, "grid of an enhanced file: base or enhanced")
        ->check(CLI::IsMember({"base", "enhanced"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (kle->parsed()) return cmd_kle(config_path, out_path);
        if (solve->parsed()) return cmd_solve(config_path, out_path, xi_text, with_adjoint);
        if (build->parsed()) return cmd_build(config_path, out_path, strategy, budget, trace_path);
        if (enhance->parsed())
            return cmd_enhance(config_path, out_path, strategy, budget, trace_path);
        if (study->parsed()) return cmd_study(config_path, out_path, strategy, seed, verbose);
        if (sample->parsed()) return cmd_sample(surrogate_path, out_path, samples, seed, which);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
