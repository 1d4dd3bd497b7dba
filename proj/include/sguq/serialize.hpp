#pragma once

#include <json.hpp>
#include <memory>
#include <stdexcept>
#include <string>

#include "diffusion.hpp"
#include "enhanced.hpp"
#include "lotka_volterra.hpp"
#include "model.hpp"
#include "sparse_grid.hpp"
#include "study.hpp"

namespace sguq {

using nlohmann::json;

inline json to_json(const CostLedger& ledger) {
    return json{{"cost_ratio", ledger.cost_ratio},
                {"forward_solves", ledger.forward_solves},
                {"adjoint_solves", ledger.adjoint_solves},
                {"residual_evals", ledger.residual_evals},
                {"total", ledger.total()}};
}

inline CostLedger ledger_from_json(const json& j) {
    CostLedger ledger;
    ledger.cost_ratio = j.at("cost_ratio").get<double>();
    ledger.forward_solves = j.at("forward_solves").get<long>();
    ledger.adjoint_solves = j.at("adjoint_solves").get<long>();
    ledger.residual_evals = j.at("residual_evals").get<long>();
    return ledger;
}

/// Serialize a surrogate: structure, raw payloads in insertion order, and the
/// accepted/active bookkeeping. Surpluses are stored for inspection but are
/// recomputed on load, so a round trip is bit-exact by construction.
inline json to_json(const Surrogate& s) {
    json points = json::array();
    for (std::size_t id = 0; id < s.size(); ++id) {
        const GridPoint& p = s.point(static_cast<int>(id));
        json jp{{"level", p.level}, {"index", p.index}};
        jp["raw"] = std::vector<double>(s.raw(static_cast<int>(id)).begin(),
                                        s.raw(static_cast<int>(id)).end());
        jp["surplus"] = std::vector<double>(s.surplus(static_cast<int>(id)).begin(),
                                            s.surplus(static_cast<int>(id)).end());
        points.push_back(std::move(jp));
    }
    json active = json::array();
    for (const auto& t : s.active)
        active.push_back(json{{"level", t.level}, {"index", t.index}, {"gamma", t.gamma}});
    return json{{"dimension", s.dimension()},
                {"rule", to_string(s.rule())},
                {"basis", to_string(s.basis())},
                {"mode", s.mode() == GridMode::DimensionAdaptive ? "dimension_adaptive"
                                                                 : "local_adaptive"},
                {"payload",
                 {{"forward_size", s.schema().forward_size},
                  {"adjoint_size", s.schema().adjoint_size}}},
                {"points", std::move(points)},
                {"accepted_levels", json(s.accepted_levels)},
                {"accepted_ids", json(s.accepted_ids)},
                {"active", std::move(active)}};
}

inline Surrogate surrogate_from_json(const json& j) {
    std::string mode_s = j.at("mode").get<std::string>();
    if (mode_s != "dimension_adaptive" && mode_s != "local_adaptive")
        throw std::invalid_argument("unknown grid mode: " + mode_s);
    PayloadSchema schema{j.at("payload").at("forward_size").get<int>(),
                         j.at("payload").at("adjoint_size").get<int>()};
    Surrogate s(j.at("dimension").get<int>(),
                rule_from_string(j.at("rule").get<std::string>()),
                basis_from_string(j.at("basis").get<std::string>()),
                mode_s == "dimension_adaptive" ? GridMode::DimensionAdaptive
                                               : GridMode::LocalAdaptive,
                schema);
    for (const auto& jp : j.at("points")) {
        GridPoint p = make_grid_point(s.rule(), jp.at("level").get<MultiIndex>(),
                                      jp.at("index").get<std::vector<int>>());
        auto raw_v = jp.at("raw").get<std::vector<double>>();
        Eigen::VectorXd raw = Eigen::Map<Eigen::VectorXd>(raw_v.data(), raw_v.size());
        s.add_point(p, raw);
    }
    for (const auto& lv : j.at("accepted_levels"))
        s.accepted_levels.insert(lv.get<MultiIndex>());
    for (const auto& id : j.at("accepted_ids")) s.accepted_ids.insert(id.get<int>());
    for (const auto& jt : j.at("active"))
        s.active.push_back(ActiveTarget{jt.at("level").get<MultiIndex>(),
                                        jt.at("index").get<std::vector<int>>(),
                                        jt.at("gamma").get<double>()});
    return s;
}

inline json to_json(const EnhancedResult& r) {
    return json{{"base", to_json(r.base)},
                {"enhanced", to_json(r.enhanced)},
                {"ledger", to_json(r.ledger)},
                {"delta_max", r.delta_max},
                {"gamma_max", r.gamma_max},
                {"phase1_eta", r.phase1_eta},
                {"tau_eps", r.tau_eps},
                {"phase1_stop", to_string(r.phase1_stop)},
                {"phase2_stop", to_string(r.phase2_stop)}};
}

/// Build a model from a JSON configuration block. Keys:
///   model: "diffusion" (default) or "lotka_volterra"
///   diffusion: d, N_e, l_c, sigma_a, a_bar, kle_nodes, cost_ratio_C
///   lotka_volterra: N_t, z0, alpha_diag, cost_ratio_C
inline std::unique_ptr<ModelProblem> model_from_json(const json& j) {
    std::string m = j.value("model", "diffusion");
    if (m == "diffusion") {
        DiffusionConfig cfg;
        cfg.kle.modes = j.value("d", 25);
        cfg.elements = j.value("N_e", 100);
        cfg.kle.correlation_length = j.value("l_c", 0.1);
        cfg.kle.amplitude = j.value("sigma_a", 1.0);
        cfg.kle.mean = j.value("a_bar", 0.0);
        cfg.kle.nodes = j.value("kle_nodes", 401);
        cfg.cost_ratio = j.value("cost_ratio_C", 25.0);
        return std::make_unique<DiffusionModel>(cfg);
    }
    if (m == "lotka_volterra") {
        LotkaVolterraConfig cfg;
        cfg.steps = j.value("N_t", 1000);
        cfg.z_init = j.value("z0", 0.5);
        cfg.alpha_diag = j.value("alpha_diag", 1.0);
        cfg.cost_ratio = j.value("cost_ratio_C", 25.0);
        if (j.contains("d") && j.at("d").get<int>() != 9)
            throw std::invalid_argument("lotka_volterra is 9-dimensional");
        return std::make_unique<LotkaVolterraModel>(cfg);
    }
    throw std::invalid_argument("unknown model: " + m);
}

inline EnhancedOptions::TauRule tau_rule_from_string(const std::string& s) {
    if (s == "max_delta_gamma_sq") return EnhancedOptions::TauRule::MaxDeltaGammaSq;
    if (s == "eta_squared") return EnhancedOptions::TauRule::EtaSquared;
    throw std::invalid_argument("unknown tau rule: " + s);
}

/// Study block of a config file. Keys: strategies, checkpoints, variants,
/// validation_samples, seed, tolerance, max_level, tau_rule.
inline StudyConfig study_from_json(const json& j) {
    StudyConfig cfg;
    if (j.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& s : j.at("strategies"))
            cfg.strategies.push_back(strategy_from_string(s.get<std::string>()));
    }
    if (j.contains("checkpoints"))
        cfg.checkpoints = j.at("checkpoints").get<std::vector<double>>();
    if (j.contains("variants"))
        cfg.variants = j.at("variants").get<std::vector<std::string>>();
    cfg.validation_samples = j.value("validation_samples", 2000);
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(0));
    cfg.tolerance = j.value("tolerance", 0.0);
    cfg.max_level = j.value("max_level", 12);
    if (j.contains("tau_rule"))
        cfg.tau_rule = tau_rule_from_string(j.at("tau_rule").get<std::string>());
    return cfg;
}

} // namespace sguq
