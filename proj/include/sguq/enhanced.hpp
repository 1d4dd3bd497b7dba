#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "adaptivity.hpp"
#include "model.hpp"
#include "sparse_grid.hpp"

namespace sguq {

/// Error-corrected evaluation J_{h,n}(xi) + eps(xi): interpolate the QoI and
/// both states from a field-carrying surrogate, then add the adjoint-weighted
/// residual estimate of the model. Charges one residual evaluation if a
/// ledger is given (pass nullptr for free measurement evaluations).
inline double eval_enhanced_direct(const Surrogate& base, const ModelProblem& model,
                                   std::span<const double> xi, CostLedger* ledger = nullptr) {
    const PayloadSchema& s = base.schema();
    if (!s.has_fields())
        throw std::invalid_argument("eval_enhanced_direct: surrogate has no state fields");
    Eigen::VectorXd payload = base.interpolate(xi);
    Eigen::VectorXd fwd = payload.segment(1, s.forward_size);
    Eigen::VectorXd adj = payload.segment(1 + s.forward_size, s.adjoint_size);
    double eps = model.error_estimate(fwd, adj, xi);
    if (ledger) ledger->residual_evals += 1;
    return payload(0) + eps;
}

/// Phase-2 stopping tolerance: the larger of the observed discretization
/// error level and the square of the strongest remaining stochastic
/// indicator. Refining below either would chase noise.
inline double tau_epsilon(double delta_max, double gamma_max) {
    return std::max(delta_max, gamma_max * gamma_max);
}

/// Result of replacing every stored QoI value J_h by J_h + delta.
struct RebaseResult {
    Surrogate enhanced;         ///< QoI-only surrogate over the same points
    std::vector<double> deltas; ///< per-point estimates, in point-id order
    double delta_max = 0.0;     ///< max |delta|
};

/// Evaluate the error estimate at every stored point of `base` (one residual
/// charge each) and build a QoI-only surrogate over the same points with
/// values J_h + delta. Points are re-inserted in the original insertion
/// order, which is a linear extension of the hierarchical partial order, so
/// the surpluses come out consistently rebased. Accepted/active bookkeeping
/// is copied; active indicators are left for the caller to refresh.
inline RebaseResult rebase_with_delta(const Surrogate& base, const ModelProblem& model,
                                      CostLedger* ledger = nullptr) {
    const PayloadSchema& s = base.schema();
    if (!s.has_fields())
        throw std::invalid_argument("rebase_with_delta: surrogate has no state fields");
    RebaseResult out{Surrogate(base.dimension(), base.rule(), base.basis(), base.mode(),
                               PayloadSchema{}),
                     {}, 0.0};
    out.deltas.reserve(base.size());
    for (std::size_t id = 0; id < base.size(); ++id) {
        const Eigen::VectorXd& raw = base.raw(static_cast<int>(id));
        Eigen::VectorXd fwd = raw.segment(1, s.forward_size);
        Eigen::VectorXd adj = raw.segment(1 + s.forward_size, s.adjoint_size);
        const GridPoint& p = base.point(static_cast<int>(id));
        double delta = model.error_estimate(fwd, adj, p.coord);
        if (ledger) ledger->residual_evals += 1;
        out.deltas.push_back(delta);
        out.delta_max = std::max(out.delta_max, std::abs(delta));
        Eigen::VectorXd v(1);
        v(0) = raw(0) + delta;
        out.enhanced.add_point(p, v);
    }
    out.enhanced.accepted_levels = base.accepted_levels;
    out.enhanced.accepted_ids = base.accepted_ids;
    out.enhanced.active = base.active;
    return out;
}

/// QoI-only view of xi -> J_{h,n}(xi) + eps(xi) used as the phase-2 target.
/// Solving it performs no model solves, only one residual evaluation, which
/// the driver charges through its residual-only policy.
class EnhancedTargetModel : public ModelProblem {
public:
    EnhancedTargetModel(const Surrogate& base, const ModelProblem& inner)
        : base_(base), inner_(inner) {
        if (!base.schema().has_fields())
            throw std::invalid_argument("EnhancedTargetModel: base has no state fields");
    }

    int dimension() const override { return inner_.dimension(); }
    int forward_size() const override { return 0; }
    int adjoint_size() const override { return 0; }
    double cost_ratio() const override { return inner_.cost_ratio(); }

    ModelEval solve(std::span<const double> xi, bool with_adjoint) const override {
        if (with_adjoint)
            throw std::logic_error("EnhancedTargetModel has no adjoint state");
        return ModelEval{eval_enhanced_direct(base_, inner_, xi, nullptr), {}, {}};
    }

    double error_estimate(const Eigen::VectorXd&, const Eigen::VectorXd&,
                          std::span<const double>) const override {
        throw std::logic_error("EnhancedTargetModel has no error estimate");
    }

private:
    const Surrogate& base_;
    const ModelProblem& inner_;
};

/// Options of the two-phase enhanced construction.
struct EnhancedOptions {
    double budget = 100.0;  ///< n: phase 1 gets n/2, rebasing + phase 2 the rest
    Strategy strategy = Strategy::DimSurplus;
    double tolerance = 0.0; ///< tau of phase 1
    int max_level = 12;
    /// Phase-2 tolerance rule: max(delta_max, gamma_max^2), or the square of
    /// the whole phase-1 global indicator.
    enum class TauRule { MaxDeltaGammaSq, EtaSquared } tau_rule = TauRule::MaxDeltaGammaSq;
    std::ostream* trace = nullptr;
};

/// A fully built enhanced surrogate with its provenance.
struct EnhancedResult {
    Surrogate base;     ///< phase-1 surrogate carrying QoI + states
    Surrogate enhanced; ///< QoI-only surrogate of J_{h,n} + eps
    CostLedger ledger;  ///< combined cost of both phases
    std::vector<double> deltas;
    double delta_max = 0.0;
    double gamma_max = 0.0;
    double phase1_eta = 0.0;
    double tau_eps = 0.0;
    StopReason phase1_stop = StopReason::NotStopped;
    StopReason phase2_stop = StopReason::NotStopped;

    /// Evaluate the enhanced interpolant.
    double operator()(std::span<const double> xi) const {
        return enhanced.interpolate_component(xi, 0);
    }
};

namespace detail {

inline Strategy phase2_strategy(Strategy s) {
    switch (s) {
    case Strategy::DimSurplus:
    case Strategy::DimAPosteriori: return Strategy::DimSurplus;
    case Strategy::LocalTraditional: return Strategy::LocalTraditional;
    case Strategy::LocalGeneralized:
    case Strategy::LocalGeneralizedAPosteriori: return Strategy::LocalGeneralized;
    }
    throw std::logic_error("unknown strategy");
}

} // namespace detail

/// Two-phase construction of an enhanced surrogate.
///
/// Phase 1 adaptively collocates the model with full state payloads on half
/// the budget. The stored values are then rebased to J_h + delta and phase 2
/// continues surplus refinement on the corrected target J_{h,n} + eps, whose
/// evaluations need no model solves and cost only 1/C each, down to the
/// tolerance tau_eps = max(delta_max, gamma_max^2).
inline EnhancedResult enhanced_interp(const ModelProblem& model, const EnhancedOptions& opts) {
    EnhancedResult result;
    result.ledger.cost_ratio = model.cost_ratio();

    RefinementConfig phase1;
    phase1.strategy = opts.strategy;
    phase1.budget = opts.budget / 2.0;
    phase1.tolerance = opts.tolerance;
    phase1.max_level = opts.max_level;
    phase1.with_fields = true;
    phase1.trace = opts.trace;
    AdaptiveDriver driver1(model, phase1);
    result.phase1_stop = driver1.run();
    result.phase1_eta = driver1.eta();
    result.ledger = driver1.ledger();

    for (const auto& t : driver1.surrogate().active)
        result.gamma_max = std::max(result.gamma_max, t.gamma);

    RebaseResult rebased = rebase_with_delta(driver1.surrogate(), model, &result.ledger);
    result.base = std::move(driver1.surrogate());
    result.deltas = std::move(rebased.deltas);
    result.delta_max = rebased.delta_max;
    result.tau_eps = opts.tau_rule == EnhancedOptions::TauRule::EtaSquared
                         ? result.phase1_eta * result.phase1_eta
                         : tau_epsilon(result.delta_max, result.gamma_max);

    // Phase-1 targets carry over: surplus-mode actives keep their (rebased)
    // surpluses; a posteriori actives were never evaluated and queue up for
    // evaluation through the corrected target, ahead of any candidates
    // phase 1 generated but could not afford to activate.
    Surrogate enhanced = std::move(rebased.enhanced);
    std::deque<ActiveTarget> pending;
    if (uses_aposteriori(opts.strategy)) {
        for (auto& t : enhanced.active) pending.push_back(ActiveTarget{t.level, t.index, 0.0});
        enhanced.active.clear();
    } else {
        for (auto& t : enhanced.active) {
            double gamma = 0.0;
            if (is_dimension_adaptive(opts.strategy)) {
                for (const auto& p : subspace_points(enhanced.rule(), t.level)) {
                    int id = enhanced.find(p);
                    gamma += std::abs(enhanced.surplus(id)(0)) * enhanced.point_weight(p);
                }
            } else {
                int id = enhanced.find(make_grid_point(enhanced.rule(), t.level, t.index));
                gamma = std::abs(enhanced.surplus(id)(0)) * enhanced.point_weight(
                            make_grid_point(enhanced.rule(), t.level, t.index));
            }
            t.gamma = gamma;
        }
    }
    for (const auto& t : driver1.pending())
        pending.push_back(ActiveTarget{t.level, t.index, 0.0});

    EnhancedTargetModel target(result.base, model);
    RefinementConfig phase2;
    phase2.strategy = detail::phase2_strategy(opts.strategy);
    phase2.budget = opts.budget / 2.0 - (result.ledger.total() - driver1.ledger().total());
    phase2.tolerance = result.tau_eps;
    phase2.max_level = opts.max_level;
    phase2.charge_residual_only = true;
    phase2.trace = opts.trace;
    AdaptiveDriver driver2(target, phase2, std::move(enhanced), std::move(pending));
    result.phase2_stop = driver2.run();
    result.ledger.residual_evals += driver2.ledger().residual_evals;
    result.enhanced = std::move(driver2.surrogate());
    return result;
}

} // namespace sguq
