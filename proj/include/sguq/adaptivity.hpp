#pragma once

#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "sparse_grid.hpp"

namespace sguq {

/// Refinement strategies. Dimension-adaptive strategies grow whole tensor
/// subspaces on Clenshaw-Curtis/Lagrange grids; local strategies grow single
/// dyadic points with hat functions. The *APosteriori variants rank candidates
/// by the adjoint-based error estimate instead of hierarchical surpluses.
enum class Strategy {
    DimSurplus,
    DimAPosteriori,
    LocalTraditional,
    LocalGeneralized,
    LocalGeneralizedAPosteriori,
};

inline bool is_dimension_adaptive(Strategy s) {
    return s == Strategy::DimSurplus || s == Strategy::DimAPosteriori;
}

inline bool uses_aposteriori(Strategy s) {
    return s == Strategy::DimAPosteriori || s == Strategy::LocalGeneralizedAPosteriori;
}

inline std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::DimSurplus: return "dim_surplus";
    case Strategy::DimAPosteriori: return "dim_aposteriori";
    case Strategy::LocalTraditional: return "local_traditional";
    case Strategy::LocalGeneralized: return "local_generalized";
    case Strategy::LocalGeneralizedAPosteriori: return "local_generalized_aposteriori";
    }
    throw std::logic_error("unknown strategy");
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "dim_surplus") return Strategy::DimSurplus;
    if (s == "dim_aposteriori") return Strategy::DimAPosteriori;
    if (s == "local_traditional") return Strategy::LocalTraditional;
    if (s == "local_generalized") return Strategy::LocalGeneralized;
    if (s == "local_generalized_aposteriori") return Strategy::LocalGeneralizedAPosteriori;
    throw std::invalid_argument("unknown strategy: " + s);
}

/// Why an adaptive run stopped.
enum class StopReason { NotStopped, ActiveEmpty, BudgetExhausted, BelowTolerance };

inline std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::NotStopped: return "not_stopped";
    case StopReason::ActiveEmpty: return "active_empty";
    case StopReason::BudgetExhausted: return "budget_exhausted";
    case StopReason::BelowTolerance: return "below_tolerance";
    }
    throw std::logic_error("unknown stop reason");
}

/// Sum of the indicators of all active targets (the global estimate eta).
inline double global_indicator(const std::vector<ActiveTarget>& active) {
    double eta = 0.0;
    for (const auto& t : active) eta += t.gamma;
    return eta;
}

/// Stopping test of the adaptive loop: no work left, budget spent, or the
/// global indicator under the requested tolerance.
inline bool terminate(const std::vector<ActiveTarget>& active, double total_cost,
                      double tolerance, double budget) {
    if (active.empty()) return true;
    if (total_cost >= budget - 1e-9) return true;
    return global_indicator(active) < tolerance;
}

/// Admissible forward neighbours of `w`, in dimension order. `accepted` must
/// already contain `w`; candidates beyond `max_level` in any dimension are
/// dropped.
inline std::vector<MultiIndex> refine_dim(const std::set<MultiIndex>& accepted,
                                          const MultiIndex& w, int max_level) {
    if (!accepted.count(w))
        throw std::invalid_argument("refine_dim: w must be accepted");
    std::vector<MultiIndex> out;
    MultiIndex c = w;
    for (std::size_t k = 0; k < w.size(); ++k) {
        c[k] += 1;
        if (c[k] <= max_level && !accepted.count(c) && is_admissible(accepted, c))
            out.push_back(c);
        c[k] -= 1;
    }
    return out;
}

/// Dyadic children of a point for local refinement: in each dimension the
/// tree children of that coordinate, all other coordinates kept. Both the
/// traditional and the generalized rule of the driver reduce to this set
/// after deduplication, so a single generator serves both.
inline std::vector<GridPoint> local_children(RuleKind rule, const GridPoint& p,
                                             int max_level) {
    std::vector<GridPoint> out;
    for (std::size_t k = 0; k < p.level.size(); ++k) {
        for (auto [cl, ci] : Lineage::children(p.level[k], p.index[k])) {
            if (cl > max_level) continue;
            MultiIndex level = p.level;
            std::vector<int> index = p.index;
            level[k] = cl;
            index[k] = ci;
            out.push_back(make_grid_point(rule, std::move(level), std::move(index)));
        }
    }
    return out;
}

/// Thrown when ensure_ancestors runs out of budget half-way; carries the ids
/// of the ancestors that were added before the stop.
struct AncestorBudgetError : std::runtime_error {
    explicit AncestorBudgetError(std::vector<int> ids)
        : std::runtime_error("budget exhausted while completing ancestors"),
          added_ids(std::move(ids)) {}
    std::vector<int> added_ids;
};

namespace detail {

inline void collect_missing_ancestors(const Surrogate& s, const GridPoint& p,
                                      std::set<std::pair<MultiIndex, std::vector<int>>>& miss) {
    for (std::size_t k = 0; k < p.level.size(); ++k) {
        if (p.level[k] == 0) continue;
        auto [pl, pi] = Lineage::parent(p.level[k], p.index[k]);
        MultiIndex level = p.level;
        std::vector<int> index = p.index;
        level[k] = pl;
        index[k] = pi;
        GridPoint q = make_grid_point(s.rule(), level, index);
        if (s.contains(q) || miss.count({level, index})) continue;
        miss.insert({level, index});
        collect_missing_ancestors(s, q, miss);
    }
}

} // namespace detail

/// Number of hierarchical ancestors of `p` not yet stored in `s`.
inline int count_missing_ancestors(const Surrogate& s, const GridPoint& p) {
    std::set<std::pair<MultiIndex, std::vector<int>>> miss;
    detail::collect_missing_ancestors(s, p, miss);
    return static_cast<int>(miss.size());
}

/// Add (solve, store, accept) every missing hierarchical ancestor of `p`,
/// parents before children, dimensions in ascending order. Does not touch
/// `p` itself. Each solve is charged to `ledger`; if the next solve would
/// push the total beyond `budget`, an AncestorBudgetError carrying the
/// already-added ids is thrown, leaving the surrogate ancestor-closed.
inline std::vector<int> ensure_ancestors(Surrogate& s, const ModelProblem& model,
                                         const GridPoint& p, CostLedger& ledger,
                                         double budget, bool with_fields) {
    std::vector<int> added;
    std::function<void(const GridPoint&)> ensure = [&](const GridPoint& q) {
        for (std::size_t k = 0; k < q.level.size(); ++k) {
            if (q.level[k] == 0) continue;
            auto [pl, pi] = Lineage::parent(q.level[k], q.index[k]);
            MultiIndex level = q.level;
            std::vector<int> index = q.index;
            level[k] = pl;
            index[k] = pi;
            GridPoint a = make_grid_point(s.rule(), level, index);
            if (s.contains(a)) continue;
            ensure(a);
            double unit = with_fields ? 2.0 : 1.0;
            if (ledger.total() + unit > budget + 1e-9) throw AncestorBudgetError(added);
            ModelEval eval = model.solve(a.coord, with_fields);
            ledger.forward_solves += 1;
            if (with_fields) ledger.adjoint_solves += 1;
            int id = s.add_point(a, model.payload(eval, with_fields));
            s.accepted_ids.insert(id);
            added.push_back(id);
        }
    };
    ensure(p);
    return added;
}

/// Options of one adaptive run.
struct RefinementConfig {
    Strategy strategy = Strategy::DimSurplus;
    double budget = 100.0;  ///< n, in forward-solve units
    double tolerance = 0.0; ///< tau; 0 disables the indicator stop
    int max_level = 12;     ///< per-dimension level cap
    /// Store forward/adjoint states alongside the QoI. Forced on for
    /// a posteriori strategies, which need them for the estimates.
    bool with_fields = false;
    /// Charge point evaluations as error-estimate work (1/C instead of one
    /// solve). Used when refining a surrogate-backed target function.
    bool charge_residual_only = false;
    /// Override the per-strategy default point family and basis.
    std::optional<RuleKind> rule;
    std::optional<BasisKind> basis;
    std::ostream* trace = nullptr; ///< JSONL refinement trace sink
};

/// Greedy adaptive collocation driver.
///
/// Maintains the accepted set, the active candidate set with indicators, and
/// a pending queue of candidates awaiting their first evaluation. Each loop
/// pass either activates one pending candidate or pops the active target with
/// the largest indicator (ties: lexicographically smallest) and refines it.
/// All chargeable work is pre-checked against the budget, so the ledger never
/// overshoots it except for the unconditional root evaluation.
class AdaptiveDriver {
public:
    AdaptiveDriver(const ModelProblem& model, RefinementConfig cfg)
        : model_(model), cfg_(cfg),
          rule_(cfg.rule.value_or(is_dimension_adaptive(cfg.strategy)
                                      ? RuleKind::ClenshawCurtis
                                      : RuleKind::EquidistantDyadic)),
          basis_(cfg.basis.value_or(is_dimension_adaptive(cfg.strategy)
                                        ? BasisKind::HierarchicalLagrange
                                        : BasisKind::HierarchicalHat)),
          with_fields_(cfg.with_fields || uses_aposteriori(cfg.strategy)),
          surrogate_(model.dimension(), rule_, basis_,
                     is_dimension_adaptive(cfg.strategy) ? GridMode::DimensionAdaptive
                                                         : GridMode::LocalAdaptive,
                     model.schema(cfg.with_fields || uses_aposteriori(cfg.strategy))) {
        ledger_.cost_ratio = model.cost_ratio();
        if (uses_aposteriori(cfg.strategy)) {
            if (!surrogate_.schema().has_fields())
                throw std::invalid_argument(
                    "a posteriori refinement needs a model with state fields");
            if (cfg.charge_residual_only)
                throw std::invalid_argument(
                    "residual-only charging applies to surplus refinement only");
        }
        budget_ = cfg.budget;
    }

    /// Resume refinement of an existing surrogate: no root evaluation, the
    /// accepted/active structure is taken as-is and `pending` queues targets
    /// that still need activation. Used by the enhanced-surrogate phase 2.
    AdaptiveDriver(const ModelProblem& model, RefinementConfig cfg, Surrogate resume,
                   std::deque<ActiveTarget> pending)
        : model_(model), cfg_(cfg), rule_(resume.rule()), basis_(resume.basis()),
          with_fields_(cfg.with_fields || uses_aposteriori(cfg.strategy)),
          surrogate_(std::move(resume)), pending_(std::move(pending)) {
        ledger_.cost_ratio = model.cost_ratio();
        budget_ = cfg.budget;
        initialized_ = true;
        if ((surrogate_.mode() == GridMode::DimensionAdaptive) !=
            is_dimension_adaptive(cfg.strategy))
            throw std::invalid_argument("resume: surrogate mode does not match strategy");
        if (!(surrogate_.schema() == model.schema(with_fields_)))
            throw std::invalid_argument("resume: surrogate payload does not match model");
        if (uses_aposteriori(cfg.strategy) && cfg.charge_residual_only)
            throw std::invalid_argument(
                "residual-only charging applies to surplus refinement only");
        for (const auto& lv : surrogate_.accepted_levels) seen_.insert({lv, {}});
        if (surrogate_.mode() == GridMode::LocalAdaptive)
            for (std::size_t id = 0; id < surrogate_.size(); ++id)
                seen_.insert({surrogate_.point(static_cast<int>(id)).level,
                              surrogate_.point(static_cast<int>(id)).index});
        for (const auto& t : surrogate_.active) seen_.insert({t.level, t.index});
        for (const auto& t : pending_) seen_.insert({t.level, t.index});
    }

    /// Continue refining until the stored budget is reached (or another stop
    /// condition fires). run_until raises the budget and resumes.
    StopReason run() { return run_until(budget_); }

    StopReason run_until(double budget) {
        budget_ = std::max(budget_, budget);
        if (!initialized_) initialize();
        loop();
        return stop_;
    }

    const Surrogate& surrogate() const { return surrogate_; }
    Surrogate& surrogate() { return surrogate_; }
    const CostLedger& ledger() const { return ledger_; }
    CostLedger& ledger() { return ledger_; }
    StopReason stop_reason() const { return stop_; }
    long iterations() const { return iterations_; }
    double budget() const { return budget_; }

    /// Current global indicator over the active set (partial while candidates
    /// are still pending activation).
    double eta() const { return global_indicator(surrogate_.active); }

    bool pending_empty() const { return pending_.empty(); }

    /// Candidates generated but not yet activated (non-empty only when a run
    /// stopped before pricing them).
    const std::deque<ActiveTarget>& pending() const { return pending_; }

    /// Called after every acceptance; used for instrumentation.
    std::function<void(const AdaptiveDriver&)> on_accept;

private:
    using Key = std::pair<MultiIndex, std::vector<int>>;

    bool dim_mode() const { return is_dimension_adaptive(cfg_.strategy); }
    bool apost() const { return uses_aposteriori(cfg_.strategy); }

    double eval_unit() const {
        if (cfg_.charge_residual_only) return 1.0 / ledger_.cost_ratio;
        return with_fields_ ? 2.0 : 1.0;
    }
    double probe_unit() const { return 1.0 / ledger_.cost_ratio; }

    bool can_afford(double charge) const {
        return ledger_.total() + charge <= budget_ + 1e-9;
    }

    void charge_eval() {
        if (cfg_.charge_residual_only) {
            ledger_.residual_evals += 1;
        } else {
            ledger_.forward_solves += 1;
            if (with_fields_) ledger_.adjoint_solves += 1;
        }
    }

    Eigen::VectorXd evaluate_model(std::span<const double> xi) {
        ModelEval eval = model_.solve(xi, with_fields_ && !cfg_.charge_residual_only);
        charge_eval();
        return model_.payload(eval, with_fields_);
    }

    // Same closure as ensure_ancestors, but charged through the driver's own
    // policy (matters when evaluations are billed as residual work).
    void complete_ancestors(const GridPoint& p) {
        for (std::size_t k = 0; k < p.level.size(); ++k) {
            if (p.level[k] == 0) continue;
            auto [pl, pi] = Lineage::parent(p.level[k], p.index[k]);
            MultiIndex level = p.level;
            std::vector<int> index = p.index;
            level[k] = pl;
            index[k] = pi;
            GridPoint a = make_grid_point(rule_, std::move(level), std::move(index));
            if (surrogate_.contains(a)) continue;
            complete_ancestors(a);
            int id = surrogate_.add_point(a, evaluate_model(a.coord));
            surrogate_.accepted_ids.insert(id);
        }
    }

    double probe_estimate(const GridPoint& p) {
        Eigen::VectorXd payload = surrogate_.interpolate(p.coord);
        const auto& s = surrogate_.schema();
        Eigen::VectorXd fwd = payload.segment(1, s.forward_size);
        Eigen::VectorXd adj = payload.segment(1 + s.forward_size, s.adjoint_size);
        double eps = model_.error_estimate(fwd, adj, p.coord);
        ledger_.residual_evals += 1;
        return eps;
    }

    void initialize() {
        initialized_ = true;
        int d = model_.dimension();
        // Root is always evaluated, even on a zero budget: an empty surrogate
        // answers nothing.
        if (dim_mode()) {
            MultiIndex root(d, 0);
            GridPoint p = make_grid_point(rule_, root, std::vector<int>(d, 0));
            surrogate_.add_point(p, evaluate_model(p.coord));
            surrogate_.accepted_levels.insert(root);
            push_candidates_dim(root);
        } else {
            GridPoint p = make_grid_point(rule_, MultiIndex(d, 0), std::vector<int>(d, 0));
            int id = surrogate_.add_point(p, evaluate_model(p.coord));
            surrogate_.accepted_ids.insert(id);
            push_candidates_local(p);
        }
    }

    void push_candidates_dim(const MultiIndex& w) {
        for (auto& c : refine_dim(surrogate_.accepted_levels, w, cfg_.max_level)) {
            Key key{c, {}};
            if (seen_.count(key)) continue;
            seen_.insert(key);
            pending_.push_back(ActiveTarget{c, {}, 0.0});
        }
    }

    void push_candidates_local(const GridPoint& p) {
        for (auto& c : local_children(rule_, p, cfg_.max_level)) {
            Key key{c.level, c.index};
            if (seen_.count(key) || surrogate_.contains(c)) continue;
            seen_.insert(key);
            pending_.push_back(ActiveTarget{c.level, c.index, 0.0});
        }
    }

    double activation_cost(const ActiveTarget& t) const {
        if (dim_mode()) {
            long npts = 1;
            for (int l : t.level) npts *= new_point_count(l);
            return npts * (apost() ? probe_unit() : eval_unit());
        }
        GridPoint p = make_grid_point(rule_, t.level, t.index);
        int missing = count_missing_ancestors(surrogate_, p);
        if (apost()) return missing * eval_unit() + probe_unit();
        double self = surrogate_.contains(p) ? 0.0 : 1.0; // may exist as ancestor
        return (missing + self) * eval_unit();
    }

    double acceptance_cost(const ActiveTarget& t) const {
        if (!apost()) return 0.0; // surplus targets were evaluated at activation
        if (!dim_mode()) {
            // the point may already be stored as a forced ancestor of another
            // candidate, in which case it was paid for then
            GridPoint p = make_grid_point(rule_, t.level, t.index);
            return surrogate_.contains(p) ? 0.0 : eval_unit();
        }
        long npts = 1;
        for (int l : t.level) npts *= new_point_count(l);
        return npts * eval_unit();
    }

    void activate(ActiveTarget t) {
        double gamma = 0.0;
        if (dim_mode()) {
            for (const auto& p : subspace_points(rule_, t.level)) {
                if (apost()) {
                    gamma += std::abs(probe_estimate(p)) * surrogate_.point_weight(p);
                } else {
                    Eigen::VectorXd payload = evaluate_model(p.coord);
                    int id = surrogate_.add_point(p, payload);
                    gamma += std::abs(surrogate_.surplus(id)(0)) * surrogate_.point_weight(p);
                }
            }
        } else {
            GridPoint p = make_grid_point(rule_, t.level, t.index);
            complete_ancestors(p);
            if (apost()) {
                gamma = std::abs(probe_estimate(p)) * surrogate_.point_weight(p);
            } else {
                int id = surrogate_.find(p); // may exist as a forced ancestor
                if (id < 0) id = surrogate_.add_point(p, evaluate_model(p.coord));
                gamma = std::abs(surrogate_.surplus(id)(0)) * surrogate_.point_weight(p);
            }
        }
        t.gamma = gamma;
        surrogate_.active.push_back(std::move(t));
    }

    // Largest indicator wins; ties go to the lexicographically smallest
    // (level, index) so runs are reproducible.
    std::size_t best_active() const {
        std::size_t best = 0;
        const auto& a = surrogate_.active;
        for (std::size_t i = 1; i < a.size(); ++i) {
            if (a[i].gamma > a[best].gamma ||
                (a[i].gamma == a[best].gamma &&
                 std::make_pair(a[i].level, a[i].index) <
                     std::make_pair(a[best].level, a[best].index)))
                best = i;
        }
        return best;
    }

    void accept(const ActiveTarget& t) {
        if (dim_mode()) {
            if (apost()) {
                for (const auto& p : subspace_points(rule_, t.level))
                    surrogate_.add_point(p, evaluate_model(p.coord));
            }
            surrogate_.accepted_levels.insert(t.level);
            push_candidates_dim(t.level);
        } else {
            GridPoint p = make_grid_point(rule_, t.level, t.index);
            if (apost()) {
                int id = surrogate_.find(p); // may exist as a forced ancestor
                if (id < 0) id = surrogate_.add_point(p, evaluate_model(p.coord));
                surrogate_.accepted_ids.insert(id);
            } else {
                surrogate_.accepted_ids.insert(surrogate_.find(p));
            }
            push_candidates_local(p);
        }
    }

    void trace_line(const ActiveTarget& t, double eta_now) {
        if (!cfg_.trace) return;
        std::string line = "{\"iter\":" + std::to_string(iterations_) + ",\"level\":[";
        for (std::size_t k = 0; k < t.level.size(); ++k)
            line += (k ? "," : "") + std::to_string(t.level[k]);
        line += "]";
        if (!t.index.empty()) {
            line += ",\"index\":[";
            for (std::size_t k = 0; k < t.index.size(); ++k)
                line += (k ? "," : "") + std::to_string(t.index[k]);
            line += "]";
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf), ",\"gamma\":%.17g,\"eta\":%.17g,\"cost\":%.17g}",
                      t.gamma, eta_now, ledger_.total());
        line += buf;
        *cfg_.trace << line << "\n";
    }

    void loop() {
        stop_ = StopReason::NotStopped;
        while (true) {
            if (!pending_.empty()) {
                if (!can_afford(activation_cost(pending_.front()))) {
                    stop_ = StopReason::BudgetExhausted;
                    return;
                }
                ActiveTarget t = std::move(pending_.front());
                pending_.pop_front();
                activate(std::move(t));
                continue;
            }
            if (surrogate_.active.empty()) {
                stop_ = StopReason::ActiveEmpty;
                return;
            }
            if (ledger_.total() >= budget_ - 1e-9) {
                stop_ = StopReason::BudgetExhausted;
                return;
            }
            double eta_now = eta();
            if (eta_now < cfg_.tolerance) {
                stop_ = StopReason::BelowTolerance;
                return;
            }
            std::size_t i = best_active();
            ActiveTarget t = surrogate_.active[i];
            if (!can_afford(acceptance_cost(t))) {
                stop_ = StopReason::BudgetExhausted;
                return;
            }
            surrogate_.active.erase(surrogate_.active.begin() + i);
            accept(t);
            trace_line(t, eta_now);
            iterations_ += 1;
            if (on_accept) on_accept(*this);
        }
    }

    const ModelProblem& model_;
    RefinementConfig cfg_;
    RuleKind rule_;
    BasisKind basis_;
    bool with_fields_;
    Surrogate surrogate_;
    CostLedger ledger_;
    double budget_ = 0.0;
    bool initialized_ = false;
    StopReason stop_ = StopReason::NotStopped;
    long iterations_ = 0;
    std::deque<ActiveTarget> pending_;
    std::set<Key> seen_;
};

/// One-call façade: build an adaptive surrogate for `model` under `cfg`.
inline AdaptiveDriver interp_adaptive(const ModelProblem& model, const RefinementConfig& cfg) {
    AdaptiveDriver driver(model, cfg);
    driver.run();
    return driver;
}

} // namespace sguq
