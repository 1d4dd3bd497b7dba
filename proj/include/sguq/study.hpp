#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "adaptivity.hpp"
#include "enhanced.hpp"
#include "lhs.hpp"
#include "model.hpp"

namespace sguq {

/// One row of a convergence study: a named approximation, its construction
/// cost in solve units, and its validation error.
struct StudyRecord {
    std::string variant;
    double cost = 0.0;
    double l2_error = 0.0;
};

struct StudyWarning {
    std::string variant;
    double checkpoint = 0.0;
    std::string message;
};

/// Lazily evaluated reference values J_h at a fixed validation sample.
/// Validation solves are measurements, not construction work, so they are
/// not charged to any ledger; the cache guarantees each sample is solved at
/// most once per study.
class ReferenceCache {
public:
    ReferenceCache(const ModelProblem& model, std::vector<std::vector<double>> samples)
        : model_(model), samples_(std::move(samples)),
          values_(samples_.size(), 0.0), ready_(samples_.size(), 0) {}

    const std::vector<std::vector<double>>& samples() const { return samples_; }

    double value(int i) {
        if (!ready_[i]) {
            values_[i] = model_.solve(samples_[i], false).qoi;
            ready_[i] = 1;
            misses_ += 1;
        } else {
            hits_ += 1;
        }
        return values_[i];
    }

    long hits() const { return hits_; }
    long misses() const { return misses_; }

private:
    const ModelProblem& model_;
    std::vector<std::vector<double>> samples_;
    std::vector<double> values_;
    std::vector<char> ready_;
    long hits_ = 0;
    long misses_ = 0;
};

/// Root-mean-square difference between two evaluators over a sample set.
inline double l2_error(const std::function<double(std::span<const double>)>& candidate,
                       const std::function<double(std::span<const double>)>& reference,
                       const std::vector<std::vector<double>>& samples) {
    if (samples.empty()) throw std::invalid_argument("l2_error: empty sample set");
    double acc = 0.0;
    for (const auto& xi : samples) {
        double d = candidate(xi) - reference(xi);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(samples.size()));
}

/// Least-squares convergence rate over the last `window` records of one
/// variant curve: the negated slope of log(error) against log(cost).
inline double fit_rate(const std::vector<StudyRecord>& curve, int window = 4) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : curve)
        if (r.cost > 0.0 && r.l2_error > 0.0)
            pts.emplace_back(std::log(r.cost), std::log(r.l2_error));
    if (static_cast<int>(pts.size()) > window)
        pts.erase(pts.begin(), pts.end() - window);
    if (pts.size() < 2) throw std::invalid_argument("fit_rate: need at least two records");
    double mx = 0, my = 0;
    for (auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxx = 0, sxy = 0;
    for (auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_rate: records share one cost");
    return -sxy / sxx;
}

/// Configuration of a cost-versus-error study.
struct StudyConfig {
    std::vector<Strategy> strategies = {Strategy::DimSurplus};
    std::vector<double> checkpoints = {8, 16, 32, 64, 128};
    /// Which approximations to measure: the plain surrogate J_hn, the
    /// residual-corrected J_n_eps, and/or the enhanced J_nm_eps.
    std::vector<std::string> variants = {"J_hn", "J_n_eps", "J_nm_eps"};
    int validation_samples = 2000;
    std::uint64_t seed = 0;
    double tolerance = 0.0;
    int max_level = 12;
    EnhancedOptions::TauRule tau_rule = EnhancedOptions::TauRule::MaxDeltaGammaSq;
};

struct StudyResult {
    std::vector<StudyRecord> records;
    std::vector<StudyWarning> warnings;
    long cache_hits = 0;
    long cache_misses = 0;
};

inline std::vector<StudyRecord> filter_variant(const std::vector<StudyRecord>& records,
                                               const std::string& variant) {
    std::vector<StudyRecord> out;
    for (const auto& r : records)
        if (r.variant == variant) out.push_back(r);
    return out;
}

/// Write records as CSV with a fixed `%.17g` format so files are reproducible
/// bit for bit.
inline void write_csv(std::ostream& os, const std::vector<StudyRecord>& records) {
    os << "variant,cost,l2_error\n";
    char buf[128];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", r.cost, r.l2_error);
        os << r.variant << buf;
    }
}

namespace detail {

inline bool wants(const StudyConfig& cfg, const std::string& v) {
    for (const auto& s : cfg.variants)
        if (s == v) return true;
    return false;
}

} // namespace detail

/// Run the full comparison for one model: for every strategy, grow the plain
/// and corrected surrogates through the checkpoint budgets and rebuild the
/// enhanced surrogate at each checkpoint, measuring the validation error of
/// each against cached reference solves. Checkpoints below the cost of the
/// root evaluation are skipped with a warning record.
inline StudyResult run_study(const ModelProblem& model, const StudyConfig& cfg,
                             std::ostream* log = nullptr) {
    StudyResult out;
    ReferenceCache cache(model, lhs_sample(cfg.validation_samples, model.dimension(), cfg.seed));

    auto validate = [&](const std::function<double(std::span<const double>)>& f) {
        double acc = 0.0;
        for (std::size_t i = 0; i < cache.samples().size(); ++i) {
            double d = f(cache.samples()[i]) - cache.value(static_cast<int>(i));
            acc += d * d;
        }
        return std::sqrt(acc / static_cast<double>(cache.samples().size()));
    };

    auto warn = [&](const std::string& variant, double checkpoint, const std::string& msg) {
        out.warnings.push_back({variant, checkpoint, msg});
        if (log) *log << "warning: " << variant << " at checkpoint " << checkpoint << ": "
                      << msg << "\n";
    };

    for (Strategy strategy : cfg.strategies) {
        std::string tag = ":" + to_string(strategy);
        bool apost = uses_aposteriori(strategy);

        // Plain surrogate J_hn, grown incrementally through the checkpoints.
        if (detail::wants(cfg, "J_hn")) {
            std::string name = "J_hn" + tag;
            double min_cost = apost ? 2.0 : 1.0;
            RefinementConfig rc;
            rc.strategy = strategy;
            rc.budget = 0.0;
            rc.tolerance = cfg.tolerance;
            rc.max_level = cfg.max_level;
            AdaptiveDriver driver(model, rc);
            for (double c : cfg.checkpoints) {
                if (c < min_cost) {
                    warn(name, c, "below minimum feasible cost");
                    continue;
                }
                driver.run_until(c);
                double err = validate([&](std::span<const double> xi) {
                    return driver.surrogate().interpolate_component(xi, 0);
                });
                out.records.push_back({name, driver.ledger().total(), err});
            }
        }

        // Residual-corrected surrogate J_n_eps: needs state fields, so for
        // surplus strategies it is a separate (twice as expensive per point)
        // build; a posteriori builds carry fields already.
        if (detail::wants(cfg, "J_n_eps")) {
            std::string name = "J_n_eps" + tag;
            RefinementConfig rc;
            rc.strategy = strategy;
            rc.budget = 0.0;
            rc.tolerance = cfg.tolerance;
            rc.max_level = cfg.max_level;
            rc.with_fields = true;
            AdaptiveDriver driver(model, rc);
            for (double c : cfg.checkpoints) {
                if (c < 2.0) {
                    warn(name, c, "below minimum feasible cost");
                    continue;
                }
                driver.run_until(c);
                double err = validate([&](std::span<const double> xi) {
                    return eval_enhanced_direct(driver.surrogate(), model, xi, nullptr);
                });
                out.records.push_back({name, driver.ledger().total(), err});
            }
        }

        // Enhanced surrogate J_nm_eps: full two-phase build per checkpoint.
        if (detail::wants(cfg, "J_nm_eps")) {
            std::string name = "J_nm_eps" + tag;
            for (double c : cfg.checkpoints) {
                if (c < 4.0) {
                    warn(name, c, "below minimum feasible cost");
                    continue;
                }
                EnhancedOptions opts;
                opts.budget = c;
                opts.strategy = strategy;
                opts.tolerance = cfg.tolerance;
                opts.max_level = cfg.max_level;
                opts.tau_rule = cfg.tau_rule;
                EnhancedResult result = enhanced_interp(model, opts);
                double err = validate([&](std::span<const double> xi) {
                    return result.enhanced.interpolate_component(xi, 0);
                });
                out.records.push_back({name, result.ledger.total(), err});
            }
        }
    }
    out.cache_hits = cache.hits();
    out.cache_misses = cache.misses();
    return out;
}

} // namespace sguq
