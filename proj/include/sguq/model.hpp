#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>

#include "sparse_grid.hpp"

namespace sguq {

/// Work accounting in units of one forward solve. Adjoint solves cost one
/// unit as well; residual-based error estimates cost 1/C where C is the
/// model's solve-to-estimate cost ratio.
struct CostLedger {
    double cost_ratio = 25.0; ///< C
    long forward_solves = 0;
    long adjoint_solves = 0;
    long residual_evals = 0;

    double total() const {
        return static_cast<double>(forward_solves) + static_cast<double>(adjoint_solves) +
               static_cast<double>(residual_evals) / cost_ratio;
    }
};

/// Result of a model solve at one parameter point.
struct ModelEval {
    double qoi = 0.0;
    Eigen::VectorXd forward; ///< discrete forward state (empty if not requested)
    Eigen::VectorXd adjoint; ///< discrete adjoint state (empty if not requested)
};

/// A parametrized forward problem with a scalar quantity of interest and an
/// adjoint-based a posteriori estimate of its discretization error.
///
/// Parameters live in [0,1]^d; models map them to their native ranges
/// internally. Implementations are deterministic and stateless per call.
class ModelProblem {
public:
    virtual ~ModelProblem() = default;

    virtual int dimension() const = 0;
    virtual int forward_size() const = 0;
    virtual int adjoint_size() const = 0;
    /// Cost of one solve relative to one error-estimate evaluation.
    virtual double cost_ratio() const = 0;

    /// Solve at xi; includes the adjoint state if with_adjoint.
    virtual ModelEval solve(std::span<const double> xi, bool with_adjoint) const = 0;

    /// Residual-weighted estimate of J(xi) - J_h(xi) from (possibly
    /// interpolated) forward and adjoint states.
    virtual double error_estimate(const Eigen::VectorXd& forward,
                                  const Eigen::VectorXd& adjoint,
                                  std::span<const double> xi) const = 0;

    /// Payload layout produced by solve(): QoI alone or QoI + both states.
    PayloadSchema schema(bool with_fields) const {
        if (!with_fields) return PayloadSchema{};
        return PayloadSchema{forward_size(), adjoint_size()};
    }

    /// Flatten a solve into the payload layout of schema(with_fields).
    Eigen::VectorXd payload(const ModelEval& eval, bool with_fields) const {
        PayloadSchema s = schema(with_fields);
        Eigen::VectorXd v(s.total());
        v(0) = eval.qoi;
        if (with_fields) {
            if (eval.forward.size() != s.forward_size || eval.adjoint.size() != s.adjoint_size)
                throw std::logic_error("model returned states of unexpected size");
            v.segment(1, s.forward_size) = eval.forward;
            v.segment(1 + s.forward_size, s.adjoint_size) = eval.adjoint;
        }
        return v;
    }
};

/// Adapter exposing a plain function as a QoI-only model; used in tests and
/// as the phase-2 target of the enhanced surrogate.
class CallableModel : public ModelProblem {
public:
    CallableModel(int dim, std::function<double(std::span<const double>)> f,
                  double cost_ratio = 25.0)
        : dim_(dim), f_(std::move(f)), cost_ratio_(cost_ratio) {}

    int dimension() const override { return dim_; }
    int forward_size() const override { return 0; }
    int adjoint_size() const override { return 0; }
    double cost_ratio() const override { return cost_ratio_; }

    ModelEval solve(std::span<const double> xi, bool with_adjoint) const override {
        if (with_adjoint)
            throw std::logic_error("CallableModel has no adjoint state");
        return ModelEval{f_(xi), {}, {}};
    }

    double error_estimate(const Eigen::VectorXd&, const Eigen::VectorXd&,
                          std::span<const double>) const override {
        throw std::logic_error("CallableModel has no error estimate");
    }

private:
    int dim_;
    std::function<double(std::span<const double>)> f_;
    double cost_ratio_;
};

} // namespace sguq
