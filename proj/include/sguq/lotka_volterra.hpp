#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "model.hpp"

namespace sguq {

/// Competitive three-species Lotka-Volterra system on [0, T]:
///   dz_i/dt = r_i z_i (1 - sum_j alpha_ij z_j),   z(0) = z_init,
/// with unit self-competition. The nine parameters are the growth rates and
/// the off-diagonal interaction coefficients, each mapped affinely from
/// [0, 1] to [param_low, param_high] in the order
///   (r1, r2, r3, a12, a13, a21, a23, a31, a32).
/// The quantity of interest is the third population at the final time.
struct LotkaVolterraConfig {
    int steps = 1000;
    double horizon = 10.0;
    double z_init = 0.5;
    double alpha_diag = 1.0;
    double param_low = 0.3;
    double param_high = 0.7;
    double cost_ratio = 25.0;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    int newton_max_halvings = 10;
};

struct LVParams {
    Eigen::Vector3d r;
    Eigen::Matrix3d alpha;
};

/// Thrown when the damped Newton iteration of a backward-Euler step fails.
struct NewtonDivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Forward integration is backward Euler with a damped Newton solve per step;
/// the adjoint runs backward with the trapezoidal rule. States are full
/// trajectories flattened time-major: (z_1, z_2, z_3) at t_0, t_1, ..., t_N.
class LotkaVolterraModel : public ModelProblem {
public:
    explicit LotkaVolterraModel(LotkaVolterraConfig config = {}) : cfg_(config) {
        if (cfg_.steps < 1) throw std::invalid_argument("LotkaVolterraModel: steps >= 1");
    }

    int dimension() const override { return 9; }
    int forward_size() const override { return 3 * (cfg_.steps + 1); }
    int adjoint_size() const override { return 3 * (cfg_.steps + 1); }
    double cost_ratio() const override { return cfg_.cost_ratio; }
    const LotkaVolterraConfig& config() const { return cfg_; }

    LVParams params_from(std::span<const double> xi) const {
        if (xi.size() != 9)
            throw std::invalid_argument("LotkaVolterraModel: expected 9 parameters");
        auto map = [&](double u) { return cfg_.param_low + (cfg_.param_high - cfg_.param_low) * u; };
        LVParams p;
        p.r << map(xi[0]), map(xi[1]), map(xi[2]);
        p.alpha << cfg_.alpha_diag, map(xi[3]), map(xi[4]),
                   map(xi[5]), cfg_.alpha_diag, map(xi[6]),
                   map(xi[7]), map(xi[8]), cfg_.alpha_diag;
        return p;
    }

    static Eigen::Vector3d rhs(const LVParams& p, const Eigen::Vector3d& z) {
        Eigen::Vector3d s = Eigen::Vector3d::Ones() - p.alpha * z;
        return p.r.cwiseProduct(z.cwiseProduct(s));
    }

    static Eigen::Matrix3d jacobian(const LVParams& p, const Eigen::Vector3d& z) {
        Eigen::Vector3d s = Eigen::Vector3d::Ones() - p.alpha * z;
        Eigen::Matrix3d j;
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 3; ++c)
                j(i, c) = p.r(i) * ((i == c ? s(i) : 0.0) - z(i) * p.alpha(i, c));
        return j;
    }

    /// Backward-Euler trajectory, flattened; throws NewtonDivergenceError if a
    /// step does not converge.
    Eigen::VectorXd trajectory(const LVParams& p) const {
        double dt = cfg_.horizon / cfg_.steps;
        Eigen::VectorXd traj(forward_size());
        Eigen::Vector3d z = Eigen::Vector3d::Constant(cfg_.z_init);
        traj.segment<3>(0) = z;
        for (int n = 1; n <= cfg_.steps; ++n) {
            Eigen::Vector3d prev = z;
            auto residual = [&](const Eigen::Vector3d& y) -> Eigen::Vector3d {
                return y - prev - dt * rhs(p, y);
            };
            Eigen::Vector3d res = residual(z);
            bool converged = false;
            for (int it = 0; it < cfg_.newton_max_iter; ++it) {
                if (res.lpNorm<Eigen::Infinity>() < cfg_.newton_tol) {
                    converged = true;
                    break;
                }
                Eigen::Matrix3d jac = Eigen::Matrix3d::Identity() - dt * jacobian(p, z);
                Eigen::Vector3d step = jac.partialPivLu().solve(res);
                double lambda = 1.0;
                double norm0 = res.lpNorm<Eigen::Infinity>();
                int h = 0;
                for (; h <= cfg_.newton_max_halvings; ++h) {
                    Eigen::Vector3d cand = z - lambda * step;
                    Eigen::Vector3d cres = residual(cand);
                    if (cres.lpNorm<Eigen::Infinity>() < norm0) {
                        z = cand;
                        res = cres;
                        break;
                    }
                    lambda *= 0.5;
                }
                if (h > cfg_.newton_max_halvings)
                    throw NewtonDivergenceError(
                        "Newton damping failed at step " + std::to_string(n));
            }
            if (!converged && res.lpNorm<Eigen::Infinity>() >= cfg_.newton_tol)
                throw NewtonDivergenceError(
                    "Newton did not converge at step " + std::to_string(n));
            traj.segment<3>(3 * n) = z;
        }
        return traj;
    }

    /// Trapezoidal backward sweep of -phi' = J_f(z)^T phi, phi(T) = (0,0,1),
    /// along a (possibly interpolated) trajectory.
    Eigen::VectorXd adjoint(const LVParams& p, const Eigen::VectorXd& traj) const {
        if (traj.size() != forward_size())
            throw std::invalid_argument("adjoint: wrong trajectory size");
        double dt = cfg_.horizon / cfg_.steps;
        Eigen::VectorXd adj(adjoint_size());
        Eigen::Vector3d phi(0.0, 0.0, 1.0);
        adj.segment<3>(3 * cfg_.steps) = phi;
        for (int n = cfg_.steps - 1; n >= 0; --n) {
            Eigen::Matrix3d at0 = jacobian(p, traj.segment<3>(3 * n)).transpose();
            Eigen::Matrix3d at1 = jacobian(p, traj.segment<3>(3 * (n + 1))).transpose();
            Eigen::Matrix3d lhs = Eigen::Matrix3d::Identity() - 0.5 * dt * at0;
            Eigen::Vector3d rhsv = (Eigen::Matrix3d::Identity() + 0.5 * dt * at1) * phi;
            phi = lhs.partialPivLu().solve(rhsv);
            adj.segment<3>(3 * n) = phi;
        }
        return adj;
    }

    static double qoi_of(const Eigen::VectorXd& traj) { return traj(traj.size() - 1); }

    ModelEval solve(std::span<const double> xi, bool with_adjoint) const override {
        LVParams p = params_from(xi);
        ModelEval eval;
        eval.forward = trajectory(p);
        eval.qoi = qoi_of(eval.forward);
        if (with_adjoint) eval.adjoint = adjoint(p, eval.forward);
        return eval;
    }

    /// eps = -int_0^T phi . (dz_h/dt - f(z_h)) dt with z_h, phi piecewise
    /// linear in time; two-point Gauss per step. The initial-condition term of
    /// the error representation vanishes because z_h(0) is exact.
    double estimate_from(const LVParams& p, const Eigen::VectorXd& traj,
                         const Eigen::VectorXd& adj) const {
        if (traj.size() != forward_size() || adj.size() != adjoint_size())
            throw std::invalid_argument("estimate_from: wrong state sizes");
        double dt = cfg_.horizon / cfg_.steps;
        const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
        double acc = 0.0;
        for (int n = 0; n < cfg_.steps; ++n) {
            Eigen::Vector3d z0 = traj.segment<3>(3 * n), z1 = traj.segment<3>(3 * (n + 1));
            Eigen::Vector3d f0 = adj.segment<3>(3 * n), f1 = adj.segment<3>(3 * (n + 1));
            Eigen::Vector3d dz = (z1 - z0) / dt;
            for (double u : gp) {
                Eigen::Vector3d zg = (1.0 - u) * z0 + u * z1;
                Eigen::Vector3d pg = (1.0 - u) * f0 + u * f1;
                acc += 0.5 * dt * pg.dot(dz - rhs(p, zg));
            }
        }
        return -acc;
    }

    double error_estimate(const Eigen::VectorXd& forward, const Eigen::VectorXd& adjointv,
                          std::span<const double> xi) const override {
        return estimate_from(params_from(xi), forward, adjointv);
    }

private:
    LotkaVolterraConfig cfg_;
};

} // namespace sguq
