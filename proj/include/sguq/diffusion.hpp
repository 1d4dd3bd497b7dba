#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>

#include "gauss.hpp"
#include "kle.hpp"
#include "model.hpp"

namespace sguq {

/// One-dimensional heterogeneous diffusion problem on [0, 1]:
///   -(a(x; xi) z')' = f,   z(0) = z(1) = 0,
/// with log-diffusivity given by a truncated Karhunen-Loeve field and a
/// Gaussian-bump quantity of interest J = int psi z dx, int psi dx = 1.
struct DiffusionConfig {
    int elements = 100;
    KleConfig kle;               ///< kle.modes is the parameter dimension d
    double source = 10.0;        ///< constant right-hand side f
    double qoi_center = 0.5;     ///< psi(x) ~ exp(-qoi_sharpness (x - center)^2)
    double qoi_sharpness = 100.0;
    double cost_ratio = 25.0;    ///< solve cost relative to one residual evaluation
};

/// Parameters xi live in [0,1]^d and are mapped to t = 2 xi - 1 before entering
/// the field exponent, so the diffusivity is a(x; xi) = exp(g(x; 2 xi - 1)).
///
/// The forward state is linear finite elements (nodal values, size N_e + 1);
/// the adjoint is quadratic finite elements on the same mesh (size 2 N_e + 1).
/// Stiffness, load, QoI, and residual all use the same per-element 5-point
/// Gauss rule, which keeps Galerkin orthogonality exact in floating point.
class DiffusionModel : public ModelProblem {
public:
    explicit DiffusionModel(DiffusionConfig config)
        : DiffusionModel(config, std::make_shared<KleField>(build_kle(config.kle))) {}

    /// Shares a prebuilt field, e.g. between coarse- and fine-mesh variants.
    DiffusionModel(DiffusionConfig config, std::shared_ptr<const KleField> field)
        : cfg_(config), field_(std::move(field)) {
        if (cfg_.elements < 2) throw std::invalid_argument("DiffusionModel: need >= 2 elements");
        if (field_->num_modes() != cfg_.kle.modes)
            throw std::invalid_argument("DiffusionModel: field does not match config");
        precompute();
    }

    int dimension() const override { return cfg_.kle.modes; }
    int forward_size() const override { return cfg_.elements + 1; }
    int adjoint_size() const override { return 2 * cfg_.elements + 1; }
    double cost_ratio() const override { return cfg_.cost_ratio; }
    const DiffusionConfig& config() const { return cfg_; }
    const KleField& field() const { return *field_; }
    double qoi_normalization() const { return psi_scale_; }

    double qoi_weight(double x) const {
        double dx = x - cfg_.qoi_center;
        return psi_scale_ * std::exp(-cfg_.qoi_sharpness * dx * dx);
    }

    double diffusivity(double x, std::span<const double> xi) const {
        std::vector<double> t(xi.size());
        for (std::size_t k = 0; k < xi.size(); ++k) t[k] = 2.0 * xi[k] - 1.0;
        return std::exp(field_->exponent(x, t));
    }

    ModelEval solve(std::span<const double> xi, bool with_adjoint) const override {
        Eigen::VectorXd a = diffusivity_at_quad(xi);
        ModelEval eval;
        eval.forward = solve_forward_with(a);
        eval.qoi = qoi_of_forward(eval.forward);
        if (with_adjoint) eval.adjoint = solve_adjoint_with(a);
        return eval;
    }

    Eigen::VectorXd solve_forward(std::span<const double> xi) const {
        return solve_forward_with(diffusivity_at_quad(xi));
    }

    Eigen::VectorXd solve_adjoint(std::span<const double> xi) const {
        return solve_adjoint_with(diffusivity_at_quad(xi));
    }

    /// J_h = int psi z_h dx for a forward nodal vector.
    double qoi_of_forward(const Eigen::VectorXd& z) const {
        if (z.size() != forward_size())
            throw std::invalid_argument("qoi_of_forward: wrong state size");
        int ng = static_cast<int>(ref_nodes_.size());
        double acc = 0.0;
        for (int e = 0; e < cfg_.elements; ++e)
            for (int g = 0; g < ng; ++g) {
                double u = ref_nodes_[g];
                double zg = (1.0 - u) * z(e) + u * z(e + 1);
                acc += ref_weights_[g] * h_ * psi_quad_(e * ng + g) * zg;
            }
        return acc;
    }

    /// Adjoint-weighted residual estimate of J(xi) - J_h(xi):
    ///   eps = int f phi dx - int a z' phi' dx
    /// with z the (possibly interpolated) forward state and phi the adjoint.
    double error_estimate(const Eigen::VectorXd& forward, const Eigen::VectorXd& adjoint,
                          std::span<const double> xi) const override {
        if (forward.size() != forward_size() || adjoint.size() != adjoint_size())
            throw std::invalid_argument("error_estimate: wrong state sizes");
        Eigen::VectorXd a = diffusivity_at_quad(xi);
        int ng = static_cast<int>(ref_nodes_.size());
        double acc = 0.0;
        for (int e = 0; e < cfg_.elements; ++e) {
            double dz = (forward(e + 1) - forward(e)) / h_;
            double p0 = adjoint(2 * e), p1 = adjoint(2 * e + 1), p2 = adjoint(2 * e + 2);
            for (int g = 0; g < ng; ++g) {
                double u = ref_nodes_[g];
                double phi = p0 * (1.0 - u) * (1.0 - 2.0 * u) + p1 * 4.0 * u * (1.0 - u) +
                             p2 * u * (2.0 * u - 1.0);
                double dphi = (p0 * (4.0 * u - 3.0) + p1 * (4.0 - 8.0 * u) +
                               p2 * (4.0 * u - 1.0)) / h_;
                acc += ref_weights_[g] * h_ *
                       (cfg_.source * phi - a(e * ng + g) * dz * dphi);
            }
        }
        return acc;
    }

private:
    void precompute() {
        h_ = 1.0 / cfg_.elements;
        const QuadratureRule& rule = gauss_legendre(5);
        ref_nodes_ = rule.nodes;
        ref_weights_ = rule.weights;
        int ng = static_cast<int>(ref_nodes_.size());
        int nq = cfg_.elements * ng;

        // psi normalization on a fixed fine composite rule, independent of the
        // model mesh so coarse and fine variants share the same QoI weight.
        double psi_mass = 0.0;
        int fine = 2000;
        for (int e = 0; e < fine; ++e)
            for (int g = 0; g < ng; ++g) {
                double x = (e + ref_nodes_[g]) / fine;
                double dx = x - cfg_.qoi_center;
                psi_mass += ref_weights_[g] / fine * std::exp(-cfg_.qoi_sharpness * dx * dx);
            }
        psi_scale_ = 1.0 / psi_mass;

        quad_x_.resize(nq);
        psi_quad_.resize(nq);
        for (int e = 0; e < cfg_.elements; ++e)
            for (int g = 0; g < ng; ++g) {
                double x = (e + ref_nodes_[g]) * h_;
                quad_x_(e * ng + g) = x;
                psi_quad_(e * ng + g) = qoi_weight(x);
            }

        // B(q, k) = sqrt(lambda_k) phi_k(x_q): one matrix-vector product per
        // solve turns the parameter vector into the log-field at all
        // quadrature points.
        int d = cfg_.kle.modes;
        modes_quad_.resize(nq, d);
        for (int q = 0; q < nq; ++q)
            for (int k = 0; k < d; ++k)
                modes_quad_(q, k) =
                    std::sqrt(field_->eigenvalues(k)) * field_->eigenfunction(k, quad_x_(q));
    }

    Eigen::VectorXd diffusivity_at_quad(std::span<const double> xi) const {
        if (static_cast<int>(xi.size()) != dimension())
            throw std::invalid_argument("DiffusionModel: wrong parameter dimension");
        Eigen::VectorXd t(xi.size());
        for (std::size_t k = 0; k < xi.size(); ++k) t(k) = 2.0 * xi[k] - 1.0;
        Eigen::VectorXd g = modes_quad_ * t;
        Eigen::VectorXd a(g.size());
        for (int q = 0; q < g.size(); ++q)
            a(q) = std::exp(field_->config.mean + field_->config.amplitude * g(q));
        return a;
    }

    Eigen::VectorXd solve_forward_with(const Eigen::VectorXd& a) const {
        int n = cfg_.elements;
        int ng = static_cast<int>(ref_nodes_.size());
        // Interior P1 system, tridiagonal; solved by the Thomas algorithm.
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(n - 1);
        Eigen::VectorXd off = Eigen::VectorXd::Zero(n - 2);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n - 1);
        for (int e = 0; e < n; ++e) {
            double ka = 0.0;
            for (int g = 0; g < ng; ++g) ka += ref_weights_[g] * a(e * ng + g);
            ka /= h_; // int_e a dx / h^2
            // element nodes e, e+1 -> interior unknowns e-1, e
            if (e >= 1) diag(e - 1) += ka;
            if (e <= n - 2) diag(e) += ka;
            if (e >= 1 && e <= n - 2) off(e - 1) -= ka;
            for (int g = 0; g < ng; ++g) {
                double w = ref_weights_[g] * h_ * cfg_.source;
                if (e >= 1) rhs(e - 1) += w * (1.0 - ref_nodes_[g]);
                if (e <= n - 2) rhs(e) += w * ref_nodes_[g];
            }
        }
        Eigen::VectorXd c(n - 1), dvec(n - 1);
        c(0) = diag(0);
        dvec(0) = rhs(0);
        for (int i = 1; i < n - 1; ++i) {
            double m = off(i - 1) / c(i - 1);
            c(i) = diag(i) - m * off(i - 1);
            dvec(i) = rhs(i) - m * dvec(i - 1);
        }
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n + 1);
        z(n - 1) = dvec(n - 2) / c(n - 2);
        for (int i = n - 3; i >= 0; --i)
            z(i + 1) = (dvec(i) - off(i) * z(i + 2)) / c(i);
        return z;
    }

    Eigen::VectorXd solve_adjoint_with(const Eigen::VectorXd& a) const {
        int n = cfg_.elements;
        int ng = static_cast<int>(ref_nodes_.size());
        int nn = 2 * n + 1;
        int interior = nn - 2;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(9 * n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(interior);
        for (int e = 0; e < n; ++e) {
            int nodes[3] = {2 * e, 2 * e + 1, 2 * e + 2};
            double k[3][3] = {};
            double l[3] = {};
            for (int g = 0; g < ng; ++g) {
                double u = ref_nodes_[g];
                double shape[3] = {(1.0 - u) * (1.0 - 2.0 * u), 4.0 * u * (1.0 - u),
                                   u * (2.0 * u - 1.0)};
                double grad[3] = {4.0 * u - 3.0, 4.0 - 8.0 * u, 4.0 * u - 1.0};
                double wq = ref_weights_[g] * h_;
                double aq = a(e * ng + g);
                for (int i = 0; i < 3; ++i) {
                    l[i] += wq * psi_quad_(e * ng + g) * shape[i];
                    for (int j = 0; j < 3; ++j)
                        k[i][j] += wq * aq * grad[i] * grad[j] / (h_ * h_);
                }
            }
            for (int i = 0; i < 3; ++i) {
                int gi = nodes[i] - 1; // interior numbering skips node 0
                if (gi < 0 || gi >= interior) continue;
                rhs(gi) += l[i];
                for (int j = 0; j < 3; ++j) {
                    int gj = nodes[j] - 1;
                    if (gj < 0 || gj >= interior) continue;
                    trip.emplace_back(gi, gj, k[i][j]);
                }
            }
        }
        Eigen::SparseMatrix<double> mat(interior, interior);
        mat.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(mat);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("DiffusionModel: adjoint factorization failed");
        Eigen::VectorXd sol = solver.solve(rhs);
        Eigen::VectorXd phi = Eigen::VectorXd::Zero(nn);
        phi.segment(1, interior) = sol;
        return phi;
    }

    DiffusionConfig cfg_;
    std::shared_ptr<const KleField> field_;
    double h_ = 0.0;
    double psi_scale_ = 1.0;
    std::vector<double> ref_nodes_, ref_weights_;
    Eigen::VectorXd quad_x_, psi_quad_;
    Eigen::MatrixXd modes_quad_;
};

} // namespace sguq
