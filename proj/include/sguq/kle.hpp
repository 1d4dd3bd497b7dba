#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

namespace sguq {

/// Karhunen-Loeve expansion setup of a one-dimensional Gaussian-type random
/// field on [0, 1].
struct KleConfig {
    int modes = 25;                  ///< d, number of retained modes
    double correlation_length = 0.1; ///< l_c in exp(-(x1-x2)^2 / (2 l_c))
    double amplitude = 1.0;          ///< sigma multiplying the expansion
    double mean = 0.0;               ///< constant mean of the exponent
    int nodes = 401;                 ///< Nystrom discretization nodes
};

/// Truncated Karhunen-Loeve representation
///   g(x; t) = mean + amplitude * sum_k sqrt(lambda_k) phi_k(x) t_k
/// with t in [-1, 1]^d. Eigenpairs come from a Nystrom discretization of the
/// covariance operator on uniform nodes with equal weights 1/N, so the
/// discrete trace matches the continuous one (C(x,x) = 1) exactly.
struct KleField {
    KleConfig config;
    Eigen::VectorXd nodes;          ///< N quadrature nodes on [0, 1]
    Eigen::VectorXd eigenvalues;    ///< top d, descending
    Eigen::MatrixXd eigenfunctions; ///< N x d nodal values, sum_j phi^2 / N = 1
    double eigenvalue_sum_all = 0.0;

    int num_modes() const { return config.modes; }

    double covariance(double x1, double x2) const {
        double dx = x1 - x2;
        return std::exp(-dx * dx / (2.0 * config.correlation_length));
    }

    /// phi_k at arbitrary x by linear interpolation between nodes.
    double eigenfunction(int k, double x) const {
        int n = static_cast<int>(nodes.size());
        double s = x * (n - 1);
        int j = static_cast<int>(s);
        if (j < 0) j = 0;
        if (j > n - 2) j = n - 2;
        double theta = s - j;
        return (1.0 - theta) * eigenfunctions(j, k) + theta * eigenfunctions(j + 1, k);
    }

    /// Exponent g(x; t) of the field, t in [-1, 1]^d.
    double exponent(double x, std::span<const double> t) const {
        if (static_cast<int>(t.size()) != config.modes)
            throw std::invalid_argument("KleField::exponent: wrong number of coefficients");
        int n = static_cast<int>(nodes.size());
        double s = x * (n - 1);
        int j = static_cast<int>(s);
        if (j < 0) j = 0;
        if (j > n - 2) j = n - 2;
        double theta = s - j;
        double acc = 0.0;
        for (int k = 0; k < config.modes; ++k) {
            double phi = (1.0 - theta) * eigenfunctions(j, k) + theta * eigenfunctions(j + 1, k);
            acc += std::sqrt(eigenvalues(k)) * phi * t[k];
        }
        return config.mean + config.amplitude * acc;
    }
};

/// Solve the Nystrom eigenproblem and keep the top `config.modes` pairs.
/// Eigenfunctions are normalized to sum_j phi_j^2 / N = 1 and signed so their
/// first non-negligible nodal value is positive.
inline KleField build_kle(const KleConfig& config) {
    if (config.modes < 1 || config.nodes < config.modes)
        throw std::invalid_argument("build_kle: need 1 <= modes <= nodes");
    int n = config.nodes;
    KleField field;
    field.config = config;
    field.nodes = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);

    // Symmetrized Nystrom matrix W^{1/2} K W^{1/2} with uniform weights 1/N.
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = field.covariance(field.nodes(i), field.nodes(j)) / n;
            a(i, j) = v;
            a(j, i) = v;
        }
    field.eigenvalue_sum_all = a.trace();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("build_kle: eigensolver failed");

    field.eigenvalues.resize(config.modes);
    field.eigenfunctions.resize(n, config.modes);
    double sqrt_n = std::sqrt(static_cast<double>(n));
    for (int k = 0; k < config.modes; ++k) {
        int src = n - 1 - k; // solver orders ascending
        // trailing eigenvalues of the smooth kernel sit at machine zero and
        // may come out marginally negative; clamp before the square root
        field.eigenvalues(k) = std::max(solver.eigenvalues()(src), 0.0);
        Eigen::VectorXd phi = solver.eigenvectors().col(src) * sqrt_n;
        for (int j = 0; j < n; ++j) {
            if (std::abs(phi(j)) > 1e-12 * sqrt_n) {
                if (phi(j) < 0.0) phi = -phi;
                break;
            }
        }
        field.eigenfunctions.col(k) = phi;
    }
    return field;
}

} // namespace sguq
