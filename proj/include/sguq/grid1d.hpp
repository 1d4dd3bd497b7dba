#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "gauss.hpp"

namespace sguq {

/// Families of nested one-dimensional point sets on [0, 1].
///
/// Level 0 holds the single point {0.5}; level l >= 1 holds 2^l + 1 points.
/// Each level extends the previous one, so a point introduced at level l is
/// identified by (l, i) with i running over the points new at that level:
/// 1 point at level 0, 2 at level 1, 2^(l-1) at level l >= 2.
enum class RuleKind {
    ClenshawCurtis,     ///< Chebyshev-Gauss-Lobatto abscissas
    EquidistantDyadic,  ///< dyadic midpoints, x = j * 2^-l
};

/// Hierarchical basis attached to the new points of each level.
enum class BasisKind {
    HierarchicalLagrange, ///< global polynomials on the full level-l point set
    HierarchicalHat,      ///< local piecewise-linear bumps of width 2^-l
};

inline std::string to_string(RuleKind r) {
    return r == RuleKind::ClenshawCurtis ? "clenshaw_curtis" : "equidistant_dyadic";
}

inline std::string to_string(BasisKind b) {
    return b == BasisKind::HierarchicalLagrange ? "hierarchical_lagrange" : "hierarchical_hat";
}

inline RuleKind rule_from_string(const std::string& s) {
    if (s == "clenshaw_curtis") return RuleKind::ClenshawCurtis;
    if (s == "equidistant_dyadic") return RuleKind::EquidistantDyadic;
    throw std::invalid_argument("unknown rule kind: " + s);
}

inline BasisKind basis_from_string(const std::string& s) {
    if (s == "hierarchical_lagrange") return BasisKind::HierarchicalLagrange;
    if (s == "hierarchical_hat") return BasisKind::HierarchicalHat;
    throw std::invalid_argument("unknown basis kind: " + s);
}

/// Number of points in the full level-l set: 1, 3, 5, 9, 17, ...
inline int level_point_count(int level) {
    if (level < 0) throw std::invalid_argument("negative level");
    return level == 0 ? 1 : (1 << level) + 1;
}

/// Number of points first appearing at level l: 1, 2, 2, 4, 8, ...
inline int new_point_count(int level) {
    if (level < 0) throw std::invalid_argument("negative level");
    if (level == 0) return 1;
    if (level == 1) return 2;
    return 1 << (level - 1);
}

namespace detail {

inline void check_new_index(int level, int index, const char* where) {
    if (level < 0 || index < 0 || index >= new_point_count(level))
        throw std::invalid_argument(std::string(where) + ": invalid hierarchical index (" +
                                    std::to_string(level) + ", " + std::to_string(index) + ")");
}

// Position of new point (l, i) within the full level-l set, both rules.
// Level 0: the center; level 1: the two endpoints; level >= 2: the odd slots.
inline int new_to_full_slot(int level, int index) {
    if (level == 0) return 0;
    if (level == 1) return index == 0 ? 0 : 2;
    return 2 * index + 1;
}

inline double cc_coord_at_slot(int level, int slot) {
    if (level == 0) return 0.5;
    int m = 1 << level;
    // sin^2 form of (1 - cos(pi j / m)) / 2; mirror the upper half so the
    // set is symmetric to the last bit and the endpoints are exact.
    if (2 * slot > m) return 1.0 - cc_coord_at_slot(level, m - slot);
    if (2 * slot == m) return 0.5;
    double s = std::sin(M_PI * slot / (2.0 * m));
    return s * s;
}

inline double dyadic_coord_at_slot(int level, int slot) {
    if (level == 0) return 0.5;
    return std::ldexp(static_cast<double>(slot), -level);
}

inline double coord_at_slot(RuleKind rule, int level, int slot) {
    return rule == RuleKind::ClenshawCurtis ? cc_coord_at_slot(level, slot)
                                            : dyadic_coord_at_slot(level, slot);
}

} // namespace detail

/// Full level-l point set in ascending order.
inline std::vector<double> level_points(RuleKind rule, int level) {
    int n = level_point_count(level);
    std::vector<double> pts(n);
    for (int j = 0; j < n; ++j) pts[j] = detail::coord_at_slot(rule, level, j);
    return pts;
}

/// Coordinate of the point new at (level, index), index in [0, new_point_count).
inline double new_point_coord(RuleKind rule, int level, int index) {
    detail::check_new_index(level, index, "new_point_coord");
    return detail::coord_at_slot(rule, level, detail::new_to_full_slot(level, index));
}

/// All points new at the given level, ascending in index (and coordinate).
inline std::vector<double> new_points(RuleKind rule, int level) {
    int n = new_point_count(level);
    std::vector<double> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = new_point_coord(rule, level, i);
    return pts;
}

namespace detail {

// Barycentric weights of the full level-l set.
// Clenshaw-Curtis: the classical (-1)^j with halved end weights.
// Equidistant: (-1)^j * C(m, j), computed in log space and normalized by the
// central value to postpone overflow; practical up to level ~10.
inline const std::vector<double>& barycentric_weights(RuleKind rule, int level) {
    static std::map<std::pair<int, int>, std::vector<double>> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_pair(static_cast<int>(rule), level);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    int n = level_point_count(level);
    std::vector<double> w(n);
    if (n == 1) {
        w[0] = 1.0;
    } else if (rule == RuleKind::ClenshawCurtis) {
        for (int j = 0; j < n; ++j) {
            w[j] = (j % 2 == 0) ? 1.0 : -1.0;
            if (j == 0 || j == n - 1) w[j] *= 0.5;
        }
    } else {
        if (level > 10)
            throw std::invalid_argument(
                "equidistant Lagrange weights overflow beyond level 10");
        int m = n - 1;
        double lg_center = std::lgamma(m + 1.0) - 2.0 * std::lgamma(m / 2 + 1.0);
        for (int j = 0; j < n; ++j) {
            double lg = std::lgamma(m + 1.0) - std::lgamma(j + 1.0) - std::lgamma(m - j + 1.0);
            w[j] = ((j % 2 == 0) ? 1.0 : -1.0) * std::exp(lg - lg_center);
        }
    }
    return cache.emplace(key, std::move(w)).first->second;
}

inline double hat_eval(int level, int index, double x) {
    if (level == 0) return 1.0;
    if (level == 1) {
        double v = index == 0 ? 1.0 - 2.0 * x : 2.0 * x - 1.0;
        return v > 0.0 ? v : 0.0;
    }
    double h = std::ldexp(1.0, -level);
    double c = (2.0 * index + 1.0) * h;
    double v = 1.0 - std::abs(x - c) / h;
    return v > 0.0 ? v : 0.0;
}

} // namespace detail

/// Evaluate the hierarchical basis functions of every point new at `level`
/// at location x, writing new_point_count(level) values into `out`.
///
/// The Lagrange variant interpolates on the full level-l set and is computed
/// for all new points at once via the barycentric form, so batched evaluation
/// costs O(2^l) total rather than O(4^l).
inline void eval_new_bases(RuleKind rule, BasisKind basis, int level, double x,
                           double* out) {
    int count = new_point_count(level);
    if (basis == BasisKind::HierarchicalHat) {
        for (int i = 0; i < count; ++i) out[i] = detail::hat_eval(level, i, x);
        return;
    }
    if (level == 0) {
        out[0] = 1.0;
        return;
    }
    int n = level_point_count(level);
    const auto& w = detail::barycentric_weights(rule, level);
    // Exact hit on a grid point: the cardinal property decides.
    for (int j = 0; j < n; ++j) {
        if (x == detail::coord_at_slot(rule, level, j)) {
            for (int i = 0; i < count; ++i)
                out[i] = (detail::new_to_full_slot(level, i) == j) ? 1.0 : 0.0;
            return;
        }
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j)
        denom += w[j] / (x - detail::coord_at_slot(rule, level, j));
    for (int i = 0; i < count; ++i) {
        int j = detail::new_to_full_slot(level, i);
        out[i] = w[j] / ((x - detail::coord_at_slot(rule, level, j)) * denom);
    }
}

/// Single hierarchical basis function (level, index) evaluated at x.
inline double eval_basis(RuleKind rule, BasisKind basis, int level, int index, double x) {
    detail::check_new_index(level, index, "eval_basis");
    if (basis == BasisKind::HierarchicalHat) return detail::hat_eval(level, index, x);
    std::vector<double> vals(new_point_count(level));
    eval_new_bases(rule, basis, level, x, vals.data());
    return vals[index];
}

namespace detail {

inline const std::vector<double>& basis_weights_cached(RuleKind rule, BasisKind basis,
                                                       int level) {
    static std::map<std::tuple<int, int, int>, std::vector<double>> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_tuple(static_cast<int>(rule), static_cast<int>(basis), level);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    int count = new_point_count(level);
    std::vector<double> w(count);
    if (basis == BasisKind::HierarchicalHat) {
        // Closed forms: the constant has mass 1, the level-1 ramps 1/4,
        // interior triangles of half-width 2^-l have mass 2^-l.
        double v = level == 0 ? 1.0 : (level == 1 ? 0.25 : std::ldexp(1.0, -level));
        for (int i = 0; i < count; ++i) w[i] = v;
    } else {
        // Integrate the degree-2^l polynomials exactly: 2^(l-1)+1 Gauss points.
        int ng = level == 0 ? 1 : (1 << (level - 1)) + 1;
        const auto& rulegl = gauss_legendre(ng);
        std::vector<double> vals(count);
        for (int g = 0; g < ng; ++g) {
            eval_new_bases(rule, basis, level, rulegl.nodes[g], vals.data());
            for (int i = 0; i < count; ++i) w[i] += rulegl.weights[g] * vals[i];
        }
    }
    return cache.emplace(key, std::move(w)).first->second;
}

} // namespace detail

/// Integral over [0, 1] of the hierarchical basis function (level, index).
inline double basis_weight(RuleKind rule, BasisKind basis, int level, int index) {
    detail::check_new_index(level, index, "basis_weight");
    return detail::basis_weights_cached(rule, basis, level)[index];
}

/// Dyadic ancestry for local refinement. Identifies points by their (level,
/// index) in the EquidistantDyadic numbering: 0.5 is the root, the endpoints
/// are its children, 0.25/0.75 the only children of the endpoints, and every
/// interior point x at level l >= 2 has children x -+ 2^-(l+1).
struct Lineage {
    /// Parent of (level, index); level must be >= 1.
    static std::pair<int, int> parent(int level, int index) {
        detail::check_new_index(level, index, "Lineage::parent");
        if (level == 0) throw std::invalid_argument("root has no parent");
        if (level == 1) return {0, 0};
        if (level == 2) return {1, index};
        // x = (2i+1) 2^-l; the dyadic neighbour that is new at level l-1.
        int m = (index % 2 == 1) ? index : index + 1;
        return {level - 1, (m - 1) / 2};
    }

    /// Children of (level, index): two for the root and interior points,
    /// one for each endpoint.
    static std::vector<std::pair<int, int>> children(int level, int index) {
        detail::check_new_index(level, index, "Lineage::children");
        if (level == 0) return {{1, 0}, {1, 1}};
        if (level == 1) return {{2, index}};
        return {{level + 1, 2 * index}, {level + 1, 2 * index + 1}};
    }
};

} // namespace sguq
