#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "grid1d.hpp"

namespace sguq {

/// Per-dimension hierarchical levels of a tensor subspace.
using MultiIndex = std::vector<int>;

inline int level_sum(const MultiIndex& l) {
    return std::accumulate(l.begin(), l.end(), 0);
}

/// Admissibility of `candidate` with respect to the downward-closed set
/// `accepted`: every backward neighbour candidate - e_k with candidate_k >= 1
/// must already be accepted.
inline bool is_admissible(const std::set<MultiIndex>& accepted, const MultiIndex& candidate) {
    MultiIndex neighbour = candidate;
    for (std::size_t k = 0; k < candidate.size(); ++k) {
        if (candidate[k] == 0) continue;
        neighbour[k] -= 1;
        bool found = accepted.count(neighbour) > 0;
        neighbour[k] += 1;
        if (!found) return false;
    }
    return true;
}

/// A collocation point: per-dimension (level, index) plus its coordinates.
struct GridPoint {
    MultiIndex level;
    std::vector<int> index;
    std::vector<double> coord;

    friend bool operator==(const GridPoint& a, const GridPoint& b) {
        return a.level == b.level && a.index == b.index;
    }
};

inline GridPoint make_grid_point(RuleKind rule, MultiIndex level, std::vector<int> index) {
    if (level.size() != index.size())
        throw std::invalid_argument("make_grid_point: level/index size mismatch");
    GridPoint p{std::move(level), std::move(index), {}};
    p.coord.resize(p.level.size());
    for (std::size_t k = 0; k < p.level.size(); ++k)
        p.coord[k] = new_point_coord(rule, p.level[k], p.index[k]);
    return p;
}

/// All points new to the tensor subspace W_level, in ascending lexicographic
/// order of the index tuple.
inline std::vector<GridPoint> subspace_points(RuleKind rule, const MultiIndex& level) {
    std::size_t d = level.size();
    std::vector<int> radix(d);
    long total = 1;
    for (std::size_t k = 0; k < d; ++k) {
        radix[k] = new_point_count(level[k]);
        total *= radix[k];
    }
    std::vector<GridPoint> pts;
    pts.reserve(total);
    std::vector<int> idx(d, 0);
    for (long c = 0; c < total; ++c) {
        pts.push_back(make_grid_point(rule, level, idx));
        for (int k = static_cast<int>(d) - 1; k >= 0; --k) {
            if (++idx[k] < radix[k]) break;
            idx[k] = 0;
        }
    }
    return pts;
}

/// Layout of the vector of values attached to each collocation point:
/// [ qoi | forward state | adjoint state ], the field blocks optional.
struct PayloadSchema {
    int forward_size = 0;
    int adjoint_size = 0;

    int total() const { return 1 + forward_size + adjoint_size; }
    bool has_fields() const { return forward_size > 0 && adjoint_size > 0; }

    friend bool operator==(const PayloadSchema&, const PayloadSchema&) = default;
};

/// How points are identified and refined.
enum class GridMode {
    DimensionAdaptive, ///< units of work are whole subspaces W_l
    LocalAdaptive,     ///< units of work are single points
};

/// A refinement target awaiting selection: a subspace in dimension-adaptive
/// mode (index empty) or a single point in local mode.
struct ActiveTarget {
    MultiIndex level;
    std::vector<int> index; ///< empty for subspace targets
    double gamma = 0.0;

    bool is_point() const { return !index.empty(); }
};

/// Hierarchical sparse-grid interpolant with vector payloads.
///
/// Stores every evaluated point together with its hierarchical surplus
/// v = raw - I(coord) where I interpolates over the points stored earlier.
/// Also carries the accepted/active bookkeeping of the adaptive loop so a
/// surrogate can be serialized and resumed.
class Surrogate {
public:
    /// Empty one-dimensional placeholder; assign a real surrogate before use.
    Surrogate()
        : Surrogate(1, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                    GridMode::DimensionAdaptive, PayloadSchema{}) {}

    Surrogate(int dim, RuleKind rule, BasisKind basis, GridMode mode, PayloadSchema schema)
        : dim_(dim), rule_(rule), basis_(basis), mode_(mode), schema_(schema),
          levels_present_(dim) {
        if (dim < 1) throw std::invalid_argument("Surrogate: dimension must be >= 1");
        // Hat functions are anchored at dyadic midpoints; on Clenshaw-Curtis
        // points they would not be cardinal beyond level 1.
        if (basis == BasisKind::HierarchicalHat && rule != RuleKind::EquidistantDyadic)
            throw std::invalid_argument("hat basis requires equidistant points");
    }

    int dimension() const { return dim_; }
    RuleKind rule() const { return rule_; }
    BasisKind basis() const { return basis_; }
    GridMode mode() const { return mode_; }
    const PayloadSchema& schema() const { return schema_; }

    std::size_t size() const { return points_.size(); }
    const GridPoint& point(int id) const { return points_[id]; }
    const Eigen::VectorXd& raw(int id) const { return raw_[id]; }
    const Eigen::VectorXd& surplus(int id) const { return surplus_[id]; }

    /// Index of a stored point, or -1. Identity is (level, index) in
    /// dimension-adaptive mode and the coordinate vector in local mode
    /// (equivalent here, since the dyadic tree assigns coordinates uniquely).
    int find(const GridPoint& p) const {
        auto it = lookup_.find(key_of(p));
        return it == lookup_.end() ? -1 : it->second;
    }
    bool contains(const GridPoint& p) const { return find(p) >= 0; }

    /// Hierarchical surplus the point would get if added now.
    Eigen::VectorXd compute_surplus(const GridPoint& p, const Eigen::VectorXd& raw) const {
        check_payload(raw);
        if (points_.empty()) return raw;
        return raw - interpolate(p.coord);
    }

    /// Store an evaluated point; returns its id. Throws if already present.
    int add_point(const GridPoint& p, const Eigen::VectorXd& raw) {
        check_point(p);
        check_payload(raw);
        if (contains(p)) throw std::invalid_argument("add_point: duplicate point");
        Eigen::VectorXd v = compute_surplus(p, raw);
        int id = static_cast<int>(points_.size());
        points_.push_back(p);
        raw_.push_back(raw);
        surplus_.push_back(std::move(v));
        lookup_.emplace(key_of(p), id);
        for (int k = 0; k < dim_; ++k) {
            auto& lv = levels_present_[k];
            if (std::find(lv.begin(), lv.end(), p.level[k]) == lv.end()) {
                lv.push_back(p.level[k]);
                std::sort(lv.begin(), lv.end());
            }
        }
        return id;
    }

    /// Full payload of the interpolant at xi.
    Eigen::VectorXd interpolate(std::span<const double> xi) const {
        if (points_.empty()) throw std::logic_error("interpolate: empty surrogate");
        Workspace ws;
        fill_basis_tables(xi, ws);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(schema_.total());
        for (std::size_t p = 0; p < points_.size(); ++p) {
            double b = basis_product(p, ws);
            if (b != 0.0) acc += b * surplus_[p];
        }
        return acc;
    }

    /// Single payload component of the interpolant at xi (0 = QoI).
    double interpolate_component(std::span<const double> xi, int comp = 0) const {
        if (points_.empty()) throw std::logic_error("interpolate: empty surrogate");
        Workspace ws;
        fill_basis_tables(xi, ws);
        double acc = 0.0;
        for (std::size_t p = 0; p < points_.size(); ++p) {
            double b = basis_product(p, ws);
            if (b != 0.0) acc += b * surplus_[p](comp);
        }
        return acc;
    }

    /// Integral of one basis function over [0,1]^d: the product of the
    /// one-dimensional basis weights.
    double point_weight(const GridPoint& p) const {
        double w = 1.0;
        for (int k = 0; k < dim_; ++k)
            w *= basis_weight(rule_, basis_, p.level[k], p.index[k]);
        return w;
    }

    /// Integral of the interpolant over [0,1]^d (all payload components).
    Eigen::VectorXd integrate() const {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(schema_.total());
        for (std::size_t p = 0; p < points_.size(); ++p)
            acc += point_weight(points_[p]) * surplus_[p];
        return acc;
    }

    /// Replace the stored model value of a point (rebasing); surpluses are
    /// stale until recompute_surpluses() runs.
    void set_raw(int id, const Eigen::VectorXd& raw) {
        check_payload(raw);
        raw_[id] = raw;
    }

    /// Recompute every surplus from the stored raw values, processing points
    /// in hierarchical order (level sum, then level, then index). Any linear
    /// extension of the ancestor partial order yields the same surpluses; this
    /// one is canonical so results are reproducible.
    void recompute_surpluses() {
        std::vector<int> order(points_.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            int sa = level_sum(points_[a].level), sb = level_sum(points_[b].level);
            if (sa != sb) return sa < sb;
            if (points_[a].level != points_[b].level) return points_[a].level < points_[b].level;
            return points_[a].index < points_[b].index;
        });
        for (auto& s : surplus_) s.setZero();
        // While a point is being processed its own surplus is still zero, so
        // interpolate() sums exactly the contributions of its predecessors.
        for (int id : order)
            surplus_[id] = raw_[id] - interpolate(points_[id].coord);
    }

    /// Adaptive-loop bookkeeping, maintained by the driver.
    std::set<MultiIndex> accepted_levels; ///< dimension mode: the set L
    std::set<int> accepted_ids;           ///< local mode: accepted point ids
    std::vector<ActiveTarget> active;     ///< the active set A

private:
    struct Workspace {
        // per dim: basis values of every level present, indexed by new-point id
        std::vector<std::map<int, std::vector<double>>> tables;
    };

    void fill_basis_tables(std::span<const double> xi, Workspace& ws) const {
        if (static_cast<int>(xi.size()) != dim_)
            throw std::invalid_argument("interpolate: wrong query dimension");
        ws.tables.resize(dim_);
        for (int k = 0; k < dim_; ++k) {
            for (int l : levels_present_[k]) {
                auto& vals = ws.tables[k][l];
                vals.resize(new_point_count(l));
                eval_new_bases(rule_, basis_, l, xi[k], vals.data());
            }
        }
    }

    double basis_product(std::size_t p, const Workspace& ws) const {
        const GridPoint& gp = points_[p];
        double b = 1.0;
        for (int k = 0; k < dim_; ++k) {
            b *= ws.tables[k].at(gp.level[k])[gp.index[k]];
            if (b == 0.0) return 0.0;
        }
        return b;
    }

    std::pair<MultiIndex, std::vector<int>> key_of(const GridPoint& p) const {
        return {p.level, p.index};
    }

    void check_point(const GridPoint& p) const {
        if (static_cast<int>(p.level.size()) != dim_ ||
            static_cast<int>(p.index.size()) != dim_ ||
            static_cast<int>(p.coord.size()) != dim_)
            throw std::invalid_argument("GridPoint has wrong dimension");
        for (int k = 0; k < dim_; ++k)
            detail::check_new_index(p.level[k], p.index[k], "Surrogate");
    }

    void check_payload(const Eigen::VectorXd& v) const {
        if (v.size() != schema_.total())
            throw std::invalid_argument("payload does not match schema");
    }

    int dim_;
    RuleKind rule_;
    BasisKind basis_;
    GridMode mode_;
    PayloadSchema schema_;
    std::vector<GridPoint> points_;
    std::vector<Eigen::VectorXd> raw_;
    std::vector<Eigen::VectorXd> surplus_;
    std::map<std::pair<MultiIndex, std::vector<int>>, int> lookup_;
    std::vector<std::vector<int>> levels_present_;
};

} // namespace sguq
