#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include <sguq/sparse_grid.hpp>

#include "support/oracles.hpp"

using namespace sguq;
using Catch::Approx;

namespace {

Eigen::VectorXd scalar(double v) {
    Eigen::VectorXd x(1);
    x(0) = v;
    return x;
}

// Add every point of each subspace in the given order, evaluating f.
template <typename F>
void add_levels(Surrogate& s, const std::vector<MultiIndex>& levels, F f) {
    for (const auto& l : levels) {
        for (const auto& p : subspace_points(s.rule(), l))
            s.add_point(p, scalar(f(p.coord)));
        s.accepted_levels.insert(l);
    }
}

} // namespace

TEST_CASE("admissibility requires all backward neighbours") {
    std::set<MultiIndex> accepted{{0, 0}};
    CHECK(is_admissible(accepted, {1, 0}));
    CHECK(is_admissible(accepted, {0, 1}));
    CHECK_FALSE(is_admissible(accepted, {1, 1}));
    accepted.insert({1, 0});
    accepted.insert({0, 1});
    CHECK(is_admissible(accepted, {1, 1}));
    CHECK(is_admissible(accepted, {2, 0}));
    CHECK_FALSE(is_admissible(accepted, {2, 1}));
    // the root is admissible w.r.t. the empty set
    CHECK(is_admissible({}, {0, 0, 0}));
}

TEST_CASE("subspace points enumerate the tensor product in index order") {
    auto pts = subspace_points(RuleKind::ClenshawCurtis, {1, 2});
    REQUIRE(pts.size() == 4); // 2 x 2 new points
    CHECK(pts[0].index == std::vector<int>{0, 0});
    CHECK(pts[1].index == std::vector<int>{0, 1});
    CHECK(pts[2].index == std::vector<int>{1, 0});
    CHECK(pts[3].index == std::vector<int>{1, 1});
    CHECK(pts[0].coord[0] == 0.0);
    CHECK(pts[0].coord[1] == Approx(0.14644660940672624).margin(1e-15));
    CHECK(pts[3].coord[0] == 1.0);

    CHECK(subspace_points(RuleKind::EquidistantDyadic, {0, 0, 0}).size() == 1);
    CHECK(subspace_points(RuleKind::EquidistantDyadic, {3, 1}).size() == 8);
}

TEST_CASE("payload schema describes the flattened layout") {
    PayloadSchema qoi_only{};
    CHECK(qoi_only.total() == 1);
    CHECK_FALSE(qoi_only.has_fields());
    PayloadSchema with{101, 201};
    CHECK(with.total() == 303);
    CHECK(with.has_fields());
}

TEST_CASE("hat basis on Clenshaw-Curtis points is rejected") {
    CHECK_THROWS_AS(Surrogate(1, RuleKind::ClenshawCurtis, BasisKind::HierarchicalHat,
                              GridMode::LocalAdaptive, PayloadSchema{}),
                    std::invalid_argument);
}

TEST_CASE("duplicate points and malformed payloads are rejected") {
    Surrogate s(2, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, PayloadSchema{});
    GridPoint root = make_grid_point(RuleKind::ClenshawCurtis, {0, 0}, {0, 0});
    CHECK_THROWS_AS(s.interpolate(std::vector<double>{0.5, 0.5}), std::logic_error);
    s.add_point(root, scalar(3.0));
    CHECK_THROWS_AS(s.add_point(root, scalar(3.0)), std::invalid_argument);
    CHECK_THROWS_AS(s.add_point(make_grid_point(RuleKind::ClenshawCurtis, {1, 0}, {0, 0}),
                                Eigen::VectorXd::Zero(2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(s.interpolate(std::vector<double>{0.5}), std::invalid_argument);
    CHECK(s.contains(root));
    CHECK(s.find(root) == 0);
    CHECK_FALSE(s.contains(make_grid_point(RuleKind::ClenshawCurtis, {1, 0}, {1, 0})));
}

TEST_CASE("one-dimensional Lagrange hierarchy reproduces polynomials") {
    Surrogate s(1, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, PayloadSchema{});
    auto f = [](const std::vector<double>& x) { return std::pow(x[0], 4); };
    add_levels(s, {{0}, {1}, {2}}, f);
    REQUIRE(s.size() == 5);
    // full level-2 set interpolates degree-4 polynomials exactly
    CHECK(s.interpolate_component(std::vector<double>{0.3}) == Approx(0.0081).margin(1e-14));
    CHECK(s.interpolate_component(std::vector<double>{0.91}) ==
          Approx(std::pow(0.91, 4)).margin(1e-14));
    CHECK(s.integrate()(0) == Approx(0.2).margin(1e-14));
}

TEST_CASE("two-dimensional combination interpolant has the classic closed form") {
    // L = {(0,0), (1,0), (0,1)} applied to f = x^2 y^2 gives
    // x^2/4 + y^2/4 - 1/16.
    Surrogate s(2, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, PayloadSchema{});
    auto f = [](const std::vector<double>& x) { return x[0] * x[0] * x[1] * x[1]; };
    add_levels(s, {{0, 0}, {1, 0}, {0, 1}}, f);
    REQUIRE(s.size() == 5);
    CHECK(s.interpolate_component(std::vector<double>{0.2, 0.7}) == Approx(0.07).margin(1e-14));
    CHECK(s.interpolate_component(std::vector<double>{0.3, 0.4}) == Approx(0.0).margin(1e-14));
    CHECK(s.integrate()(0) == Approx(5.0 / 48.0).margin(1e-14));

    // completing the tensor square makes the interpolant exact
    add_levels(s, {{1, 1}}, f);
    CHECK(s.interpolate_component(std::vector<double>{0.2, 0.7}) ==
          Approx(0.04 * 0.49).margin(1e-14));
    CHECK(s.integrate()(0) == Approx(1.0 / 9.0).margin(1e-14));
}

TEST_CASE("interpolant matches stored values at every grid point") {
    Surrogate s(2, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, PayloadSchema{});
    auto f = [](const std::vector<double>& x) { return std::exp(x[0] + 0.5 * x[1]); };
    add_levels(s, {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}, {2, 1}}, f);
    for (std::size_t id = 0; id < s.size(); ++id) {
        const GridPoint& p = s.point(static_cast<int>(id));
        CHECK(s.interpolate_component(p.coord) == Approx(f(p.coord)).margin(1e-12));
    }
}

TEST_CASE("integrate agrees with cell-aligned dense quadrature") {
    Surrogate s(2, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, PayloadSchema{});
    auto f = [](const std::vector<double>& x) {
        return std::sin(3.0 * x[0]) * std::exp(x[1]) + x[0];
    };
    add_levels(s, {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}}, f);
    CHECK(s.integrate()(0) == Approx(oracle::integrate_surrogate(s)).margin(1e-10));

    Surrogate hat(2, RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat,
                  GridMode::LocalAdaptive, PayloadSchema{});
    add_levels(hat, {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 1}}, f);
    CHECK(hat.integrate()(0) == Approx(oracle::integrate_surrogate(hat)).margin(1e-10));
}

TEST_CASE("hat hierarchy interpolates piecewise-linear data exactly") {
    Surrogate s(1, RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat,
                GridMode::LocalAdaptive, PayloadSchema{});
    auto f = [](const std::vector<double>& x) { return x[0]; };
    add_levels(s, {{0}, {1}}, f);
    CHECK(s.interpolate_component(std::vector<double>{0.25}) == Approx(0.25).margin(1e-15));
    CHECK(s.interpolate_component(std::vector<double>{0.8}) == Approx(0.8).margin(1e-15));
    CHECK(s.integrate()(0) == Approx(0.5).margin(1e-15));
    CHECK(s.surplus(0)(0) == 0.5);
    CHECK(s.surplus(1)(0) == -0.5);
    CHECK(s.surplus(2)(0) == 0.5);
}

TEST_CASE("vector payloads carry through surpluses, interpolation, integration") {
    PayloadSchema schema{2, 1};
    Surrogate s(1, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, schema);
    auto payload = [](double x) {
        Eigen::VectorXd v(4);
        v << x * x, 1.0 + x, 2.0 - x, std::sin(x);
        return v;
    };
    for (const auto& l : std::vector<MultiIndex>{{0}, {1}, {2}})
        for (const auto& p : subspace_points(s.rule(), l))
            s.add_point(p, payload(p.coord[0]));
    Eigen::VectorXd at = s.interpolate(std::vector<double>{0.37});
    CHECK(at(0) == Approx(0.37 * 0.37).margin(1e-13));
    CHECK(at(1) == Approx(1.37).margin(1e-13));
    CHECK(at(2) == Approx(1.63).margin(1e-13));
    Eigen::VectorXd mass = s.integrate();
    CHECK(mass(0) == Approx(1.0 / 3.0).margin(1e-13));
    CHECK(mass(1) == Approx(1.5).margin(1e-13));
}

TEST_CASE("point weights multiply the one-dimensional basis weights") {
    Surrogate s(3, RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat,
                GridMode::LocalAdaptive, PayloadSchema{});
    GridPoint p = make_grid_point(RuleKind::EquidistantDyadic, {0, 1, 3}, {0, 1, 2});
    CHECK(s.point_weight(p) == Approx(1.0 * 0.25 * 0.125).margin(1e-15));
}

TEST_CASE("recompute_surpluses is idempotent and order-canonical") {
    Surrogate s(2, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, PayloadSchema{});
    auto f = [](const std::vector<double>& x) { return std::cos(x[0]) * (1.0 + x[1]); };
    add_levels(s, {{0, 0}, {1, 0}, {0, 1}, {2, 0}}, f);
    std::vector<double> before;
    for (std::size_t id = 0; id < s.size(); ++id) before.push_back(s.surplus(id)(0));
    s.recompute_surpluses();
    for (std::size_t id = 0; id < s.size(); ++id)
        CHECK(s.surplus(id)(0) == Approx(before[id]).margin(1e-13));
}

TEST_CASE("set_raw followed by recompute shifts the interpolant consistently") {
    Surrogate s(1, RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange,
                GridMode::DimensionAdaptive, PayloadSchema{});
    auto f = [](const std::vector<double>& x) { return x[0] * x[0]; };
    add_levels(s, {{0}, {1}}, f);
    for (std::size_t id = 0; id < s.size(); ++id)
        s.set_raw(static_cast<int>(id), scalar(s.raw(static_cast<int>(id))(0) + 2.0));
    s.recompute_surpluses();
    for (std::size_t id = 0; id < s.size(); ++id) {
        const GridPoint& p = s.point(static_cast<int>(id));
        CHECK(s.interpolate_component(p.coord) == Approx(f(p.coord) + 2.0).margin(1e-13));
    }
    CHECK(s.interpolate_component(std::vector<double>{0.77}) ==
          Approx(0.77 * 0.77 + 2.0).margin(1e-13));
}
