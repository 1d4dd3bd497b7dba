#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include <sguq/grid1d.hpp>

#include "support/oracles.hpp"

using namespace sguq;
using Catch::Approx;

TEST_CASE("point counts follow the doubling hierarchy") {
    CHECK(level_point_count(0) == 1);
    CHECK(level_point_count(1) == 3);
    CHECK(level_point_count(2) == 5);
    CHECK(level_point_count(5) == 33);
    CHECK(new_point_count(0) == 1);
    CHECK(new_point_count(1) == 2);
    CHECK(new_point_count(2) == 2);
    CHECK(new_point_count(3) == 4);
    CHECK(new_point_count(6) == 32);
    CHECK_THROWS_AS(level_point_count(-1), std::invalid_argument);
}

TEST_CASE("Clenshaw-Curtis points are symmetric with exact anchors") {
    for (int level : {1, 2, 3, 5}) {
        auto pts = level_points(RuleKind::ClenshawCurtis, level);
        int m = static_cast<int>(pts.size());
        CHECK(pts.front() == 0.0);
        CHECK(pts.back() == 1.0);
        CHECK(pts[m / 2] == 0.5);
        for (int j = 0; j < m; ++j)
            CHECK(pts[j] + pts[m - 1 - j] == 1.0); // exact mirror
        CHECK(std::is_sorted(pts.begin(), pts.end()));
    }
    CHECK(level_points(RuleKind::ClenshawCurtis, 0) == std::vector<double>{0.5});
}

TEST_CASE("Clenshaw-Curtis level-2 interior points match sin^2(pi/8)") {
    auto fresh = new_points(RuleKind::ClenshawCurtis, 2);
    REQUIRE(fresh.size() == 2);
    CHECK(fresh[0] == Approx(0.14644660940672624).margin(1e-15));
    CHECK(fresh[1] == Approx(0.85355339059327373).margin(1e-15));
}

TEST_CASE("equidistant points are exact dyadic rationals") {
    CHECK(level_points(RuleKind::EquidistantDyadic, 0) == std::vector<double>{0.5});
    CHECK(level_points(RuleKind::EquidistantDyadic, 1) == std::vector<double>{0.0, 0.5, 1.0});
    auto l3 = level_points(RuleKind::EquidistantDyadic, 3);
    for (int j = 0; j < 9; ++j) CHECK(l3[j] == j / 8.0);
    auto fresh = new_points(RuleKind::EquidistantDyadic, 3);
    CHECK(fresh == std::vector<double>{0.125, 0.375, 0.625, 0.875});
}

TEST_CASE("each level nests in the next, bit for bit") {
    for (RuleKind rule : {RuleKind::ClenshawCurtis, RuleKind::EquidistantDyadic}) {
        for (int level = 0; level < 5; ++level) {
            auto coarse = level_points(rule, level);
            auto fine = level_points(rule, level + 1);
            std::set<double> fine_set(fine.begin(), fine.end());
            for (double x : coarse) CHECK(fine_set.count(x) == 1);
        }
    }
}

TEST_CASE("new points plus inherited points reconstruct each level") {
    for (RuleKind rule : {RuleKind::ClenshawCurtis, RuleKind::EquidistantDyadic}) {
        std::set<double> acc;
        for (int level = 0; level <= 4; ++level) {
            for (double x : new_points(rule, level)) {
                CHECK(acc.count(x) == 0); // genuinely new
                acc.insert(x);
            }
            auto full = level_points(rule, level);
            CHECK(acc == std::set<double>(full.begin(), full.end()));
        }
    }
}

TEST_CASE("bases are cardinal on the full point set of their level") {
    // hat functions live on the equidistant points only
    const std::pair<RuleKind, BasisKind> pairings[] = {
        {RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange},
        {RuleKind::EquidistantDyadic, BasisKind::HierarchicalLagrange},
        {RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat},
    };
    for (auto [rule, basis] : pairings) {
        {
            for (int level : {0, 1, 2, 3}) {
                auto full = level_points(rule, level);
                for (int i = 0; i < new_point_count(level); ++i) {
                    double own = new_point_coord(rule, level, i);
                    for (double x : full) {
                        double v = eval_basis(rule, basis, level, i, x);
                        if (x == own)
                            CHECK(v == Approx(1.0).margin(1e-13));
                        else
                            CHECK(v == Approx(0.0).margin(1e-13));
                    }
                }
            }
        }
    }
}

TEST_CASE("hierarchical Lagrange values match an independent interpolation") {
    // cardinal polynomial through the full level-l nodes
    for (RuleKind rule : {RuleKind::ClenshawCurtis, RuleKind::EquidistantDyadic}) {
        for (int level : {1, 2, 3}) {
            auto nodes = level_points(rule, level);
            for (int i = 0; i < new_point_count(level); ++i) {
                double own = new_point_coord(rule, level, i);
                std::vector<double> values(nodes.size(), 0.0);
                for (std::size_t j = 0; j < nodes.size(); ++j)
                    if (nodes[j] == own) values[j] = 1.0;
                for (double x : {0.13, 0.4771, 0.5, 0.925}) {
                    double expected = oracle::neville(nodes, values, x);
                    CHECK(eval_basis(rule, BasisKind::HierarchicalLagrange, level, i, x) ==
                          Approx(expected).margin(1e-12));
                }
            }
        }
    }
    // frozen spot value: level-1 basis of the left endpoint at x = 1/4
    CHECK(eval_basis(RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange, 1, 0, 0.25) ==
          Approx(0.375).margin(1e-15));
}

TEST_CASE("hat functions have the textbook shape") {
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 0, 0, 0.1) == 1.0);
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 1, 0, 0.25) == 0.5);
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 1, 0, 0.75) == 0.0);
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 1, 1, 0.75) == 0.5);
    // level 2, point 0.25, half-width 1/4
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 2, 0, 0.25) == 1.0);
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 2, 0, 0.125) == 0.5);
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 2, 0, 0.5) == 0.0);
    CHECK(eval_basis(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 2, 0, 0.6) == 0.0);
}

TEST_CASE("batched basis evaluation equals pointwise evaluation") {
    const std::pair<RuleKind, BasisKind> pairings[] = {
        {RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange},
        {RuleKind::EquidistantDyadic, BasisKind::HierarchicalLagrange},
        {RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat},
    };
    for (auto [rule, basis] : pairings) {
        {
            for (int level : {0, 1, 2, 4}) {
                std::vector<double> batch(new_point_count(level));
                for (double x : {0.0, 0.2231, 0.5, 0.731, 1.0}) {
                    eval_new_bases(rule, basis, level, x, batch.data());
                    for (int i = 0; i < new_point_count(level); ++i)
                        CHECK(batch[i] == eval_basis(rule, basis, level, i, x));
                }
            }
        }
    }
}

TEST_CASE("hat basis weights have closed forms") {
    CHECK(basis_weight(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 0, 0) == 1.0);
    CHECK(basis_weight(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 1, 0) == 0.25);
    CHECK(basis_weight(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 1, 1) == 0.25);
    for (int level : {2, 3, 4, 7})
        for (int i = 0; i < new_point_count(level); ++i)
            CHECK(basis_weight(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, level, i) ==
                  std::ldexp(1.0, -level));
}

TEST_CASE("Lagrange basis weights match dense quadrature") {
    CHECK(basis_weight(RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange, 0, 0) == 1.0);
    CHECK(basis_weight(RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange, 1, 0) ==
          Approx(1.0 / 6.0).margin(1e-14));
    for (RuleKind rule : {RuleKind::ClenshawCurtis, RuleKind::EquidistantDyadic}) {
        for (int level : {1, 2, 3}) {
            for (int i = 0; i < new_point_count(level); ++i) {
                double dense = oracle::simpson([&](double x) {
                    return eval_basis(rule, BasisKind::HierarchicalLagrange, level, i, x);
                });
                CHECK(basis_weight(rule, BasisKind::HierarchicalLagrange, level, i) ==
                      Approx(dense).margin(1e-11));
            }
        }
    }
}

TEST_CASE("malformed basis identifiers are rejected") {
    CHECK_THROWS_AS(eval_basis(RuleKind::ClenshawCurtis, BasisKind::HierarchicalLagrange, 2, 2, 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_basis(RuleKind::ClenshawCurtis, BasisKind::HierarchicalHat, -1, 0, 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(basis_weight(RuleKind::EquidistantDyadic, BasisKind::HierarchicalHat, 1, 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(new_point_coord(RuleKind::ClenshawCurtis, 3, 4), std::invalid_argument);
}

TEST_CASE("dyadic lineage: parents and children are mutual") {
    // 0.5 -> {0, 1}; endpoints -> 0.25 / 0.75; interior x -> x -+ 2^-(l+1)
    CHECK(Lineage::children(0, 0) == std::vector<std::pair<int, int>>{{1, 0}, {1, 1}});
    CHECK(Lineage::children(1, 0) == std::vector<std::pair<int, int>>{{2, 0}});
    CHECK(Lineage::children(1, 1) == std::vector<std::pair<int, int>>{{2, 1}});
    CHECK(Lineage::parent(1, 0) == std::make_pair(0, 0));
    CHECK(Lineage::parent(2, 0) == std::make_pair(1, 0));
    CHECK(Lineage::parent(2, 1) == std::make_pair(1, 1));

    for (int level : {2, 3, 4}) {
        for (int i = 0; i < new_point_count(level); ++i) {
            double x = new_point_coord(RuleKind::EquidistantDyadic, level, i);
            auto kids = Lineage::children(level, i);
            REQUIRE(kids.size() == 2);
            CHECK(new_point_coord(RuleKind::EquidistantDyadic, kids[0].first, kids[0].second) ==
                  x - std::ldexp(1.0, -(level + 1)));
            CHECK(new_point_coord(RuleKind::EquidistantDyadic, kids[1].first, kids[1].second) ==
                  x + std::ldexp(1.0, -(level + 1)));
            for (auto [cl, ci] : kids)
                CHECK(Lineage::parent(cl, ci) == std::make_pair(level, i));
        }
    }
}

TEST_CASE("lineage of 0.125 walks through 0.25 and 0") {
    // 0.125 is (3, 0); its chain up to the root
    CHECK(new_point_coord(RuleKind::EquidistantDyadic, 3, 0) == 0.125);
    auto p1 = Lineage::parent(3, 0);
    CHECK(new_point_coord(RuleKind::EquidistantDyadic, p1.first, p1.second) == 0.25);
    auto p2 = Lineage::parent(p1.first, p1.second);
    CHECK(new_point_coord(RuleKind::EquidistantDyadic, p2.first, p2.second) == 0.0);
    auto p3 = Lineage::parent(p2.first, p2.second);
    CHECK(new_point_coord(RuleKind::EquidistantDyadic, p3.first, p3.second) == 0.5);
    CHECK_THROWS_AS(Lineage::parent(0, 0), std::invalid_argument);
}

TEST_CASE("string round trips for rule and basis kinds") {
    for (RuleKind r : {RuleKind::ClenshawCurtis, RuleKind::EquidistantDyadic})
        CHECK(rule_from_string(to_string(r)) == r);
    for (BasisKind b : {BasisKind::HierarchicalLagrange, BasisKind::HierarchicalHat})
        CHECK(basis_from_string(to_string(b)) == b);
    CHECK_THROWS_AS(rule_from_string("nope"), std::invalid_argument);
}
