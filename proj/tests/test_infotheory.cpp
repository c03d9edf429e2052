#include "doctest.h"

#include <cmath>

#include "mvc/errors.hpp"
#include "mvc/infotheory.hpp"

using namespace mvc;

namespace {

// p(x, y, z) with x, y uniform independent bits and z = x xor y.
DiscreteJoint xor_joint() {
  std::vector<double> t(8, 0.0);
  for (std::size_t x = 0; x < 2; ++x) {
    for (std::size_t y = 0; y < 2; ++y) t[x * 4 + y * 2 + (x ^ y)] = 0.25;
  }
  return DiscreteJoint({"x", "y", "z"}, {2, 2, 2}, t);
}

// xi uniform over 3 symbols, xj an independent bit, z from xi through a
// channel with the given rows.
DiscreteJoint channel_joint(const std::vector<std::vector<double>>& channel, std::size_t size_xi) {
  const std::size_t size_z = channel.front().size();
  std::vector<double> t(size_xi * 2 * size_z, 0.0);
  for (std::size_t a = 0; a < size_xi; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t c = 0; c < size_z; ++c) t[(a * 2 + b) * size_z + c] = channel[a][c] / (2.0 * size_xi);
    }
  }
  return DiscreteJoint({"xi", "xj", "z"}, {size_xi, 2, size_z}, t);
}

}  // namespace

TEST_CASE("entropy examples") {
  DiscreteJoint uniform({"x"}, {4}, {0.25, 0.25, 0.25, 0.25});
  CHECK(entropy(uniform, {"x"}) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(entropy(uniform, {"x"}) == doctest::Approx(1.38629).epsilon(1e-5));
  DiscreteJoint point({"x"}, {3}, {0, 1, 0});
  CHECK(entropy(point, {"x"}) == 0.0);

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto px = random_joint({"x"}, {3}, rng).table();
    auto py = random_joint({"y"}, {4}, rng).table();
    std::vector<double> t;
    for (double a : px) {
      for (double b : py) t.push_back(a * b);
    }
    DiscreteJoint prod({"x", "y"}, {3, 4}, t);
    CHECK(std::abs(entropy(prod, {"x", "y"}) - entropy(prod, {"x"}) - entropy(prod, {"y"})) < 1e-12);
    CHECK(std::abs(mutual_info(prod, {"x"}, {"y"})) < 1e-12);
  }
}

TEST_CASE("mutual information examples") {
  DiscreteJoint copy({"x", "y"}, {2, 2}, {0.5, 0, 0, 0.5});
  CHECK(mutual_info(copy, {"x"}, {"y"}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  DiscreteJoint x = xor_joint();
  CHECK(std::abs(mutual_info(x, {"x"}, {"z"})) < 1e-15);
  CHECK(mutual_info(x, {"x"}, {"z"}, {"y"}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(co_information(x, "x", "y", "z") == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("joint validation") {
  CHECK_THROWS(DiscreteJoint({"x"}, {2}, {0.5, 0.6}));
  CHECK_THROWS(DiscreteJoint({"x"}, {2}, {1.5, -0.5}));
  CHECK_THROWS(DiscreteJoint({"x", "y"}, {2, 2}, {0.5, 0.5}));
  CHECK_THROWS(DiscreteJoint({"x"}, {9}, std::vector<double>(9, 1.0 / 9)));
  CHECK_THROWS(DiscreteJoint({"x", "x"}, {2, 2}, {0.25, 0.25, 0.25, 0.25}));
  DiscreteJoint j({"x", "y"}, {2, 3}, {0.1, 0.2, 0.1, 0.3, 0.2, 0.1});
  auto m = j.marginal({"y", "x"});
  CHECK(m[0] == doctest::Approx(0.1));
  CHECK(m[1] == doctest::Approx(0.3));
  CHECK(m[2 * 2 + 1] == doctest::Approx(0.1));
}

TEST_CASE("chain rules") {
  Rng rng(2);
  for (int seed = 0; seed < 100; ++seed) {
    auto j = random_joint({"x", "y", "z"}, {2 + static_cast<std::size_t>(seed % 3), 3, 2}, rng);
    auto r = verify_chain_rules(j);
    CHECK(r.chain < 1e-12);
    CHECK(r.multivariate < 1e-12);
    CHECK(r.min_mi >= -1e-12);
  }
  auto rx = verify_chain_rules(xor_joint());
  CHECK(rx.chain < 1e-12);
  CHECK(rx.multivariate < 1e-12);
  DiscreteJoint indep({"x", "y", "z"}, {2, 2, 2}, std::vector<double>(8, 0.125));
  auto ri = verify_chain_rules(indep);
  CHECK(ri.chain < 1e-12);
  CHECK(ri.multivariate < 1e-12);
}

TEST_CASE("decomposition") {
  auto copy = channel_joint({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 3);
  CHECK(verify_decomposition(copy) < 1e-12);
  std::vector<double> t(8);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t c = 0; c < 2; ++c) {
        // xj is a noisy copy of xi; z flips xi with probability 0.2.
        const double pb = a == b ? 0.7 : 0.3, pc = a == c ? 0.8 : 0.2;
        t[a * 4 + b * 2 + c] = 0.5 * pb * pc;
      }
    }
  }
  DiscreteJoint bsc({"xi", "xj", "z"}, {2, 2, 2}, t);
  CHECK(verify_decomposition(bsc) < 1e-12);
  // I(xi; z) for the binary symmetric channel: ln 2 - H_b(0.2).
  const double hb = -(0.2 * std::log(0.2) + 0.8 * std::log(0.8));
  CHECK(mutual_info(bsc, {"xi"}, {"z"}) == doctest::Approx(std::log(2.0) - hb).epsilon(1e-13));

  Rng rng(3);
  for (int seed = 0; seed < 100; ++seed) {
    auto j = random_constrained_joint(3, 2, 2, 3, rng);
    CHECK(verify_decomposition(j) < 1e-12);
  }
  // z reading xj violates the precondition.
  DiscreteJoint leaky({"xi", "xj", "z"}, {2, 2, 2}, {0.25, 0, 0, 0.25, 0.25, 0, 0, 0.25});
  CHECK_THROWS_AS(verify_decomposition(leaky), ContractError);
}

TEST_CASE("redundancy bounds") {
  Rng rng(4);
  for (int seed = 0; seed < 500; ++seed) {
    auto j = random_constrained_joint(2 + seed % 2, 2, 2, 2 + seed % 3, rng);
    auto r = verify_redundancy_bounds(j);
    CHECK(r.redundancy_margin >= -1e-12);
    CHECK(r.lower_bound_margin >= -1e-12);
  }
  SUBCASE("fully redundant views satisfy the corollary") {
    for (std::size_t shared = 2; shared <= 4; ++shared) {
      auto j = redundant_joint(shared, 2, rng);
      auto r = verify_redundancy_bounds(j);
      CHECK(r.corollary_applies);
      CHECK(r.corollary_residual < 1e-12);
      CHECK(r.sufficiency_leak < 1e-12);
    }
  }
  SUBCASE("independent label") {
    auto xz = random_constrained_joint(3, 2, 1, 3, rng);
    std::vector<double> t;
    const auto& base = xz.table();
    // Spread over a uniform independent y with 2 symbols.
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t y = 0; y < 2; ++y) {
          for (std::size_t c = 0; c < 3; ++c) t.push_back(0.5 * base[xz.index({a, b, 0, c})]);
        }
      }
    }
    DiscreteJoint j({"xi", "xj", "y", "z"}, {3, 2, 2, 3}, t);
    CHECK(std::abs(mutual_info(j, {"y"}, {"z"})) < 1e-12);
    CHECK(std::abs(mutual_info(j, {"y"}, {"xi", "xj"})) < 1e-12);
    auto r = verify_redundancy_bounds(j);
    CHECK(r.redundancy_margin >= -1e-12);
    CHECK(r.lower_bound_margin >= -1e-12);
  }
}

TEST_CASE("Gaussian KL Monte Carlo") {
  auto within = [](const MonteCarloEstimate& e, double truth) {
    return std::abs(e.estimate - truth) <= 3.0 * e.std_error + 1e-15;
  };
  auto same = mc_gaussian_kl({0.3, -1}, {2, 0.5}, {0.3, -1}, {2, 0.5}, 100000, 1);
  CHECK(within(same, 0.0));
  auto half = mc_gaussian_kl({0}, {1}, {1}, {1}, 1000000, 2);
  CHECK(within(half, 0.5));
  CHECK(gaussian_kl_closed_form({0}, {1}, {1}, {1}) == doctest::Approx(0.5).epsilon(1e-15));
  auto wide = mc_gaussian_kl({0, 0}, {1, 1}, {0, 0}, {4, 4}, 1000000, 3);
  CHECK(within(wide, 0.5 * (8 - 2 + std::log(1.0 / 16))));
  CHECK(gaussian_kl_closed_form({0, 0}, {1, 1}, {0, 0}, {4, 4}) == doctest::Approx(1.61371).epsilon(1e-5));
  auto again = mc_gaussian_kl({0}, {1}, {1}, {1}, 10000, 2);
  auto again2 = mc_gaussian_kl({0}, {1}, {1}, {1}, 10000, 2);
  CHECK(again.estimate == again2.estimate);
}

TEST_CASE("Gaussian mutual information reference") {
  CHECK(gaussian_mi_reference(0.0) == 0.0);
  CHECK(gaussian_mi_reference(0.5) == doctest::Approx(0.14384).epsilon(1e-4));
  CHECK(gaussian_mi_reference(0.9) == doctest::Approx(0.83035).epsilon(1e-5));
  CHECK_THROWS_AS(gaussian_mi_reference(1.0), NumericError);
}
