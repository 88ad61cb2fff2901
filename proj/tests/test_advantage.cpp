#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "entrosim/advantage.hpp"
#include "entrosim/rng.hpp"

using namespace entrosim;

TEST_CASE("group-normalized advantages for (1,0,0,1) are (1,-1,-1,1)") {
  // mean 0.5, population std 0.5
  const auto adv = estimate(EstimatorKind::GroupNormalized, {1, 0, 0, 1});
  CHECK(adv.values[0] == doctest::Approx(1.0));
  CHECK(adv.values[1] == doctest::Approx(-1.0));
  CHECK(adv.values[2] == doctest::Approx(-1.0));
  CHECK(adv.values[3] == doctest::Approx(1.0));
  CHECK_FALSE(adv.degenerate);
  for (auto inc : adv.included) CHECK(inc == 1);
}

TEST_CASE("all-equal rewards are degenerate with zero advantages") {
  for (double r : {0.0, 1.0}) {
    const auto adv = estimate(EstimatorKind::GroupNormalized, {r, r, r, r});
    CHECK(adv.degenerate);
    for (double a : adv.values) CHECK(a == 0.0);
  }
}

TEST_CASE("negative-only masks correct rollouts and scores incorrect ones -1") {
  const auto adv = estimate(EstimatorKind::NegativeOnly, {1, 0});
  CHECK(adv.included[0] == 0);
  CHECK(adv.included[1] == 1);
  CHECK(adv.values[1] == doctest::Approx(-1.0));
}

TEST_CASE("positive-only keeps above-mean rewards and masks the rest") {
  const auto adv = estimate(EstimatorKind::PositiveOnly, {1, 0, 0, 0});
  CHECK(adv.included[0] == 1);
  CHECK(adv.values[0] == doctest::Approx(1.0));
  for (int i = 1; i < 4; ++i) CHECK(adv.included[i] == 0);
  // All-equal: nothing is above the mean.
  const auto degenerate = estimate(EstimatorKind::PositiveOnly, {1, 1, 1});
  for (auto inc : degenerate.included) CHECK(inc == 0);
}

TEST_CASE("group-normalized is invariant to shifts and positive scaling") {
  RngStream stream(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> rewards(6);
    for (double& r : rewards) r = stream.next_gaussian();
    const auto base = estimate(EstimatorKind::GroupNormalized, rewards);

    const double shift = 3.0 * stream.next_gaussian();
    const double scale = 0.1 + 5.0 * stream.next_double();
    std::vector<double> transformed(6);
    for (int i = 0; i < 6; ++i) transformed[i] = scale * (rewards[i] + shift);
    const auto moved = estimate(EstimatorKind::GroupNormalized, transformed);

    for (int i = 0; i < 6; ++i) {
      CHECK(moved.values[i] == doctest::Approx(base.values[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("normalized advantages have mean 0 and std 1") {
  RngStream stream(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rewards(8);
    for (double& r : rewards) r = stream.next_below(2);
    const auto adv = estimate(EstimatorKind::GroupNormalized, rewards);
    if (adv.degenerate) continue;
    double mean = 0.0, var = 0.0;
    for (double a : adv.values) mean += a;
    mean /= 8.0;
    for (double a : adv.values) var += (a - mean) * (a - mean);
    var /= 8.0;
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-6);
  }
}

TEST_CASE("retained signs match the estimator family") {
  RngStream stream(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rewards(8);
    for (double& r : rewards) r = stream.next_below(2);
    const auto pos = estimate(EstimatorKind::PositiveOnly, rewards);
    for (std::size_t i = 0; i < 8; ++i) {
      if (pos.included[i]) CHECK(pos.values[i] >= 0.0);
    }
    const auto neg = estimate(EstimatorKind::NegativeOnly, rewards);
    for (std::size_t i = 0; i < 8; ++i) {
      if (neg.included[i]) CHECK(neg.values[i] <= 0.0);
    }
  }
}

TEST_CASE("group-normalized estimation requires at least two rollouts") {
  CHECK_THROWS_AS(estimate(EstimatorKind::GroupNormalized, {1.0}), std::invalid_argument);
}
