// Copyright 2026 The DVPF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <cmath>
#include <random>

#include "doctest.h"
#include "dvpf/errors.hpp"
#include "dvpf/pf_oracle.hpp"
#include "test_util.hpp"

namespace dvpf {
namespace {

// Brute-force enumeration of P(s,x,z) = P(s,x) W(z|x).
std::pair<double, double> TripleSumInformations(const Eigen::MatrixXd& joint,
                                                const Eigen::MatrixXd& w) {
  const int ns = joint.rows(), nx = joint.cols(), nz = w.cols();
  std::vector<double> pz(nz, 0.0), px(nx, 0.0), ps(ns, 0.0);
  std::vector<std::vector<double>> pxz(nx, std::vector<double>(nz, 0.0));
  std::vector<std::vector<double>> psz(ns, std::vector<double>(nz, 0.0));
  for (int s = 0; s < ns; ++s)
    for (int x = 0; x < nx; ++x)
      for (int z = 0; z < nz; ++z) {
        const double p = joint(s, x) * w(x, z);
        pz[z] += p;
        px[x] += p;
        ps[s] += p;
        pxz[x][z] += p;
        psz[s][z] += p;
      }
  double ixz = 0.0, isz = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int z = 0; z < nz; ++z)
      if (pxz[x][z] > 0) ixz += pxz[x][z] * std::log2(pxz[x][z] / (px[x] * pz[z]));
  for (int s = 0; s < ns; ++s)
    for (int z = 0; z < nz; ++z)
      if (psz[s][z] > 0) isz += psz[s][z] * std::log2(psz[s][z] / (ps[s] * pz[z]));
  return {ixz, isz};
}

JointDistribution AcceptanceJoint() {
  Eigen::MatrixXd t(2, 4);
  t << 0.20, 0.05, 0.05, 0.20,  //
      0.05, 0.20, 0.20, 0.05;
  return JointDistribution(t);
}

Channel RandomChannel(int nx, int nz, std::mt19937_64& rng, double conc) {
  Eigen::MatrixXd w(nx, nz);
  for (int x = 0; x < nx; ++x) {
    const auto row = testing::RandomSimplex(nz, rng, conc);
    for (int z = 0; z < nz; ++z) w(x, z) = row[z];
  }
  return Channel(w);
}

TEST_CASE("induced informations: identity and constant channels") {
  std::mt19937_64 rng(1);
  const auto joint = testing::RandomJoint(3, 4, rng);
  const auto id = ComputeInducedInformations(joint, Channel::Identity(4));
  CHECK(id.utility.value == doctest::Approx(Entropy(joint.MarginalX()).value));
  CHECK(id.leakage.value == doctest::Approx(MutualInformation(joint).value));
  const auto c = ComputeInducedInformations(joint, Channel::Constant(4, 3));
  CHECK(c.utility.value == doctest::Approx(0.0));
  CHECK(c.leakage.value == doctest::Approx(0.0));
}

TEST_CASE("induced informations match triple-sum enumeration") {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd t(2, 4);
  t << 0.1, 0.2, 0.15, 0.05, 0.2, 0.05, 0.05, 0.2;
  const JointDistribution joint(t);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ch = RandomChannel(4, 3, rng, 1.0);
    const auto [ixz, isz] = TripleSumInformations(t, ch.matrix());
    const auto got = ComputeInducedInformations(joint, ch);
    CHECK(got.utility.value == doctest::Approx(ixz).epsilon(1e-10));
    CHECK(got.leakage.value == doctest::Approx(isz).epsilon(1e-10));
  }
  CHECK_THROWS_AS(ComputeInducedInformations(joint, Channel::Identity(3)),
                  ValidationError);
}

TEST_CASE("channel validation") {
  Eigen::MatrixXd w(2, 2);
  w << 0.5, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(Channel{w}, ValidationError);
  CHECK_THROWS_AS(Channel::Deterministic({0, 3}, 2), ValidationError);
}

TEST_CASE("lagrangian: alpha zero copies X") {
  std::mt19937_64 rng(4);
  const auto joint = testing::RandomJoint(2, 4, rng);
  const auto sol = SolveLagrangian(joint, 0.0, 4);
  CHECK(sol.utility.value ==
        doctest::Approx(Entropy(joint.MarginalX()).value).epsilon(1e-9));
}

TEST_CASE("lagrangian: independent S leaks nothing") {
  const auto joint = JointDistribution::Product(
      DiscreteDistribution({0.4, 0.6}),
      DiscreteDistribution({0.1, 0.2, 0.3, 0.4}));
  for (double alpha : {0.5, 2.0, 50.0}) {
    const auto sol = SolveLagrangian(joint, alpha, 4);
    CHECK(sol.leakage.value == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(sol.utility.value ==
          doctest::Approx(Entropy(joint.MarginalX()).value).epsilon(1e-9));
  }
}

TEST_CASE("lagrangian: 2x2 joint matches exhaustive vertex and grid search") {
  Eigen::MatrixXd t(2, 2);
  t << 0.4, 0.1, 0.1, 0.4;
  const JointDistribution joint(t);
  const double alpha = 2.0;
  auto objective = [&](const Eigen::MatrixXd& w) {
    const auto [ixz, isz] = TripleSumInformations(t, w);
    return ixz - alpha * isz;
  };
  // Deterministic maps over {0,1}^2.
  double oracle = -1e9;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
      w(0, a) = 1.0;
      w(1, b) = 1.0;
      oracle = std::max(oracle, objective(w));
    }
  // Simplex refinement: dense grid over both rows.
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      Eigen::MatrixXd w(2, 2);
      w << i / 400.0, 1 - i / 400.0, j / 400.0, 1 - j / 400.0;
      oracle = std::max(oracle, objective(w));
    }
  const auto sol = SolveLagrangian(joint, alpha, 2);
  CHECK(sol.objective_bits >= oracle - 1e-6);
  CHECK(sol.objective_bits <= oracle + 1e-4);
  CHECK(objective(sol.channel.matrix()) ==
        doctest::Approx(sol.objective_bits).epsilon(1e-9));
}

TEST_CASE("capacity cap") {
  std::mt19937_64 rng(5);
  const auto joint = testing::RandomJoint(2, 13, rng);
  CHECK_THROWS_AS(SolveLagrangian(joint, 1.0, 13), CapacityError);
  CHECK_THROWS_AS(SolveLagrangian(testing::RandomJoint(2, 3, rng), 1.0, 0),
                  ValidationError);
}

TEST_CASE("pf curve: trivial budgets") {
  const auto joint = AcceptanceJoint();
  const double hx = Entropy(joint.MarginalX()).value;
  const double isx = MutualInformation(joint).value;
  const auto curve = ComputePFCurve(joint, {isx + 1e-6}, 4);
  CHECK(curve.points[0].utility.value == doctest::Approx(hx).epsilon(1e-9));

  Eigen::MatrixXd eq(2, 2);
  eq << 0.3, 0.0, 0.0, 0.7;
  const auto zero = ComputePFCurve(JointDistribution(eq), {0.0}, 2);
  CHECK(zero.points[0].utility.value == doctest::Approx(0.0).epsilon(1e-9));

  CHECK_THROWS_AS(ComputePFCurve(joint, {}, 4), ValidationError);
  CHECK_THROWS_AS(ComputePFCurve(joint, {0.3, 0.1}, 4), ValidationError);
}

TEST_CASE("pf curve: invariants and random-channel dominance") {
  const auto joint = AcceptanceJoint();
  const double isx = MutualInformation(joint).value;
  const std::vector<double> budgets{0.1, 0.3, 0.5};
  const auto curve = ComputePFCurve(joint, budgets, 4);
  REQUIRE(curve.points.size() == 3);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& pt = curve.points[i];
    const auto info = ComputeInducedInformations(joint, pt.achieving_channel);
    CHECK(info.leakage.value <= budgets[i] + 1e-6);
    CHECK(info.utility.value == doctest::Approx(pt.utility.value).epsilon(1e-9));
    CHECK(info.leakage.value <= isx + 1e-9);
    CHECK(info.leakage.value <= info.utility.value + 1e-9);
    if (i > 0) CHECK(pt.utility.value >= curve.points[i - 1].utility.value);
  }
  std::mt19937_64 rng(99);
  int dominated = 0;
  double worst = -1.0;
  for (int trial = 0; trial < 100000; ++trial) {
    const double conc = trial % 2 == 0 ? 1.0 : 0.15;
    const auto ch = RandomChannel(4, 4, rng, conc);
    const auto info = ComputeInducedInformations(joint, ch);
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      if (info.leakage.value > budgets[i]) continue;
      const double excess = info.utility.value - curve.points[i].utility.value;
      worst = std::max(worst, excess);
      if (excess > 1e-3) ++dominated;
    }
  }
  INFO("worst excess " << worst);
  CHECK(dominated == 0);
}

TEST_CASE("pf curve: restart stability on the random-restart route") {
  std::mt19937_64 rng(21);
  const auto joint = testing::RandomJoint(2, 6, rng);
  const std::vector<double> budgets{0.05, 0.15, 0.3};
  SolverOptions base;
  base.random_restarts = 64;
  SolverOptions doubled = base;
  doubled.random_restarts = 128;
  const std::vector<double> alphas{0.1, 0.5, 1.0, 2.0, 5.0, 20.0};
  const auto a = ComputePFCurve(joint, budgets, 6, alphas, base);
  const auto b = ComputePFCurve(joint, budgets, 6, alphas, doubled);
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    CHECK(std::abs(a.points[i].utility.value - b.points[i].utility.value) <=
          1e-3);
  }
}

TEST_CASE("concave envelope") {
  PFCurve c;
  c.achievable = {{0.2, 1.0}, {0.6, 1.5}, {0.4, 1.0}, {0.9, 1.5}};
  CHECK(c.ConcaveEnvelopeAt(0.0) == doctest::Approx(0.0));
  CHECK(c.ConcaveEnvelopeAt(0.1) == doctest::Approx(0.5));
  CHECK(c.ConcaveEnvelopeAt(0.4) == doctest::Approx(1.25));
  CHECK(c.ConcaveEnvelopeAt(5.0) == doctest::Approx(1.5));
}

}  // namespace
}  // namespace dvpf
