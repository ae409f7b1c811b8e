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
#include <cstring>
#include <functional>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dvpf/data_io.hpp"
#include "dvpf/errors.hpp"
#include "dvpf/eval_harness.hpp"
#include "test_util.hpp"

namespace dvpf {
namespace {

const std::string kFixtures = DVPF_FIXTURE_DIR;

JointDistribution Joint(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd t(rows.size(), rows.begin()->size());
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (double v : row) t(r, c++) = v;
    ++r;
  }
  return JointDistribution(t);
}

Eigen::MatrixXd EmpiricalJoint(const SampleBatch& b, int ns, int nx) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(ns, nx);
  for (int i = 0; i < b.size(); ++i) t(b.s[i], (*b.identity)[i]) += 1.0;
  return t / b.size();
}

bool SameBatch(const SampleBatch& a, const SampleBatch& b) {
  if (a.x.rows() != b.x.rows() || a.x.cols() != b.x.cols()) return false;
  for (Eigen::Index i = 0; i < a.x.size(); ++i) {
    if (std::memcmp(&a.x.data()[i], &b.x.data()[i], sizeof(double)) != 0) return false;
  }
  return a.s == b.s && a.identity == b.identity && a.n_classes == b.n_classes;
}

std::size_t ParseErrorLine(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

TEST_CASE("discrete generator: information anchors") {
  SUBCASE("product joint leaks nothing") {
    const auto joint = Joint({{0.125, 0.125, 0.125, 0.125}, {0.125, 0.125, 0.125, 0.125}});
    const auto d = GenDiscrete(joint, 6, 8000, 1);
    const auto [train, test] = SplitTrainTest(d.batch, 2);
    const AttackReport r = Attack(train.x, train.s, test.x, test.s, 2);
    CHECK(std::abs(r.leakage_bits.value) <= 0.05);
    CHECK(d.mutual_information.value == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("diagonal joint with a noiseless codebook is fully predictable") {
    const auto joint = Joint({{0.5, 0.0}, {0.0, 0.5}});
    const auto d = GenDiscrete(joint, 3, 2000, 3, 0.0);
    const auto [train, test] = SplitTrainTest(d.batch, 4);
    CHECK(Attack(train.x, train.s, test.x, test.s, 2).accuracy == 1.0);
  }
  SUBCASE("empirical plug-in MI converges") {
    const auto joint = Joint({{0.4, 0.1}, {0.1, 0.4}});
    const auto d = GenDiscrete(joint, 2, 100000, 5);
    const double plug_in = MutualInformation(JointDistribution(EmpiricalJoint(d.batch, 2, 2))).value;
    CHECK(std::abs(plug_in - MutualInformation(joint).value) <= 0.01);
  }
}

TEST_CASE("discrete generator: total variation shrinks with n") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const auto joint = testing::RandomJoint(2 + trial % 2, 3 + trial, rng);
    for (int n : {10000, 40000}) {
      const auto d = GenDiscrete(joint, 2, n, 100 + trial);
      const Eigen::MatrixXd emp = EmpiricalJoint(d.batch, joint.s_size(), joint.x_size());
      const double tv = 0.5 * (emp - joint.table()).cwiseAbs().sum();
      CHECK(tv <= 3.0 * std::sqrt(static_cast<double>(joint.s_size() * joint.x_size()) / n));
    }
  }
}

TEST_CASE("discrete generator: codebook, noise and determinism") {
  const auto joint = Joint({{0.2, 0.05, 0.05, 0.2}, {0.05, 0.2, 0.2, 0.05}});
  const auto a = GenDiscrete(joint, 5, 500, 9);
  const auto b = GenDiscrete(joint, 5, 500, 9);
  CHECK(SameBatch(a.batch, b.batch));
  CHECK(a.codebook == b.codebook);
  CHECK_FALSE(SameBatch(a.batch, GenDiscrete(joint, 5, 500, 10).batch));
  a.batch.Validate();
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Eigen::RowVectorXd diff = a.batch.x.row(i) - a.codebook.row((*a.batch.identity)[i]);
    worst = std::max(worst, diff.cwiseAbs().maxCoeff());
  }
  CHECK(worst < 0.01 * 6);
  CHECK(worst > 0.0);
  CHECK_THROWS_AS(GenDiscrete(joint, 0, 10, 1), ValidationError);
  CHECK_THROWS_AS(GenDiscrete(joint, 2, 0, 1), ValidationError);
  CHECK_THROWS_AS(GenDiscrete(joint, Eigen::MatrixXd::Zero(3, 2), 10, 1), ValidationError);
}

MixtureSpec TwoClass1d(double separation, double var = 1.0) {
  MixtureSpec s;
  s.weights = {0.5, 0.5};
  s.means = {Eigen::VectorXd::Constant(1, -separation / 2),
             Eigen::VectorXd::Constant(1, separation / 2)};
  s.variances = {Eigen::VectorXd::Constant(1, var), Eigen::VectorXd::Constant(1, var)};
  return s;
}

TEST_CASE("mixture generator: information anchors") {
  CHECK(MixtureMutualInformation(TwoClass1d(0.0))->value == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(MixtureMutualInformation(TwoClass1d(40.0))->value ==
        doctest::Approx(1.0).epsilon(1e-6));
  MixtureSpec three = TwoClass1d(0.0);
  three.means.push_back(Eigen::VectorXd::Constant(1, 0.0));
  three.variances.push_back(Eigen::VectorXd::Constant(1, 1.0));
  three.weights = {0.2, 0.3, 0.5};
  CHECK(MixtureMutualInformation(three)->value < 1e-9);

  // Two unit Gaussians two apart: I = H(S) - E h_b(P(S|x)), by a fine
  // Riemann sum independent of the library.
  double h = 0.0;
  const double dx = 1e-4;
  for (double x = -15; x < 15; x += dx) {
    const double a = std::exp(-0.5 * (x + 1) * (x + 1)), b = std::exp(-0.5 * (x - 1) * (x - 1));
    const double q = a / (a + b), px = 0.5 * (a + b) / std::sqrt(2 * M_PI);
    if (q > 0 && q < 1) h -= px * dx * (q * std::log2(q) + (1 - q) * std::log2(1 - q));
  }
  const double truth = 1.0 - h;
  const auto spec = TwoClass1d(2.0);
  CHECK(MixtureMutualInformation(spec)->value == doctest::Approx(truth).epsilon(1e-5));

  const auto data = GenMixture(spec, 20000, 4);
  REQUIRE(data.mutual_information.has_value());
  const auto [train, test] = SplitTrainTest(data.batch, 1);
  const double bound = Attack(train.x, train.s, test.x, test.s, 2).leakage_bits.value;
  CHECK(std::abs(bound - data.mutual_information->value) <= 0.05);
}

TEST_CASE("mixture generator: 2-D quadrature and identities") {
  MixtureSpec s;
  s.weights = {0.5, 0.5};
  s.means = {Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 0)};
  s.variances = {Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)};
  // The second coordinate is pure noise, so the 1-D value must be reproduced.
  CHECK(MixtureMutualInformation(s)->value ==
        doctest::Approx(MixtureMutualInformation(TwoClass1d(2.0))->value).epsilon(1e-3));
  s.means = {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)};
  s.variances = {Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3)};
  CHECK_FALSE(MixtureMutualInformation(s).has_value());

  const auto d = GenMixture(s, 3000, 8, {5, 0.6});
  REQUIRE(d.batch.identity.has_value());
  for (int i = 0; i < d.batch.size(); ++i) {
    CHECK((*d.batch.identity)[i] / 5 == d.batch.s[i]);
  }
}

TEST_CASE("generators always satisfy batch invariants") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> classes(1, 4), dims(1, 5);
  for (int trial = 0; trial < 30; ++trial) {
    MixtureSpec s;
    const int k = classes(rng), d = dims(rng);
    const auto w = testing::RandomSimplex(k, rng);
    s.weights = w;
    for (int c = 0; c < k; ++c) {
      s.means.push_back(testing::NormalMatrix(d, 1, rng).col(0) * 3.0);
      s.variances.push_back(testing::NormalMatrix(d, 1, rng).col(0).array().exp().matrix());
    }
    const auto m = GenMixture(s, 200, trial, {trial % 3, 0.4});
    CHECK_NOTHROW(m.batch.Validate());
    const auto m2 = GenMixture(s, 200, trial, {trial % 3, 0.4});
    CHECK(SameBatch(m.batch, m2.batch));
    const auto dj = GenDiscrete(testing::RandomJoint(k, d + 1, rng, true), 3, 150, trial);
    CHECK_NOTHROW(dj.batch.Validate());
  }
  MixtureSpec bad = TwoClass1d(1.0);
  bad.weights = {0.6, 0.6};
  CHECK_THROWS_AS(GenMixture(bad, 10, 1), ValidationError);
  bad = TwoClass1d(1.0, 0.0);
  CHECK_THROWS_AS(GenMixture(bad, 10, 1), ValidationError);
}

TEST_CASE("train/test split") {
  std::mt19937_64 rng(13);
  SampleBatch b;
  b.x = testing::NormalMatrix(100, 2, rng);
  b.s.assign(100, 0);
  for (int i = 0; i < 100; i += 3) b.s[i] = 1;
  const auto [train, test] = SplitTrainTest(b, 5);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  CHECK(train.split == Split::kTrain);
  CHECK(test.split == Split::kTest);
  const auto [train2, test2] = SplitTrainTest(b, 5);
  CHECK(SameBatch(train, train2));
  CHECK(SameBatch(test, test2));
  CHECK_THROWS_AS(SplitTrainTest(b, 5, 1.0), ValidationError);
}

TEST_CASE("embedding files round-trip bit-exactly") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> rows(0, 40), cols(1, 6), classes(1, 5);
  std::uniform_real_distribution<double> wild(-1e300, 1e300);
  for (int trial = 0; trial < 100; ++trial) {
    SampleBatch b;
    b.n_classes = classes(rng);
    b.x = testing::NormalMatrix(rows(rng), cols(rng), rng);
    if (b.x.size() > 0) {
      b.x(0, 0) = wild(rng);
      b.x.data()[b.x.size() - 1] = 1e-310 * (trial + 1);  // subnormal
    }
    std::uniform_int_distribution<int> label(0, b.n_classes - 1);
    for (int i = 0; i < b.size(); ++i) b.s.push_back(label(rng));
    if (trial % 2) {
      b.identity.emplace();
      for (int i = 0; i < b.size(); ++i) b.identity->push_back(i % 7);
    }
    std::stringstream ss;
    WriteEmbeddings(b, ss);
    CHECK(SameBatch(b, ReadEmbeddings(ss)));
  }
  const auto path = (std::filesystem::temp_directory_path() / "dvpf_roundtrip.emb").string();
  SampleBatch b;
  b.x = testing::NormalMatrix(5, 2, rng);
  b.s = {0, 1, 1, 0, 1};
  SaveEmbeddings(b, path);
  CHECK(SameBatch(b, LoadEmbeddings(path)));
  std::filesystem::remove(path);
}

TEST_CASE("embedding fixtures") {
  SUBCASE("reference file") {
    CHECK(FileChecksum(kFixtures + "/reference.emb") == "996538ddac92de42");
    const SampleBatch b = LoadEmbeddings(kFixtures + "/reference.emb");
    CHECK(b.size() == 12);
    CHECK(b.d_x() == 3);
    CHECK(b.n_classes == 3);
    REQUIRE(b.identity.has_value());
    CHECK((*b.identity)[5] == 1);
    CHECK(b.s[5] == 2);
  }
  SUBCASE("malformed files name their line") {
    CHECK(ParseErrorLine([] { LoadEmbeddings(kFixtures + "/bad_label.emb"); }) == 4);
    CHECK(ParseErrorLine([] { LoadEmbeddings(kFixtures + "/ragged.emb"); }) == 3);
    CHECK(ParseErrorLine([] { LoadEmbeddings(kFixtures + "/bad_header.emb"); }) == 1);
    CHECK(ParseErrorLine([] { LoadEmbeddings(kFixtures + "/short.emb"); }) == 4);
  }
  SUBCASE("inline malformations") {
    auto line_of = [](const std::string& text) {
      return ParseErrorLine([&] {
        std::stringstream ss(text);
        ReadEmbeddings(ss);
      });
    };
    CHECK(line_of("dvpf-emb-1 1 1 2 0\n-1 0 nan\n") == 2);
    CHECK(line_of("dvpf-emb-1 1 1 2 0\n3 0 1.0\n") == 2);
    CHECK(line_of("dvpf-emb-1 1 1 2 1\n-2 0 1.0\n") == 2);
    CHECK(line_of("dvpf-emb-1 1 1 2 0\n-1 0 1.0\n\n-1 0 1.0\n") == 4);
    CHECK(line_of("dvpf-emb-1 1 x 2 0\n") == 1);
    CHECK(line_of("") == 1);
  }
  CHECK_THROWS_AS(LoadEmbeddings(kFixtures + "/missing.emb"), IoError);
}

TEST_CASE("joint and key-value documents") {
  const JointDistribution j = LoadJoint(kFixtures + "/joint_2x4.txt");
  CHECK(j.s_size() == 2);
  CHECK(j.x_size() == 4);
  CHECK(j(1, 2) == 0.2);
  std::stringstream ragged("0.5 0.5\n0.25\n");
  CHECK(ParseErrorLine([&] { ReadJoint(ragged); }) == 2);

  std::stringstream kv("# comment\nalpha = 0.5\n\n steps=10 # trailing\n");
  const auto values = ReadKeyValues(kv);
  CHECK(values.size() == 2);
  CHECK(values.at("alpha") == "0.5");
  CHECK(values.at("steps") == "10");
  std::stringstream out;
  WriteKeyValues(values, out);
  CHECK(ReadKeyValues(out) == values);
  std::stringstream dup("a = 1\na = 2\n");
  CHECK(ParseErrorLine([&] { ReadKeyValues(dup); }) == 2);
  std::stringstream noeq("a 1\n");
  CHECK(ParseErrorLine([&] { ReadKeyValues(noeq); }) == 1);
}

}  // namespace
}  // namespace dvpf
