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

// Acceptance suite. Each criterion prints one PASS/FAIL line with its
// measured quantities and runtime; the exit status is nonzero if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dvpf/data_io.hpp"
#include "dvpf/errors.hpp"
#include "dvpf/eval_harness.hpp"
#include "dvpf/info_measures.hpp"
#include "dvpf/objectives.hpp"
#include "dvpf/pf_oracle.hpp"
#include "dvpf/tabular.hpp"
#include "dvpf/trainer.hpp"
#include "test_util.hpp"

namespace dvpf {
namespace {

using testing::NormalMatrix;
using testing::RandomJoint;
using testing::RandomSimplex;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

bool BitEqual(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

double Median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 1 ----------------------------------------------------------------------

Outcome EntropyAnchors() {
  const std::array<std::pair<int, double>, 3> anchors = {
      {{2, 1.0}, {4, 2.0}, {6, 2.585}}};
  Outcome out{true, ""};
  for (auto [k, expected] : anchors) {
    const double h = Entropy(DiscreteDistribution(std::vector<double>(k, 1.0 / k))).value;
    out.pass &= std::abs(h - expected) <= 1e-3;
    out.detail += Format("H(U%d)=%.6f ", k, h);
  }
  return out;
}

// 2 ----------------------------------------------------------------------

Outcome MiCeiling() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(1, 8);
  double worst = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const JointDistribution joint = RandomJoint(size(rng), size(rng), rng, trial % 3 == 0);
    const double mi = MutualInformation(joint).value;
    const double ceiling = std::min(Entropy(joint.MarginalX()).value,
                                    Entropy(joint.MarginalS()).value);
    worst = std::max(worst, mi - ceiling);
  }
  return {worst <= 1e-9, Format("max I - min(H(X),H(S)) = %.3g over 1000 joints", worst)};
}

// 3 ----------------------------------------------------------------------

Outcome LinearGaussianIdentity() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d_x = 2 + trial % 4, d_z = 1 + trial % 3;
    ModelBundle bundle(ModelSpecs::Uniform(d_x, d_z, 2, {}), 100 + trial);
    Eigen::VectorXd& phi = bundle.block(Block::kPhi);
    // Weights are (2 d_z) x d_x followed by 2 d_z biases; the log-variance
    // rows must not depend on x.
    Eigen::Map<Eigen::MatrixXd> w(phi.data(), 2 * d_z, d_x);
    w.bottomRows(d_z).setZero();
    std::uniform_real_distribution<double> logvar(-2.0, 1.0);
    for (int j = 0; j < d_z; ++j) phi(phi.size() - d_z + j) = logvar(rng);
    const Eigen::MatrixXd l = NormalMatrix(d_x, d_x, rng);
    const Eigen::MatrixXd sigma_x =
        l * l.transpose() + 0.1 * Eigen::MatrixXd::Identity(d_x, d_x);
    const LinearGaussian lg = LinearGaussianFromBundle(bundle, sigma_x);
    const double decomposed = ConditionalKlToReference(lg) - MarginalKlToReference(lg);
    const Eigen::MatrixXd cov_z =
        lg.a * sigma_x * lg.a.transpose() + Eigen::MatrixXd(lg.variance.asDiagonal());
    const double analytic =
        0.5 * (std::log(cov_z.determinant()) - lg.variance.array().log().sum());
    worst = std::max(worst, std::abs(decomposed - analytic));
  }
  return {worst <= 1e-6, Format("max |two-KL - analytic| = %.3g nats over 20 configs", worst)};
}

// 4 ----------------------------------------------------------------------

Channel RandomChannel(int nx, int nz, std::mt19937_64& rng) {
  Eigen::MatrixXd w(nx, nz);
  for (int x = 0; x < nx; ++x) {
    const auto row = RandomSimplex(nz, rng);
    for (int z = 0; z < nz; ++z) w(x, z) = row[z];
  }
  return Channel(w);
}

Outcome TabularBoundOrdering() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> ns_dist(2, 3), nx_dist(2, 5), nz_dist(2, 4);
  double worst = 1e300;
  for (int trial = 0; trial < 20; ++trial) {
    const int ns = ns_dist(rng), nx = nx_dist(rng), nz = nz_dist(rng);
    const JointDistribution joint = RandomJoint(ns, nx, rng);
    const Channel channel = RandomChannel(nx, nz, rng);
    const auto fit = SampleThroughChannel(joint, channel, 20000, rng);
    const auto eval = SampleThroughChannel(joint, channel, 20000, rng);
    const TabularDecoders d = FitTabularDecoders(fit, ns, nx, nz);
    const double plug_in = ComputeInducedInformations(joint, channel).leakage.value;
    const double bound = EstimateTabularP2(eval, joint, channel, d).leakage.value;
    worst = std::min(worst, bound - plug_in);
  }
  return {worst >= -0.05,
          Format("min (P2 estimate - plug-in I(S;Z)) = %.4f bits over 20 joints", worst)};
}

// 5 ----------------------------------------------------------------------

Outcome OracleDominance() {
  const JointDistribution joint = StandardCodebookJoint();
  std::vector<double> budgets;
  for (int i = 0; i <= 30; ++i) budgets.push_back(i * 0.01);
  const PFCurve curve = ComputePFCurve(joint, budgets, 4);

  const std::vector<double> alphas = {0.0, 1.0, 2.0, 3.0, 10.0};
  std::map<double, std::vector<double>> utility, leakage;
  for (std::uint64_t seed : {1, 2, 3}) {
    const SyntheticDataset data = MakeSynthetic("codebook", 20000, seed);
    const auto [train, test] = SplitTrainTest(data.batch, seed);
    TrainConfig config;
    config.variant = Variant::kP2;
    config.ResetStepSizes();
    config.steps = 3000;
    config.d_z = 2;
    config.seed = seed;
    SweepOptions options;
    options.eval_options.max_mixture_rows = 4000;
    for (const TradeoffPoint& p : SweepAlpha(train, test, config, alphas, options)) {
      if (p.failed) return {false, "fit failed at alpha " + std::to_string(p.alpha) + ": " + p.error};
      utility[p.alpha].push_back(p.utility_bits);
      leakage[p.alpha].push_back(p.leakage_mixture_bits);
    }
  }
  bool below = true;
  double closest = 1e300;
  std::string detail;
  for (double a : alphas) {
    const double u = Median3(utility[a]), l = Median3(leakage[a]);
    const double envelope = curve.ConcaveEnvelopeAt(l);
    below &= u <= envelope + 0.05;
    closest = std::min(closest, std::abs(envelope - u));
    detail += Format("a=%g:(%.3f,%.3f|%.3f) ", a, l, u, envelope);
  }
  detail += Format("closest=%.3f", closest);
  return {below && closest <= 0.1, detail};
}

// 6 ----------------------------------------------------------------------

Outcome TradeoffDirection() {
  const SyntheticDataset data = MakeSynthetic("mixture", 4000, 1);
  const auto [train, test] = SplitTrainTest(data.batch, 1);
  TrainConfig config;
  config.variant = Variant::kP1;
  config.ResetStepSizes();
  config.steps = 3000;
  config.batch_size = 256;
  config.step_sizes[Block::kXi] = 1e-2;
  config.seed = 7;
  const auto points = SweepAlpha(train, test, config, {0.1, 10.0});
  const TradeoffPoint& lo = points[0];
  const TradeoffPoint& hi = points[1];
  if (lo.failed || hi.failed) return {false, "fit failed: " + lo.error + hi.error};
  const bool pass = hi.leakage_bits < lo.leakage_bits &&
                    std::abs(hi.attack_accuracy - 0.5) <= 0.05 &&
                    lo.recon_nll < hi.recon_nll;
  return {pass, Format("a=0.1: leak=%.3f acc=%.3f recon=%.3f | a=10: leak=%.3f "
                       "acc=%.3f recon=%.3f",
                       lo.leakage_bits, lo.attack_accuracy, lo.recon_nll,
                       hi.leakage_bits, hi.attack_accuracy, hi.recon_nll)};
}

// 7 ----------------------------------------------------------------------

SampleBatch SmallMixture(int n, std::uint64_t seed) {
  MixtureSpec spec;
  spec.weights = {0.5, 0.5};
  spec.means = {Eigen::Vector3d(-1.5, 0, 0.5), Eigen::Vector3d(1.5, 0, -0.5)};
  spec.variances = {Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, 1, 1)};
  return GenMixture(spec, n, seed, {4, 0.5}).batch;
}

TrainConfig SmallConfig(Variant v) {
  TrainConfig c;
  c.variant = v;
  c.ResetStepSizes();
  c.steps = 20;
  c.batch_size = 16;
  c.d_z = 2;
  c.hidden = {8};
  c.adversary_inner_steps = 2;
  c.seed = 3;
  return c;
}

std::set<Block> Owners(int step, Variant v) {
  const bool p1 = v == Variant::kP1;
  switch (step) {
    case 0: return p1 ? std::set<Block>{Block::kXi} : std::set<Block>{};
    case 1: return p1 ? std::set<Block>{Block::kPhi, Block::kTheta}
                      : std::set<Block>{Block::kPhi, Block::kTheta, Block::kVarphi};
    case 2: return {Block::kEta};
    case 3: return {Block::kPhi, Block::kPsi};
    case 4: return {Block::kOmega};
    case 5: return p1 ? std::set<Block>{Block::kTau} : std::set<Block>{};
    case 6: return {Block::kPsi, Block::kTheta};
  }
  return {};
}

Outcome SixStepIntegrity() {
  const SampleBatch data = SmallMixture(64, 1);
  int violations = 0, idle_owned = 0;
  std::set<int> steps_seen;
  for (Variant v : {Variant::kP1, Variant::kP2}) {
    const TrainConfig c = SmallConfig(v);
    ModelBundle bundle(ModelSpecs::Uniform(3, 2, 2, {8}), 5);
    Optimizer opt(bundle);
    std::mt19937_64 rng(7), pick(9);
    std::array<Eigen::VectorXd, 8> prev;
    for (Block b : kAllBlocks) prev[BlockIndex(b)] = bundle.block(b);
    std::map<std::pair<int, Block>, int> changed;
    const StepObserver observer = [&](int step, const ModelBundle& m) {
      steps_seen.insert(step);
      const auto owners = Owners(step, v);
      for (Block b : kAllBlocks) {
        const bool same = BitEqual(prev[BlockIndex(b)], m.block(b));
        if (!same && !owners.count(b)) ++violations;
        if (!same) ++changed[{step, b}];
        prev[BlockIndex(b)] = m.block(b);
      }
    };
    for (int round = 0; round < 100; ++round) {
      std::vector<int> idx(16);
      for (int& i : idx) i = std::uniform_int_distribution<int>(0, 63)(pick);
      TrainRound(data.Rows(idx), bundle, c, opt, rng, observer);
    }
    for (int step = 0; step <= 6; ++step) {
      for (Block b : Owners(step, v)) {
        if (bundle.block(b).size() > 0 && changed[{step, b}] == 0) ++idle_owned;
      }
    }
  }
  bool all_six = true;
  for (int step = 1; step <= 6; ++step) all_six &= steps_seen.count(step) > 0;

  bool deterministic = true;
  for (Variant v : {Variant::kP1, Variant::kP2}) {
    const TrainConfig c = SmallConfig(v);
    auto history = [&] {
      std::ostringstream out;
      WriteHistoryJsonl(Fit(data, c).history, out);
      return out.str();
    };
    deterministic &= history() == history();
  }
  return {violations == 0 && idle_owned == 0 && all_six && deterministic,
          Format("foreign writes=%d, idle owned blocks=%d, all six steps observed=%s, "
                 "deterministic=%s",
                 violations, idle_owned, all_six ? "yes" : "no",
                 deterministic ? "yes" : "no")};
}

// 8 ----------------------------------------------------------------------

Outcome GradientFidelity() {
  ModelSpecs specs = ModelSpecs::Uniform(2, 1, 2, {}, Activation::kTanhLike);
  specs.encoder.hidden_widths = {2};
  std::mt19937_64 rng(8);
  SampleBatch batch;
  batch.x = NormalMatrix(6, 2, rng);
  batch.n_classes = 2;
  batch.s = {0, 1, 1, 0, 1, 0};
  ModelBundle bundle(specs, 21);
  std::normal_distribution<double> normal(0.0, 0.5);
  int params = 0;
  for (Block b : kAllBlocks) {
    for (Eigen::Index i = 0; i < bundle.block(b).size(); ++i) bundle.block(b)(i) = normal(rng);
    params += static_cast<int>(bundle.block(b).size());
  }
  const NoiseDraw noise = NoiseDraw::Sample(bundle, 6, 5, rng);
  const double h = 1e-4, alpha = 1.7;
  double worst = 0.0;
  for (Variant v : {Variant::kP1, Variant::kP2}) {
    BlockGradients grad;
    TotalObjectiveWithGradient(v, batch, bundle, alpha, noise, grad);
    ModelBundle probe = bundle;
    for (Block b : kAllBlocks) {
      for (Eigen::Index i = 0; i < probe.block(b).size(); ++i) {
        const double saved = probe.block(b)(i);
        probe.block(b)(i) = saved + h;
        const double up = TotalObjective(v, batch, probe, alpha, noise).total;
        probe.block(b)(i) = saved - h;
        const double down = TotalObjective(v, batch, probe, alpha, noise).total;
        probe.block(b)(i) = saved;
        const double fd = (up - down) / (2 * h);
        const double analytic = grad[BlockIndex(b)](i);
        // Relative error, floored so exact zeros compare absolutely.
        worst = std::max(worst, std::abs(analytic - fd) /
                                    std::max(std::abs(fd), 1e-3));
      }
    }
  }
  return {params <= 50 && worst <= 1e-2,
          Format("%d parameters, max relative error %.3g (P1 and P2)", params, worst)};
}

// 9 ----------------------------------------------------------------------

std::pair<double, double> BruteForceTmr(const std::vector<double>& gen,
                                        const std::vector<double>& imp, double target) {
  std::vector<double> cands = gen;
  cands.insert(cands.end(), imp.begin(), imp.end());
  cands.push_back(std::nextafter(*std::max_element(cands.begin(), cands.end()), 1e300));
  double best = std::numeric_limits<double>::infinity();
  for (double t : cands) {
    int accepted = 0;
    for (double v : imp) accepted += v >= t;
    if (accepted <= target * imp.size()) best = std::min(best, t);
  }
  int hits = 0;
  for (double v : gen) hits += v >= best;
  return {best, static_cast<double>(hits) / gen.size()};
}

Outcome TmrCorrectness() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(1, 40), level(0, 9);
  std::uniform_real_distribution<double> target(0.01, 0.99);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> gen(size(rng)), imp(size(rng));
    for (double& v : gen) v = level(rng) / 4.0;
    for (double& v : imp) v = level(rng) / 5.0;
    const double t = target(rng);
    const VerificationReport r = TmrAtFmr(gen, imp, t);
    const auto [threshold, tmr] = BruteForceTmr(gen, imp, t);
    mismatches += r.threshold != threshold || r.tmr != tmr;
  }
  std::normal_distribution<double> normal;
  std::vector<double> gen(10000), imp(10000);
  for (double& v : gen) v = normal(rng) + 10.0;
  for (double& v : imp) v = normal(rng);
  bool separated = true;
  for (double t : {0.001, 0.1, 0.5}) separated &= TmrAtFmr(gen, imp, t).tmr == 1.0;
  for (double& v : gen) v = normal(rng);
  double gap = 0.0;
  for (double t : {0.01, 0.05, 0.1, 0.3, 0.5}) {
    gap = std::max(gap, std::abs(TmrAtFmr(gen, imp, t).tmr - t));
  }
  return {mismatches == 0 && separated && gap <= 0.03,
          Format("oracle mismatches=%d/50, separated TMR=1: %s, identical max |TMR-FMR|=%.4f",
                 mismatches, separated ? "yes" : "no", gap)};
}

// 10 ---------------------------------------------------------------------

bool SameBatch(const SampleBatch& a, const SampleBatch& b) {
  if (a.x.rows() != b.x.rows() || a.x.cols() != b.x.cols()) return false;
  if (a.x.size() > 0 &&
      std::memcmp(a.x.data(), b.x.data(), sizeof(double) * a.x.size()) != 0) {
    return false;
  }
  return a.s == b.s && a.identity == b.identity && a.n_classes == b.n_classes;
}

Outcome FileRoundTrip() {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> rows(0, 50), cols(1, 8), classes(1, 6);
  std::uniform_real_distribution<double> wild(-1e300, 1e300);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SampleBatch b;
    b.n_classes = classes(rng);
    b.x = NormalMatrix(rows(rng), cols(rng), rng);
    if (b.x.size() > 0) {
      b.x(0, 0) = wild(rng);
      b.x.data()[b.x.size() - 1] = 3e-310;
    }
    std::uniform_int_distribution<int> label(0, b.n_classes - 1);
    for (int i = 0; i < b.size(); ++i) b.s.push_back(label(rng));
    if (trial % 2) {
      b.identity.emplace();
      for (int i = 0; i < b.size(); ++i) b.identity->push_back(i % 5);
    }
    std::stringstream ss;
    WriteEmbeddings(b, ss);
    failures += !SameBatch(b, ReadEmbeddings(ss));
  }
  const std::string dir = DVPF_FIXTURE_DIR;
  const std::vector<std::pair<std::string, std::size_t>> fixtures = {
      {"bad_label.emb", 4}, {"ragged.emb", 3}, {"bad_header.emb", 1}, {"short.emb", 4}};
  int wrong_lines = 0;
  for (const auto& [name, line] : fixtures) {
    std::size_t got = 0;
    try {
      LoadEmbeddings(dir + "/" + name);
    } catch (const ParseError& e) {
      got = e.line();
    }
    wrong_lines += got != line;
  }
  return {failures == 0 && wrong_lines == 0,
          Format("round-trip failures=%d/100, fixtures with wrong or missing line=%d/4",
                 failures, wrong_lines)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace dvpf

int main(int argc, char** argv) {
  using dvpf::Criterion;
  const std::vector<Criterion> criteria = {
      {1, "entropy anchors", 1, dvpf::EntropyAnchors},
      {2, "mutual information ceiling", 10, dvpf::MiCeiling},
      {3, "linear-Gaussian two-KL identity", 1, dvpf::LinearGaussianIdentity},
      {4, "tabular P2 leakage bound ordering", 120, dvpf::TabularBoundOrdering},
      {5, "oracle dominance on the codebook dataset", 900, dvpf::OracleDominance},
      {6, "trade-off direction on the mixture dataset", 600, dvpf::TradeoffDirection},
      {7, "six-step integrity and determinism", 120, dvpf::SixStepIntegrity},
      {8, "gradient fidelity", 60, dvpf::GradientFidelity},
      {9, "TMR@FMR correctness", 30, dvpf::TmrCorrectness},
      {10, "dvpf-emb-1 round-trip and parse errors", 30, dvpf::FileRoundTrip},
  };
  // Optional arguments select criteria by number.
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    dvpf::Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = outcome.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s [%.2fs / %.0fs%s] %s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                secs, c.budget_s, in_time ? "" : " over budget", outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
