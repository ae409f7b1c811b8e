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
#include "dvpf/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "dvpf/errors.hpp"
#include "dvpf/objectives.hpp"
#include "minimize.hpp"

namespace dvpf {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kSvmCost = 1.0;

void CheckLabels(std::span<const int> s, int n_classes, const char* what) {
  for (int v : s) {
    if (v < 0 || v >= n_classes) {
      throw ValidationError(std::string(what) + " label " + std::to_string(v) +
                            " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
}

struct Standardizer {
  Eigen::RowVectorXd mean, scale;

  explicit Standardizer(const MatrixXd& x) {
    mean = x.colwise().mean();
    scale = ((x.rowwise() - mean).array().square().colwise().sum() /
             std::max<double>(1.0, static_cast<double>(x.rows())))
                .sqrt()
                .matrix();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
      if (!(scale(j) > 1e-12)) scale(j) = 1.0;
    }
  }

  MatrixXd Apply(const MatrixXd& x) const {
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }
};

MatrixXd SoftmaxRows(const MatrixXd& logits) {
  MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

// Ridge multinomial logistic regression: minimizes
//   (1/n) [sum_i -log softmax(x_i W + b)_{s_i} + 1/2 |W|^2].
struct Multinomial {
  MatrixXd w;        // d x k
  Eigen::RowVectorXd b;

  MatrixXd Probabilities(const MatrixXd& x) const {
    return SoftmaxRows((x * w).rowwise() + b);
  }
};

Multinomial FitMultinomial(const MatrixXd& x, std::span<const int> s, int k) {
  const int n = static_cast<int>(x.rows()), d = static_cast<int>(x.cols());
  MatrixXd y = MatrixXd::Zero(n, k);
  for (int i = 0; i < n; ++i) y(i, s[i]) = 1.0;
  auto unpack = [d, k](const VectorXd& p, MatrixXd& w, Eigen::RowVectorXd& b) {
    w = Eigen::Map<const MatrixXd>(p.data(), d, k);
    b = Eigen::Map<const Eigen::RowVectorXd>(p.data() + d * k, k);
  };
  const internal::SmoothObjective objective = [&](const VectorXd& p,
                                                  VectorXd& grad) {
    MatrixXd w;
    Eigen::RowVectorXd b;
    unpack(p, w, b);
    const MatrixXd logits = (x * w).rowwise() + b;
    double loss = 0.5 * w.squaredNorm();
    for (int i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      loss += m + std::log((logits.row(i).array() - m).exp().sum()) - logits(i, s[i]);
    }
    const MatrixXd diff = SoftmaxRows(logits) - y;
    grad.resize(p.size());
    Eigen::Map<MatrixXd>(grad.data(), d, k) = (x.transpose() * diff + w) / n;
    Eigen::Map<Eigen::RowVectorXd>(grad.data() + d * k, k) = diff.colwise().sum() / n;
    return loss / n;
  };
  const VectorXd p = internal::Minimize(objective, VectorXd::Zero((d + 1) * k));
  Multinomial m;
  unpack(p, m.w, m.b);
  return m;
}

// Linear squared-hinge SVM on labels y in {-1, +1}:
//   (1/n) [1/2 |w|^2 + C sum_i max(0, 1 - y_i (w x_i + b))^2].
VectorXd FitSvm(const MatrixXd& x, const VectorXd& y) {
  const int n = static_cast<int>(x.rows()), d = static_cast<int>(x.cols());
  const internal::SmoothObjective objective = [&](const VectorXd& p,
                                                  VectorXd& grad) {
    const VectorXd w = p.head(d);
    const VectorXd margin =
        (1.0 - (y.array() * ((x * w).array() + p(d)))).max(0.0).matrix();
    const VectorXd coef = -2.0 * kSvmCost * margin.cwiseProduct(y);
    grad.resize(d + 1);
    grad.head(d) = (w + x.transpose() * coef) / n;
    grad(d) = coef.sum() / n;
    return (0.5 * w.squaredNorm() + kSvmCost * margin.squaredNorm()) / n;
  };
  return internal::Minimize(objective, VectorXd::Zero(d + 1));
}

struct MarginModel {
  std::vector<VectorXd> machines;  // one (binary) or one per class

  MatrixXd Scores(const MatrixXd& x) const {
    const int d = static_cast<int>(x.cols());
    MatrixXd out(x.rows(), static_cast<Eigen::Index>(machines.size()));
    for (std::size_t c = 0; c < machines.size(); ++c) {
      out.col(c) = (x * machines[c].head(d)).array() + machines[c](d);
    }
    return out;
  }
};

MarginModel FitMargin(const MatrixXd& x, std::span<const int> s, int k) {
  MarginModel m;
  const int n = static_cast<int>(x.rows());
  auto binary_labels = [&](int positive) {
    VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = s[i] == positive ? 1.0 : -1.0;
    return y;
  };
  if (k == 2) {
    m.machines.push_back(FitSvm(x, binary_labels(1)));
  } else {
    for (int c = 0; c < k; ++c) m.machines.push_back(FitSvm(x, binary_labels(c)));
  }
  return m;
}

std::vector<int> PredictFromScores(const MatrixXd& scores, int k) {
  std::vector<int> out(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (k == 2) {
      out[i] = scores(i, 0) > 0.0 ? 1 : 0;
    } else {
      scores.row(i).maxCoeff(&out[i]);
    }
  }
  return out;
}

std::vector<int> Argmax(const MatrixXd& p) {
  std::vector<int> out(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i).maxCoeff(&out[i]);
  return out;
}

double CosineSimilarity(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

std::string_view AttackerName(Attacker a) {
  return a == Attacker::kMarginClassifier ? "svm" : "logistic";
}

std::optional<Attacker> AttackerFromName(std::string_view name) {
  if (name == "svm" || name == "margin") return Attacker::kMarginClassifier;
  if (name == "logistic") return Attacker::kLogistic;
  return std::nullopt;
}

AttackReport Attack(const MatrixXd& z_train, std::span<const int> s_train,
                    const MatrixXd& z_test, std::span<const int> s_test,
                    int n_classes, Attacker attacker) {
  if (n_classes < 2) throw ValidationError("attack needs n_classes >= 2");
  if (z_train.rows() != static_cast<Eigen::Index>(s_train.size()) ||
      z_test.rows() != static_cast<Eigen::Index>(s_test.size())) {
    throw ValidationError("representation rows and labels disagree");
  }
  if (z_train.cols() != z_test.cols()) {
    throw ValidationError("train and test representations differ in width");
  }
  if (z_test.rows() == 0) throw ValidationError("empty test split");
  CheckLabels(s_train, n_classes, "train");
  CheckLabels(s_test, n_classes, "test");
  if (std::set<int>(s_train.begin(), s_train.end()).size() < 2) {
    throw ValidationError("train split holds a single class");
  }
  const Standardizer standardizer(z_train);
  const MatrixXd train = standardizer.Apply(z_train);
  const MatrixXd test = standardizer.Apply(z_test);

  MatrixXd probs;
  std::vector<int> predicted;
  if (attacker == Attacker::kMarginClassifier) {
    const MarginModel margin = FitMargin(train, s_train, n_classes);
    const MatrixXd train_scores = margin.Scores(train);
    const MatrixXd test_scores = margin.Scores(test);
    const Multinomial calibration = FitMultinomial(train_scores, s_train, n_classes);
    probs = calibration.Probabilities(test_scores);
    predicted = PredictFromScores(test_scores, n_classes);
  } else {
    const Multinomial model = FitMultinomial(train, s_train, n_classes);
    probs = model.Probabilities(test);
    predicted = Argmax(probs);
  }
  int correct = 0;
  for (std::size_t i = 0; i < s_test.size(); ++i) correct += predicted[i] == s_test[i];

  AttackReport r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(s_test.size());
  const ClassifierBound bound = ClassifierMiBound(s_test, probs);
  r.leakage_bits = bound.bits;
  r.cross_entropy_bits = bound.cross_entropy_bits;
  r.n_train = static_cast<int>(s_train.size());
  r.n_test = static_cast<int>(s_test.size());
  r.attacker = attacker;
  return r;
}

VerificationReport TmrAtFmr(std::span<const double> genuine,
                            std::span<const double> impostor,
                            double fmr_target) {
  if (genuine.empty() || impostor.empty()) {
    throw ValidationError("genuine and impostor score lists must be nonempty");
  }
  if (!(fmr_target > 0.0 && fmr_target < 1.0)) {
    throw ValidationError("fmr_target must lie in (0, 1)");
  }
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::sort(imp.begin(), imp.end());
  std::sort(gen.begin(), gen.end());
  for (double v : imp)
    if (!std::isfinite(v)) throw ValidationError("non-finite impostor score");
  for (double v : gen)
    if (!std::isfinite(v)) throw ValidationError("non-finite genuine score");
  const double n_imp = static_cast<double>(imp.size());
  auto accepted = [&](double t) {
    return static_cast<double>(imp.end() - std::lower_bound(imp.begin(), imp.end(), t));
  };
  std::vector<double> candidates = imp;
  candidates.insert(candidates.end(), gen.begin(), gen.end());
  candidates.push_back(std::nextafter(std::max(imp.back(), gen.back()),
                                      std::numeric_limits<double>::infinity()));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  // Acceptance is non-increasing in t, so the valid set is a suffix.
  const auto it = std::partition_point(
      candidates.begin(), candidates.end(),
      [&](double t) { return accepted(t) > fmr_target * n_imp; });
  VerificationReport r;
  r.threshold = *it;
  r.fmr_target = fmr_target;
  r.achieved_fmr = accepted(r.threshold) / n_imp;
  r.tmr = static_cast<double>(gen.end() - std::lower_bound(gen.begin(), gen.end(), r.threshold)) /
          static_cast<double>(gen.size());
  r.n_genuine = static_cast<int>(gen.size());
  r.n_impostor = static_cast<int>(imp.size());
  return r;
}

VerificationScores ComputeVerificationScores(const MatrixXd& embeddings,
                                             std::span<const int> identity,
                                             std::uint64_t pairing_seed,
                                             int max_pairs) {
  const int n = static_cast<int>(embeddings.rows());
  if (static_cast<int>(identity.size()) != n) {
    throw ValidationError("identity labels and embeddings disagree");
  }
  if (max_pairs < 1) throw ValidationError("max_pairs must be >= 1");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (identity[a] != identity[b]) return identity[a] < identity[b];
    for (Eigen::Index k = 0; k < embeddings.cols(); ++k) {
      if (embeddings(a, k) != embeddings(b, k)) return embeddings(a, k) < embeddings(b, k);
    }
    return false;
  });
  std::vector<std::vector<int>> groups;
  for (int r = 0; r < n; ++r) {
    if (r == 0 || identity[order[r]] != identity[order[r - 1]]) groups.emplace_back();
    groups.back().push_back(order[r]);
  }
  if (groups.size() < 2) throw ValidationError("verification needs >= 2 identities");
  std::vector<double> pair_counts;
  double genuine_total = 0.0;
  for (const auto& g : groups) {
    const double c = 0.5 * static_cast<double>(g.size()) * (g.size() - 1.0);
    pair_counts.push_back(c);
    genuine_total += c;
  }
  if (genuine_total == 0.0) throw ValidationError("no identity has two samples");
  const double impostor_total = 0.5 * n * (n - 1.0) - genuine_total;

  std::mt19937_64 rng(pairing_seed);
  auto score = [&](int a, int b) {
    return CosineSimilarity(embeddings.row(a), embeddings.row(b));
  };
  VerificationScores out;
  if (genuine_total <= max_pairs) {
    for (const auto& g : groups)
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j) out.genuine.push_back(score(g[i], g[j]));
  } else {
    std::discrete_distribution<int> pick_group(pair_counts.begin(), pair_counts.end());
    for (int p = 0; p < max_pairs; ++p) {
      const auto& g = groups[pick_group(rng)];
      std::uniform_int_distribution<int> member(0, static_cast<int>(g.size()) - 1);
      const int a = member(rng);
      int b = member(rng);
      while (b == a) b = member(rng);
      out.genuine.push_back(score(g[a], g[b]));
    }
  }
  // Canonical rows: position r in `order` is the r-th sorted sample.
  std::vector<int> group_of(n);
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (int row : groups[gi]) group_of[row] = static_cast<int>(gi);
  if (impostor_total <= max_pairs) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (group_of[order[i]] != group_of[order[j]]) out.impostor.push_back(score(order[i], order[j]));
  } else {
    std::uniform_int_distribution<int> row(0, n - 1);
    while (static_cast<int>(out.impostor.size()) < max_pairs) {
      const int a = order[row(rng)], b = order[row(rng)];
      if (group_of[a] == group_of[b]) continue;
      out.impostor.push_back(score(a, b));
    }
  }
  return out;
}

VerificationScores ComputeVerificationScores(const ModelBundle& bundle,
                                             const SampleBatch& batch,
                                             std::uint64_t pairing_seed,
                                             int max_pairs) {
  if (!batch.identity) throw ValidationError("batch carries no identity labels");
  return ComputeVerificationScores(Posterior(bundle, batch.x).mean, *batch.identity,
                                   pairing_seed, max_pairs);
}

Bits MixtureInformation(const EncoderPosterior& posterior,
                        std::span<const int> labels, std::uint64_t seed) {
  const int n = static_cast<int>(posterior.mean.rows());
  const int d = static_cast<int>(posterior.mean.cols());
  if (static_cast<int>(labels.size()) != n || n == 0) {
    throw ValidationError("mixture estimator needs one label per row");
  }
  std::vector<int> dense(labels.begin(), labels.end());
  {
    std::vector<int> sorted = dense;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int& v : dense) v = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
  }
  const int k = *std::max_element(dense.begin(), dense.end()) + 1;
  std::vector<double> count(k, 0.0);
  for (int v : dense) count[v] += 1.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const MatrixXd inv_var = (-posterior.log_variance.array()).exp().matrix();
  const VectorXd lv_sum = posterior.log_variance.rowwise().sum();
  double total = 0.0;
  Eigen::RowVectorXd z(d);
  std::vector<double> log_density(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      z(c) = posterior.mean(i, c) +
             std::exp(0.5 * posterior.log_variance(i, c)) * normal(rng);
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      const double q = ((z - posterior.mean.row(j)).array().square() *
                        inv_var.row(j).array()).sum();
      log_density[j] = -0.5 * (q + lv_sum(j));
      peak = std::max(peak, log_density[j]);
    }
    double all = 0.0, same = 0.0;
    for (int j = 0; j < n; ++j) {
      const double w = std::exp(log_density[j] - peak);
      all += w;
      if (dense[j] == dense[i]) same += w;
    }
    total += std::log(same / count[dense[i]]) - std::log(all / n);
  }
  return FromNats(std::max(0.0, total / n));
}

TradeoffPoint EvaluateTradeoff(const ModelBundle& bundle,
                               const SampleBatch& train,
                               const SampleBatch& test, double alpha,
                               const EvalOptions& options) {
  train.Validate();
  test.Validate();
  if (train.d_x() != bundle.d_x() || test.d_x() != bundle.d_x()) {
    throw ValidationError("batch width does not match the model");
  }
  TradeoffPoint p;
  p.alpha = alpha;
  const MatrixXd z_train = Posterior(bundle, train.x).mean;
  const EncoderPosterior post_test = Posterior(bundle, test.x);
  const AttackReport attack = Attack(z_train, train.s, post_test.mean, test.s,
                                     bundle.n_classes(), options.attacker);
  p.attack_accuracy = attack.accuracy;
  p.leakage_bits = attack.leakage_bits.value;

  std::mt19937_64 rng(options.seed);
  const NoiseDraw noise = NoiseDraw::Sample(bundle, test.size(), 1, rng);
  p.recon_nll = UtilityLowerBound(test, bundle, noise).recon_nll;

  std::vector<int> rows(test.size());
  std::iota(rows.begin(), rows.end(), 0);
  if (test.size() > options.max_mixture_rows) {
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(options.max_mixture_rows);
    std::sort(rows.begin(), rows.end());
  }
  const SampleBatch sub = test.Rows(rows);
  const EncoderPosterior post_sub = Posterior(bundle, sub.x);
  std::vector<int> utility_labels(sub.size());
  if (sub.identity) {
    utility_labels = *sub.identity;
  } else {
    std::iota(utility_labels.begin(), utility_labels.end(), 0);
  }
  p.utility_bits = MixtureInformation(post_sub, utility_labels, options.seed + 1).value;
  p.leakage_mixture_bits = MixtureInformation(post_sub, sub.s, options.seed + 2).value;

  if (test.identity) {
    try {
      const VerificationScores scores =
          ComputeVerificationScores(post_test.mean, *test.identity, options.seed + 3);
      p.tmr_at_fmr = TmrAtFmr(scores.genuine, scores.impostor, options.fmr_target).tmr;
    } catch (const ValidationError&) {
      p.tmr_at_fmr.reset();
    }
  }
  return p;
}

}  // namespace dvpf
