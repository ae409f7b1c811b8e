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
// Post-hoc audits of a trained representation: attribute-inference attacks,
// leakage and utility in bits, and verification TMR at a fixed FMR.
#ifndef DVPF_EVAL_HARNESS_HPP_
#define DVPF_EVAL_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dvpf/info_measures.hpp"
#include "dvpf/model.hpp"
#include "dvpf/sample_batch.hpp"

namespace dvpf {

enum class Attacker { kMarginClassifier, kLogistic };

std::string_view AttackerName(Attacker a);  // "svm" / "logistic"
std::optional<Attacker> AttackerFromName(std::string_view name);

struct AttackReport {
  double accuracy = 0.0;
  Bits leakage_bits;
  double cross_entropy_bits = 0.0;
  int n_train = 0;
  int n_test = 0;
  Attacker attacker = Attacker::kMarginClassifier;
};

// Fits a fresh classifier on standardized train features and scores the test
// split. The margin classifier is a linear squared-hinge SVM (C = 1,
// one-vs-rest for N > 2) whose scores are calibrated by a multinomial logistic
// fit on train; the logistic attacker is a ridge multinomial regression.
// leakage_bits = ClassifierMiBound on the test split.
AttackReport Attack(const Eigen::MatrixXd& z_train, std::span<const int> s_train,
                    const Eigen::MatrixXd& z_test, std::span<const int> s_test,
                    int n_classes,
                    Attacker attacker = Attacker::kMarginClassifier);

struct VerificationReport {
  double tmr = 0.0;
  double fmr_target = 0.0;
  double achieved_fmr = 0.0;
  double threshold = 0.0;
  int n_genuine = 0;
  int n_impostor = 0;
};

// Threshold = smallest candidate t (any observed score, or one step above the
// largest) with #{impostor >= t} <= fmr_target * n_impostor.
VerificationReport TmrAtFmr(std::span<const double> genuine,
                            std::span<const double> impostor,
                            double fmr_target);

struct VerificationScores {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

inline constexpr int kMaxVerificationPairs = 10000;

// Cosine similarities of posterior means over same-identity (genuine) and
// cross-identity (impostor) pairs. Rows are first sorted by (identity, x), so
// the result does not depend on input order.
VerificationScores ComputeVerificationScores(const ModelBundle& bundle,
                                             const SampleBatch& batch,
                                             std::uint64_t pairing_seed,
                                             int max_pairs = kMaxVerificationPairs);
VerificationScores ComputeVerificationScores(const Eigen::MatrixXd& embeddings,
                                             std::span<const int> identity,
                                             std::uint64_t pairing_seed,
                                             int max_pairs = kMaxVerificationPairs);

// I(label; Z) for Z drawn from a diagonal-Gaussian posterior per row, with
// p(z | c) the mixture of the rows labelled c and p(z) the mixture of all
// rows. One reparameterized draw per row, seeded.
Bits MixtureInformation(const EncoderPosterior& posterior,
                        std::span<const int> labels, std::uint64_t seed);

struct TradeoffPoint {
  double alpha = 0.0;
  double utility_bits = 0.0;          // mixture I(identity; Z), else I(X; Z)
  double leakage_bits = 0.0;          // attack classifier bound
  double leakage_mixture_bits = 0.0;  // mixture I(S; Z)
  double attack_accuracy = 0.0;
  std::optional<double> tmr_at_fmr;   // needs identity labels
  double recon_nll = 0.0;             // nats, test split
  bool failed = false;
  std::string error;
};

struct EvalOptions {
  Attacker attacker = Attacker::kMarginClassifier;
  double fmr_target = 0.1;
  std::uint64_t seed = 0;
  // Rows used by the quadratic-cost mixture estimator.
  int max_mixture_rows = 2000;
};

TradeoffPoint EvaluateTradeoff(const ModelBundle& bundle,
                               const SampleBatch& train,
                               const SampleBatch& test, double alpha,
                               const EvalOptions& options = {});

}  // namespace dvpf

#endif  // DVPF_EVAL_HARNESS_HPP_
