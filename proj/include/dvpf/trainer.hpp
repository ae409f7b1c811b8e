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
// Alternating block-coordinate training of a ModelBundle and alpha sweeps.
//
// A round is a sensitive-decoder best response followed by six updates:
//   1. encoder, utility and uncertainty decoders ascend the Lagrangian
//   2. latent discriminator eta descends its cross-entropy
//   3. encoder and prior generator ascend that cross-entropy
//   4. output discriminator omega descends its cross-entropy
//   5. sensitive-class discriminator tau descends its cross-entropy (P1)
//   6. prior generator and utility decoder ascend the output cross-entropy
// Discriminator and best-response updates repeat adversary_inner_steps times.
#ifndef DVPF_TRAINER_HPP_
#define DVPF_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dvpf/eval_harness.hpp"
#include "dvpf/model.hpp"
#include "dvpf/objectives.hpp"
#include "dvpf/sample_batch.hpp"

namespace dvpf {

// Blocks updated by some step of the given variant.
std::vector<Block> TrainedBlocks(Variant variant, bool explicit_prior);

// 1e-3 for encoder, decoders and generator; 1e-4 for discriminators.
std::map<Block, double> DefaultStepSizes(Variant variant, bool explicit_prior);

struct TrainConfig {
  Variant variant = Variant::kP1;
  double alpha = 1.0;
  int steps = 1000;  // training rounds
  int batch_size = 64;
  std::map<Block, double> step_sizes = DefaultStepSizes(Variant::kP1, false);
  int adversary_inner_steps = 5;
  std::uint64_t seed = 0;
  int d_z = 4;
  std::vector<int> hidden = {32};
  Activation activation = Activation::kReluLike;
  bool explicit_prior = false;
  // P1 only: update xi inside step 1 with the printed signs instead of the
  // separate best response.
  bool printed_sign = false;
  // Evaluation snapshot interval in rounds; 0 disables.
  int snapshot_every = 0;
  double divergence_factor = 10.0;
  int divergence_patience = 100;

  // Throws ValidationError.
  void Validate() const;
  // Resets step_sizes to the defaults of the current variant and prior.
  void ResetStepSizes();
};

// Applies flat key-value settings on top of `config`. Keys: variant, alpha,
// steps, batch_size, adversary_inner_steps, seed, d_z, hidden (comma list),
// activation, explicit_prior, printed_sign, snapshot_every, divergence_factor,
// divergence_patience, lr.<block>.
// Throws ValidationError on unknown keys or malformed values.
TrainConfig ApplyConfigValues(TrainConfig config,
                              const std::map<std::string, std::string>& values);
std::map<std::string, std::string> ConfigValues(const TrainConfig& config);

// Per-block Adam state.
class Optimizer {
 public:
  explicit Optimizer(const ModelBundle& bundle);

  // Moves `block` along +gradient (ascend) or -gradient. A zero step size
  // leaves the block and its moments untouched.
  void Update(ModelBundle& bundle, Block block, const Eigen::VectorXd& gradient,
              double step_size, bool ascend);

 private:
  struct State {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::int64_t t = 0;
  };
  std::array<State, 8> states_;
};

// Called after each update with its index: 0 is the best response, 1..6 the
// numbered steps. Discriminator steps report once after their inner loop.
using StepObserver = std::function<void(int step, const ModelBundle& bundle)>;

// One round on `batch`. Returns the breakdown on `batch` after the round.
// Throws NumericError naming the step on a non-finite loss or gradient, before
// that step touches the bundle.
LossBreakdown TrainRound(const SampleBatch& batch, ModelBundle& bundle,
                         const TrainConfig& config, Optimizer& optimizer,
                         std::mt19937_64& rng,
                         const StepObserver& observer = nullptr);

// Trips once recon_nll has exceeded factor x its first observed value for
// `patience` consecutive observations.
class DivergenceGuard {
 public:
  DivergenceGuard(double factor, int patience) : factor_(factor), patience_(patience) {}

  // Returns true when the guard trips.
  bool Observe(double recon_nll);
  double initial() const { return initial_; }

 private:
  double factor_;
  int patience_;
  bool started_ = false;
  double initial_ = 0.0;
  int over_ = 0;
};

struct HistoryRecord {
  std::int64_t step = 0;
  LossBreakdown loss;
};

struct Snapshot {
  std::int64_t step = 0;
  double leakage_bits = 0.0;
  double attack_accuracy = 0.0;
  double utility_bits = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRecord> records;  // strictly increasing steps
  std::vector<Snapshot> snapshots;
};

// One LossBreakdown object per line.
void WriteHistoryJsonl(const TrainHistory& history, std::ostream& out);
TrainHistory ReadHistoryJsonl(std::istream& in);
std::string SnapshotJson(const Snapshot& snapshot);

struct FitOptions {
  // Held-out split for snapshots; snapshots are skipped without it.
  const SampleBatch* eval = nullptr;
  EvalOptions eval_options;
  // Receives each record as soon as its round completes.
  std::function<void(const HistoryRecord&)> on_record;
};

struct FitResult {
  ModelBundle bundle;
  TrainHistory history;
  // Set when the divergence guard stopped training early.
  std::optional<std::string> divergence;
};

// Throws ValidationError on an empty dataset or invalid config, NumericError
// from TrainRound.
FitResult Fit(const SampleBatch& train, const TrainConfig& config,
              const FitOptions& options = {});

struct SweepOptions {
  int jobs = 1;
  EvalOptions eval_options;
};

// One independent fit per alpha with the same seed, evaluated on `test`.
// Failed fits are marked rather than thrown. Sorted by alpha.
std::vector<TradeoffPoint> SweepAlpha(const SampleBatch& train,
                                      const SampleBatch& test,
                                      const TrainConfig& config,
                                      const std::vector<double>& alphas,
                                      const SweepOptions& options = {});

}  // namespace dvpf

#endif  // DVPF_TRAINER_HPP_
