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
#include "dvpf/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <future>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "dvpf/errors.hpp"
#include "json.hpp"

namespace dvpf {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

const char* StepLabel(int step) {
  switch (step) {
    case 0: return "sensitive decoder best response";
    case 1: return "encoder, utility and uncertainty decoders";
    case 2: return "latent discriminator";
    case 3: return "encoder and prior generator against latent discriminator";
    case 4: return "output discriminator";
    case 5: return "sensitive-class discriminator";
    case 6: return "prior generator and utility decoder against output discriminator";
    case 7: return "post-round evaluation";
  }
  return "unknown";
}

bool AllFinite(const BlockGradients& g, std::initializer_list<Block> blocks) {
  for (Block b : blocks) {
    if (!g[BlockIndex(b)].allFinite()) return false;
  }
  return true;
}

void CheckFinite(int step, double loss, const BlockGradients& g,
                 std::initializer_list<Block> blocks) {
  if (!std::isfinite(loss) || !AllFinite(g, blocks)) {
    throw NumericError("step " + std::to_string(step) + " (" + StepLabel(step) +
                       "): non-finite loss or gradient");
  }
}

double ParseDouble(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("config key '" + key + "': not a number: '" + text + "'");
  }
  return v;
}

std::int64_t ParseInt(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("config key '" + key + "': not an integer: '" + text + "'");
  }
  return v;
}

int ParseSmallInt(const std::string& key, const std::string& text) {
  const std::int64_t v = ParseInt(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ValidationError("config key '" + key + "': out of range");
  }
  return static_cast<int>(v);
}

bool ParseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValidationError("config key '" + key + "': not a boolean: '" + text + "'");
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// Batches of fresh permutations, reshuffled when exhausted.
class BatchStream {
 public:
  BatchStream(int n, int batch_size) : order_(n), batch_(std::min(n, batch_size)) {
    std::iota(order_.begin(), order_.end(), 0);
    cursor_ = n;
  }

  std::vector<int> Next(std::mt19937_64& rng) {
    if (cursor_ + batch_ > static_cast<int>(order_.size())) {
      std::shuffle(order_.begin(), order_.end(), rng);
      cursor_ = 0;
    }
    std::vector<int> idx(order_.begin() + cursor_, order_.begin() + cursor_ + batch_);
    cursor_ += batch_;
    return idx;
  }

 private:
  std::vector<int> order_;
  int batch_;
  int cursor_;
};

}  // namespace

std::vector<Block> TrainedBlocks(Variant variant, bool explicit_prior) {
  std::vector<Block> blocks = {Block::kPhi, Block::kTheta};
  if (variant == Variant::kP1) {
    blocks.push_back(Block::kXi);
  } else {
    blocks.push_back(Block::kVarphi);
  }
  if (!explicit_prior) blocks.push_back(Block::kPsi);
  blocks.push_back(Block::kEta);
  blocks.push_back(Block::kOmega);
  if (variant == Variant::kP1) blocks.push_back(Block::kTau);
  return blocks;
}

std::map<Block, double> DefaultStepSizes(Variant variant, bool explicit_prior) {
  std::map<Block, double> sizes;
  for (Block b : TrainedBlocks(variant, explicit_prior)) {
    const bool discriminator =
        b == Block::kEta || b == Block::kOmega || b == Block::kTau;
    sizes[b] = discriminator ? 1e-4 : 1e-3;
  }
  return sizes;
}

void TrainConfig::ResetStepSizes() {
  step_sizes = DefaultStepSizes(variant, explicit_prior);
}

void TrainConfig::Validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ValidationError("alpha must be finite and >= 0");
  }
  if (steps < 0) throw ValidationError("steps must be >= 0");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (adversary_inner_steps < 1) {
    throw ValidationError("adversary_inner_steps must be >= 1");
  }
  if (d_z < 1) throw ValidationError("d_z must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw ValidationError("hidden widths must be >= 1");
  }
  if (printed_sign && variant != Variant::kP1) {
    throw ValidationError("printed_sign applies to P1 only");
  }
  if (snapshot_every < 0) throw ValidationError("snapshot_every must be >= 0");
  if (!(divergence_factor > 1.0) || divergence_patience < 1) {
    throw ValidationError("divergence guard needs factor > 1 and patience >= 1");
  }
  const auto trained = TrainedBlocks(variant, explicit_prior);
  for (Block b : trained) {
    const auto it = step_sizes.find(b);
    if (it == step_sizes.end()) {
      throw ValidationError("missing step size for block " +
                            std::string(BlockName(b)));
    }
    if (!(it->second >= 0.0) || !std::isfinite(it->second)) {
      throw ValidationError("step size for block " + std::string(BlockName(b)) +
                            " must be finite and >= 0");
    }
  }
  for (const auto& [b, v] : step_sizes) {
    if (std::find(trained.begin(), trained.end(), b) == trained.end()) {
      throw ValidationError("block " + std::string(BlockName(b)) +
                            " is not trained by this variant");
    }
  }
}

TrainConfig ApplyConfigValues(TrainConfig config,
                              const std::map<std::string, std::string>& values) {
  // Variant and prior decide which step sizes exist, so apply them first.
  bool shape_changed = false;
  if (auto it = values.find("variant"); it != values.end()) {
    const auto v = VariantFromName(it->second);
    if (!v) throw ValidationError("config key 'variant': expected P1 or P2");
    shape_changed |= *v != config.variant;
    config.variant = *v;
  }
  if (auto it = values.find("explicit_prior"); it != values.end()) {
    const bool v = ParseBool(it->first, it->second);
    shape_changed |= v != config.explicit_prior;
    config.explicit_prior = v;
  }
  if (shape_changed) config.ResetStepSizes();
  for (const auto& [key, value] : values) {
    if (key == "variant" || key == "explicit_prior") continue;
    if (key == "alpha") {
      config.alpha = ParseDouble(key, value);
    } else if (key == "steps") {
      config.steps = ParseSmallInt(key, value);
    } else if (key == "batch_size") {
      config.batch_size = ParseSmallInt(key, value);
    } else if (key == "adversary_inner_steps") {
      config.adversary_inner_steps = ParseSmallInt(key, value);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(ParseInt(key, value));
    } else if (key == "d_z") {
      config.d_z = ParseSmallInt(key, value);
    } else if (key == "hidden") {
      config.hidden.clear();
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ',')) {
        if (!part.empty()) config.hidden.push_back(ParseSmallInt(key, part));
      }
    } else if (key == "activation") {
      config.activation = ActivationFromName(value);
    } else if (key == "printed_sign") {
      config.printed_sign = ParseBool(key, value);
    } else if (key == "snapshot_every") {
      config.snapshot_every = ParseSmallInt(key, value);
    } else if (key == "divergence_factor") {
      config.divergence_factor = ParseDouble(key, value);
    } else if (key == "divergence_patience") {
      config.divergence_patience = ParseSmallInt(key, value);
    } else if (key.rfind("lr.", 0) == 0) {
      const auto block = BlockFromName(key.substr(3));
      if (!block) throw ValidationError("config key '" + key + "': unknown block");
      config.step_sizes[*block] = ParseDouble(key, value);
    } else {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  return config;
}

std::map<std::string, std::string> ConfigValues(const TrainConfig& config) {
  std::map<std::string, std::string> v;
  v["variant"] = std::string(VariantName(config.variant));
  v["alpha"] = FormatDouble(config.alpha);
  v["steps"] = std::to_string(config.steps);
  v["batch_size"] = std::to_string(config.batch_size);
  v["adversary_inner_steps"] = std::to_string(config.adversary_inner_steps);
  v["seed"] = std::to_string(config.seed);
  v["d_z"] = std::to_string(config.d_z);
  std::string hidden;
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    if (i) hidden += ",";
    hidden += std::to_string(config.hidden[i]);
  }
  v["hidden"] = hidden;
  v["activation"] = ActivationName(config.activation);
  v["explicit_prior"] = config.explicit_prior ? "true" : "false";
  v["printed_sign"] = config.printed_sign ? "true" : "false";
  v["snapshot_every"] = std::to_string(config.snapshot_every);
  v["divergence_factor"] = FormatDouble(config.divergence_factor);
  v["divergence_patience"] = std::to_string(config.divergence_patience);
  for (const auto& [b, s] : config.step_sizes) {
    v["lr." + std::string(BlockName(b))] = FormatDouble(s);
  }
  return v;
}

Optimizer::Optimizer(const ModelBundle& bundle) {
  for (Block b : kAllBlocks) {
    const auto size = bundle.block(b).size();
    states_[BlockIndex(b)].m = Eigen::VectorXd::Zero(size);
    states_[BlockIndex(b)].v = Eigen::VectorXd::Zero(size);
  }
}

void Optimizer::Update(ModelBundle& bundle, Block block,
                       const Eigen::VectorXd& gradient, double step_size,
                       bool ascend) {
  if (step_size == 0.0) return;
  Eigen::VectorXd& p = bundle.block(block);
  if (p.size() == 0) return;
  State& st = states_[BlockIndex(block)];
  ++st.t;
  st.m = kBeta1 * st.m + (1.0 - kBeta1) * gradient;
  st.v = kBeta2 * st.v + (1.0 - kBeta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.t));
  const Eigen::VectorXd step =
      step_size * (st.m / c1).array() / ((st.v / c2).array().sqrt() + kAdamEpsilon);
  if (ascend) {
    p += step;
  } else {
    p -= step;
  }
}

namespace {
LossBreakdown TrainRoundImpl(const SampleBatch& batch, ModelBundle& bundle,
                             const TrainConfig& config, Optimizer& optimizer,
                             std::mt19937_64& rng, const StepObserver& observer,
                             int& current);
}  // namespace

LossBreakdown TrainRound(const SampleBatch& batch, ModelBundle& bundle,
                         const TrainConfig& config, Optimizer& optimizer,
                         std::mt19937_64& rng, const StepObserver& observer) {
  int current = 0;
  try {
    return TrainRoundImpl(batch, bundle, config, optimizer, rng, observer, current);
  } catch (const NumericError& e) {
    const std::string what = e.what();
    if (what.rfind("step ", 0) == 0) throw;
    throw NumericError("step " + std::to_string(current) + " (" + StepLabel(current) +
                       "): " + what);
  }
}

namespace {

LossBreakdown TrainRoundImpl(const SampleBatch& batch, ModelBundle& bundle,
                             const TrainConfig& config, Optimizer& optimizer,
                             std::mt19937_64& rng, const StepObserver& observer,
                             int& current) {
  const int n = batch.size();
  const bool p1 = config.variant == Variant::kP1;
  auto lr = [&](Block b) {
    const auto it = config.step_sizes.find(b);
    return it == config.step_sizes.end() ? 0.0 : it->second;
  };
  auto draw = [&] { return NoiseDraw::Sample(bundle, n, n, rng); };
  auto notify = [&](int step) {
    if (observer) observer(step, bundle);
    current = step + 1;
  };

  // Best response of the sensitive decoder with the encoder held fixed.
  if (p1 && !config.printed_sign) {
    for (int k = 0; k < config.adversary_inner_steps; ++k) {
      BlockGradients g = ZeroGradients(bundle);
      const double loss = SensitiveNll(batch, bundle, draw(), &g);
      CheckFinite(0, loss, g, {Block::kXi});
      optimizer.Update(bundle, Block::kXi, g[BlockIndex(Block::kXi)], lr(Block::kXi), false);
    }
  }
  notify(0);

  {
    BlockGradients g = ZeroGradients(bundle);
    std::vector<Block> owners = {Block::kPhi, Block::kTheta};
    double value = 0.0;
    if (config.printed_sign) {
      value = PrintedEncoderObjective(batch, bundle, config.alpha, draw(), &g);
      owners.push_back(Block::kXi);
    } else {
      value = TotalObjectiveWithGradient(config.variant, batch, bundle,
                                         config.alpha, draw(), g).total;
      if (!p1) owners.push_back(Block::kVarphi);
    }
    CheckFinite(1, value, g, {Block::kPhi, Block::kTheta, Block::kXi, Block::kVarphi});
    for (Block b : owners) optimizer.Update(bundle, b, g[BlockIndex(b)], lr(b), true);
  }
  notify(1);

  auto train_discriminator = [&](int step, DiscriminatorKind kind) {
    const Block b = DiscriminatorBlock(kind);
    for (int k = 0; k < config.adversary_inner_steps; ++k) {
      BlockGradients g = ZeroGradients(bundle);
      const double loss = AdversarialLoss(kind, batch, bundle, draw(), &g);
      CheckFinite(step, loss, g, {b});
      optimizer.Update(bundle, b, g[BlockIndex(b)], lr(b), false);
    }
    notify(step);
  };
  auto fool_discriminator = [&](int step, DiscriminatorKind kind,
                                std::initializer_list<Block> owners) {
    BlockGradients g = ZeroGradients(bundle);
    const double loss = AdversarialLoss(kind, batch, bundle, draw(), &g);
    CheckFinite(step, loss, g, owners);
    for (Block b : owners) optimizer.Update(bundle, b, g[BlockIndex(b)], lr(b), true);
    notify(step);
  };

  train_discriminator(2, DiscriminatorKind::kLatent);
  fool_discriminator(3, DiscriminatorKind::kLatent, {Block::kPhi, Block::kPsi});
  train_discriminator(4, DiscriminatorKind::kOutput);
  if (p1) {
    train_discriminator(5, DiscriminatorKind::kSensitive);
  } else {
    notify(5);
  }
  fool_discriminator(6, DiscriminatorKind::kOutput, {Block::kPsi, Block::kTheta});

  current = 7;
  return TotalObjective(config.variant, batch, bundle, config.alpha, draw());
}

}  // namespace

bool DivergenceGuard::Observe(double recon_nll) {
  if (!started_) {
    started_ = true;
    initial_ = recon_nll;
  }
  over_ = recon_nll > factor_ * initial_ ? over_ + 1 : 0;
  return over_ >= patience_;
}

void WriteHistoryJsonl(const TrainHistory& history, std::ostream& out) {
  for (const HistoryRecord& r : history.records) {
    out << LossBreakdownJson(r.loss, r.step, std::nullopt) << '\n';
  }
}

TrainHistory ReadHistoryJsonl(std::istream& in) {
  TrainHistory h;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    HistoryRecord r;
    try {
      r.loss = ParseLossBreakdownJson(line, &r.step);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!h.records.empty() && r.step <= h.records.back().step) {
      throw ParseError("history steps must be strictly increasing", line_no);
    }
    h.records.push_back(r);
  }
  return h;
}

std::string SnapshotJson(const Snapshot& s) {
  return nlohmann::json{{"step", s.step},
                        {"leakage_bits", s.leakage_bits},
                        {"attack_accuracy", s.attack_accuracy},
                        {"utility_bits", s.utility_bits}}
      .dump();
}

FitResult Fit(const SampleBatch& train, const TrainConfig& config,
              const FitOptions& options) {
  config.Validate();
  train.Validate();
  if (train.size() < 2) throw ValidationError("training set needs >= 2 rows");
  const ModelSpecs specs =
      ModelSpecs::Uniform(train.d_x(), config.d_z, train.n_classes, config.hidden,
                          config.activation, config.explicit_prior);
  FitResult result{ModelBundle(specs, config.seed), {}, std::nullopt};
  Optimizer optimizer(result.bundle);
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32), 0x7472u};
  std::mt19937_64 rng(seq);
  BatchStream stream(train.size(), config.batch_size);

  DivergenceGuard guard(config.divergence_factor, config.divergence_patience);
  for (int step = 1; step <= config.steps; ++step) {
    const SampleBatch batch = train.Rows(stream.Next(rng));
    HistoryRecord record{step, TrainRound(batch, result.bundle, config, optimizer, rng)};
    result.history.records.push_back(record);
    if (options.on_record) options.on_record(record);

    if (guard.Observe(record.loss.recon_nll)) {
      std::ostringstream msg;
      msg << "divergence: recon_nll above " << config.divergence_factor
          << "x its initial value (" << guard.initial() << ") for "
          << config.divergence_patience << " consecutive rounds, stopped at round "
          << step;
      result.divergence = msg.str();
      break;
    }

    if (options.eval && config.snapshot_every > 0 && step % config.snapshot_every == 0) {
      EvalOptions eo = options.eval_options;
      eo.seed = config.seed;
      const TradeoffPoint p =
          EvaluateTradeoff(result.bundle, train, *options.eval, config.alpha, eo);
      result.history.snapshots.push_back(
          {step, p.leakage_bits, p.attack_accuracy, p.utility_bits});
    }
  }
  return result;
}

std::vector<TradeoffPoint> SweepAlpha(const SampleBatch& train,
                                      const SampleBatch& test,
                                      const TrainConfig& config,
                                      const std::vector<double>& alphas,
                                      const SweepOptions& options) {
  if (alphas.empty()) throw ValidationError("alpha list is empty");
  for (double a : alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw ValidationError("every alpha must be finite and >= 0");
    }
  }
  std::vector<double> sorted = alphas;
  std::stable_sort(sorted.begin(), sorted.end());
  std::vector<TradeoffPoint> points(sorted.size());

  auto run = [&](std::size_t i) {
    TradeoffPoint& p = points[i];
    p.alpha = sorted[i];
    try {
      TrainConfig c = config;
      c.alpha = sorted[i];
      const FitResult fit = Fit(train, c);
      if (fit.divergence) {
        p.failed = true;
        p.error = *fit.divergence;
        return;
      }
      EvalOptions eo = options.eval_options;
      eo.seed = config.seed;
      p = EvaluateTradeoff(fit.bundle, train, test, sorted[i], eo);
    } catch (const std::exception& e) {
      p = TradeoffPoint{};
      p.alpha = sorted[i];
      p.failed = true;
      p.error = e.what();
    }
  };

  const int jobs = std::clamp(options.jobs, 1, static_cast<int>(sorted.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < sorted.size(); i = next++) run(i);
  };
  std::vector<std::future<void>> futures;
  for (int j = 1; j < jobs; ++j) futures.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : futures) f.get();
  return points;
}

}  // namespace dvpf
