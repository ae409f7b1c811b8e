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
//
// The parameterized distribution family: stochastic encoder P_phi(Z|X),
// utility decoder P_theta(X|Z), sensitive decoder P_xi(S|Z) with marginal head
// P_xi(S), uncertainty decoder P_varphi(X|S,Z), prior generator Q_psi(Z), and
// the latent, output and sensitive-class discriminators.
//
// The encoder only ever sees x and injected noise, so S - X - Z holds by
// construction.
#ifndef DVPF_MODEL_HPP_
#define DVPF_MODEL_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dvpf/info_measures.hpp"
#include "dvpf/network.hpp"

namespace dvpf {

enum class Block { kPhi, kTheta, kXi, kVarphi, kPsi, kEta, kOmega, kTau };

inline constexpr std::array<Block, 8> kAllBlocks = {
    Block::kPhi, Block::kTheta, Block::kXi,    Block::kVarphi,
    Block::kPsi, Block::kEta,   Block::kOmega, Block::kTau};

inline constexpr std::size_t BlockIndex(Block b) {
  return static_cast<std::size_t>(b);
}
std::string_view BlockName(Block b);
std::optional<Block> BlockFromName(std::string_view name);

inline constexpr double kLogVarianceClamp = 10.0;
inline constexpr double kLogitClamp = 30.0;
inline constexpr double kDiscriminatorFloor = 1e-6;

struct ModelSpecs {
  NetworkSpec encoder;                  // d_x -> 2 d_z (mean, log-variance)
  NetworkSpec utility_decoder;          // d_z -> d_x
  NetworkSpec sensitive_decoder;        // d_z -> N logits
  NetworkSpec uncertainty_decoder;      // N + d_z -> d_x
  NetworkSpec prior_generator;          // d_noise -> d_z
  NetworkSpec latent_discriminator;     // d_z -> 1
  NetworkSpec output_discriminator;     // d_x -> 1
  NetworkSpec sensitive_discriminator;  // N -> 1
  // Q(Z) = N(0, I) instead of the generator; the psi block is then empty.
  bool explicit_prior = false;

  // Every network gets `hidden` layers; d_noise = d_z.
  static ModelSpecs Uniform(int d_x, int d_z, int n_classes,
                            std::vector<int> hidden,
                            Activation activation = Activation::kReluLike,
                            bool explicit_prior = false);

  int d_x() const { return encoder.input_dim; }
  int d_z() const { return utility_decoder.input_dim; }
  int n_classes() const { return sensitive_decoder.output_dim; }
  int d_noise() const { return prior_generator.input_dim; }

  // Throws ValidationError when dims disagree across heads.
  void Validate() const;
};

struct EncoderPosterior {
  Eigen::MatrixXd mean;          // n x d_z
  Eigen::MatrixXd log_variance;  // n x d_z, clamped to [-10, 10]
};

class ModelBundle {
 public:
  // Fan-in scaled init, one derived stream per block.
  ModelBundle(ModelSpecs specs, std::uint64_t seed);

  static ModelBundle Zeros(ModelSpecs specs);

  const ModelSpecs& specs() const { return specs_; }
  std::uint64_t seed() const { return seed_; }
  int d_x() const { return specs_.d_x(); }
  int d_z() const { return specs_.d_z(); }
  int n_classes() const { return specs_.n_classes(); }
  int d_noise() const { return specs_.d_noise(); }
  bool explicit_prior() const { return specs_.explicit_prior; }

  // The network owned by a block (xi: the conditional head).
  const Mlp& network(Block b) const { return networks_[BlockIndex(b)]; }

  // Full flat parameter vector of a block. For xi this is the conditional head
  // followed by the N marginal logits.
  const Eigen::VectorXd& block(Block b) const { return blocks_[BlockIndex(b)]; }
  Eigen::VectorXd& block(Block b) { return blocks_[BlockIndex(b)]; }

  // Parameters consumed by network(b).
  std::span<const double> network_params(Block b) const;
  std::span<const double> marginal_logits() const;

  std::size_t parameter_count() const;

 private:
  ModelBundle(ModelSpecs specs, std::uint64_t seed, bool initialize);

  ModelSpecs specs_;
  std::uint64_t seed_;
  std::vector<Mlp> networks_;
  std::array<Eigen::VectorXd, 8> blocks_;
};

struct EncodeResult {
  EncoderPosterior posterior;
  Eigen::MatrixXd z;
};

EncoderPosterior Posterior(const ModelBundle& bundle, const Eigen::MatrixXd& x);

// z = mean + exp(log_variance / 2) * noise, noise ~ N(0, I) drawn by caller.
EncodeResult Encode(const ModelBundle& bundle, const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& noise);

// Mean of the unit-variance Gaussian P_theta(X|Z).
Eigen::MatrixXd DecodeUtility(const ModelBundle& bundle,
                              const Eigen::MatrixXd& z);

// Per-sample -log N(x; mean, I) in nats.
Eigen::VectorXd GaussianNll(const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& mean);

Eigen::MatrixXd SensitiveLogits(const ModelBundle& bundle,
                                const Eigen::MatrixXd& z);
// Row-wise softmax of the clamped logits.
Eigen::MatrixXd DecodeSensitive(const ModelBundle& bundle,
                                const Eigen::MatrixXd& z);
DiscreteDistribution MarginalSensitive(const ModelBundle& bundle);

// [one_hot(s), z], the uncertainty decoder's input.
Eigen::MatrixXd ConditionOnClass(std::span<const int> s,
                                 const Eigen::MatrixXd& z, int n_classes);

// Mean of P_varphi(X|S,Z). Throws ValidationError for s outside [0, N).
Eigen::MatrixXd DecodeUncertainty(const ModelBundle& bundle,
                                  std::span<const int> s,
                                  const Eigen::MatrixXd& z);

// Generator pushforward of noise (n x d_noise); identity for explicit prior.
Eigen::MatrixXd SamplePrior(const ModelBundle& bundle,
                            const Eigen::MatrixXd& noise);

enum class DiscriminatorKind { kLatent, kOutput, kSensitive };

Block DiscriminatorBlock(DiscriminatorKind kind);

// Clamped logit log(D / (1 - D)); |logit| <= log((1 - 1e-6) / 1e-6).
Eigen::VectorXd DiscriminatorLogit(DiscriminatorKind kind,
                                   const ModelBundle& bundle,
                                   const Eigen::MatrixXd& input);

// D in [1e-6, 1 - 1e-6].
Eigen::VectorXd Discriminate(DiscriminatorKind kind, const ModelBundle& bundle,
                             const Eigen::MatrixXd& input);

inline constexpr std::string_view kCheckpointFormat = "dvpf-ckpt-1";

// Single JSON document: manifest (format, dims, network specs, seed) plus one
// flat array per block. Doubles round-trip exactly.
void SaveCheckpoint(const ModelBundle& bundle, const std::string& path);
ModelBundle LoadCheckpoint(const std::string& path);

}  // namespace dvpf

#endif  // DVPF_MODEL_HPP_
