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
// Variational terms of the privacy-funnel Lagrangians and their gradients.
//
// All values are in nats. KLs against implicit distributions use the logit of
// the matching discriminator as a density-ratio estimate. Each Lagrangian is
// only known up to the parameter-free constant of the leakage bound.
#ifndef DVPF_OBJECTIVES_HPP_
#define DVPF_OBJECTIVES_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "dvpf/model.hpp"
#include "dvpf/sample_batch.hpp"

namespace dvpf {

enum class Variant { kP1, kP2 };

std::string_view VariantName(Variant v);  // "P1" / "P2"
std::optional<Variant> VariantFromName(std::string_view name);

// Standard-normal draws injected into every stochastic forward pass.
struct NoiseDraw {
  Eigen::MatrixXd encoder;  // n x d_z
  Eigen::MatrixXd prior;    // m x d_noise

  static NoiseDraw Sample(const ModelBundle& bundle, int n, int m,
                          std::mt19937_64& rng);
};

struct LossBreakdown {
  Variant variant = Variant::kP1;
  double alpha = 0.0;
  double recon_nll = 0.0;
  double marginal_kl_x = 0.0;
  double leakage_pred_fidelity = 0.0;     // P1 only
  double leakage_dist_discrepancy = 0.0;  // P1 only
  double complexity = 0.0;                // P2 only
  double uncertainty = 0.0;               // P2 only
  double total = 0.0;
  // Some discriminator output sat within 1e-3 of 1/2 on every input.
  bool untrained_discriminator = false;

  double utility() const { return -recon_nll - marginal_kl_x; }
  double leakage() const;
  double Recompose() const;
};

struct UtilityTerms {
  double recon_nll = 0.0;
  double marginal_kl_x = 0.0;
  bool untrained_discriminator = false;
};

struct LeakageP1Terms {
  double pred_fidelity = 0.0;
  double dist_discrepancy = 0.0;
  bool untrained_discriminator = false;
};

struct LeakageP2Terms {
  double complexity = 0.0;
  double uncertainty = 0.0;
  bool untrained_discriminator = false;
};

// recon_nll = mean -log P_theta(x|z); marginal_kl_x = mean logit D_omega(x).
UtilityTerms UtilityLowerBound(const SampleBatch& batch,
                               const ModelBundle& bundle,
                               const NoiseDraw& noise);

// pred_fidelity = mean log P_xi(s|z) - mean log P_xi(s);
// dist_discrepancy = mean logit D_tau(one_hot(s)).
LeakageP1Terms LeakageP1(const SampleBatch& batch, const ModelBundle& bundle,
                         const NoiseDraw& noise);

// complexity: with the explicit prior, mean KL(P_phi(Z|x) || N(0, I)) minus the
// D_eta logit at encoded z. With the generator prior the two ratio terms share
// log Q and cancel, leaving mean log P_phi(z_i|x_i) - log P_phi(z_i) with the
// aggregate posterior taken as the batch mixture.
// uncertainty = mean -log P_varphi(x|s,z).
LeakageP2Terms LeakageP2Upper(const SampleBatch& batch,
                              const ModelBundle& bundle,
                              const NoiseDraw& noise);

LossBreakdown TotalObjective(Variant variant, const SampleBatch& batch,
                             const ModelBundle& bundle, double alpha,
                             const NoiseDraw& noise);

// One flat gradient per parameter block, shaped like ModelBundle::block.
using BlockGradients = std::array<Eigen::VectorXd, 8>;

BlockGradients ZeroGradients(const ModelBundle& bundle);

// Breakdown plus d(total)/d(block) for every block.
LossBreakdown TotalObjectiveWithGradient(Variant variant,
                                         const SampleBatch& batch,
                                         const ModelBundle& bundle,
                                         double alpha, const NoiseDraw& noise,
                                         BlockGradients& gradient);

// -(mean log P_xi(s|z) + mean log P_xi(s)) with z held fixed. Gradient lands
// in xi only.
double SensitiveNll(const SampleBatch& batch, const ModelBundle& bundle,
                    const NoiseDraw& noise, BlockGradients* gradient = nullptr);

// The objective of the printed encoder step:
//   mean log P_theta(x|z) - alpha mean log P_xi(s|z) - alpha mean log P_xi(s).
// Gradients land in phi, theta and xi.
double PrintedEncoderObjective(const SampleBatch& batch,
                               const ModelBundle& bundle, double alpha,
                               const NoiseDraw& noise,
                               BlockGradients* gradient = nullptr);

// Discriminator cross-entropy E_real[-log D] + E_fake[-log(1 - D)].
//   latent:    real = encoded z,       fake = prior samples
//   output:    real = x,               fake = g_theta(prior samples)
//   sensitive: real = one_hot(s),      fake = softmax g_xi(prior samples)
// Gradients land in every block the two sides depend on.
double AdversarialLoss(DiscriminatorKind kind, const SampleBatch& batch,
                       const ModelBundle& bundle, const NoiseDraw& noise,
                       BlockGradients* gradient = nullptr);

// Linear-Gaussian closed forms: X ~ N(0, sigma_x), Z | X ~ N(A X + b, D) with
// diagonal D, reference Q = N(q_mean, q_cov).
struct LinearGaussian {
  Eigen::MatrixXd a;         // d_z x d_x
  Eigen::VectorXd b;         // d_z
  Eigen::VectorXd variance;  // diagonal of D
  Eigen::MatrixXd sigma_x;   // d_x x d_x
  Eigen::VectorXd q_mean;
  Eigen::MatrixXd q_cov;
};

// Reads A, b and D off a bundle whose encoder has no hidden layer and whose
// log-variance head has zero weights. Throws ValidationError otherwise.
LinearGaussian LinearGaussianFromBundle(const ModelBundle& bundle,
                                        const Eigen::MatrixXd& sigma_x);

double GaussianKl(const Eigen::VectorXd& mean0, const Eigen::MatrixXd& cov0,
                  const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1);
// E_X KL(P_{Z|X} || Q).
double ConditionalKlToReference(const LinearGaussian& lg);
// KL(P_Z || Q).
double MarginalKlToReference(const LinearGaussian& lg);
// 1/2 log det(A sigma_x A^T + D) / det(D).
double LinearGaussianMutualInformation(const LinearGaussian& lg);

// One JSON object per line for training logs.
std::string LossBreakdownJson(const LossBreakdown& b, std::int64_t step,
                              std::optional<double> wall_clock_s);
LossBreakdown ParseLossBreakdownJson(std::string_view line,
                                     std::int64_t* step = nullptr);

}  // namespace dvpf

#endif  // DVPF_OBJECTIVES_HPP_
