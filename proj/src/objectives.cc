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
#include "dvpf/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "dvpf/errors.hpp"
#include "json.hpp"

namespace dvpf {
namespace {

using Json = nlohmann::ordered_json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const double kDiscriminatorLogitClamp =
    std::log((1.0 - kDiscriminatorFloor) / kDiscriminatorFloor);
constexpr double kUntrainedTolerance = 1e-3;

double Softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }
double Sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

MatrixXd Clamp(const MatrixXd& m, double c) {
  return m.cwiseMax(-c).cwiseMin(c);
}

// 1 where the clamp is inactive, 0 where it saturates.
MatrixXd PassMask(const MatrixXd& raw, double c) {
  return ((raw.array() > -c) && (raw.array() < c)).cast<double>().matrix();
}

struct Pass {
  Mlp::Tape tape;
  MatrixXd out;
};

Pass Run(const ModelBundle& bundle, Block block, const MatrixXd& in) {
  Pass p;
  p.out = bundle.network(block).Forward(bundle.network_params(block), in, &p.tape);
  return p;
}

MatrixXd Back(const ModelBundle& bundle, Block block, const Pass& pass,
              const MatrixXd& grad_out, BlockGradients& grads) {
  const Mlp& net = bundle.network(block);
  VectorXd& g = grads[BlockIndex(block)];
  return net.Backward(bundle.network_params(block), pass.tape, grad_out,
                      std::span<double>(g.data(), net.parameter_count()));
}

void RequireBatch(const SampleBatch& batch, const ModelBundle& bundle,
                  const NoiseDraw& noise) {
  if (batch.size() < 1) throw ValidationError("batch must be nonempty");
  if (batch.d_x() != bundle.d_x()) {
    throw ValidationError("batch has d_x = " + std::to_string(batch.d_x()) +
                          ", model expects " + std::to_string(bundle.d_x()));
  }
  if (static_cast<int>(batch.s.size()) != batch.size()) {
    throw ValidationError("batch labels and rows disagree");
  }
  if (noise.encoder.rows() != batch.size() ||
      noise.encoder.cols() != bundle.d_z()) {
    throw ValidationError("encoder noise must be n x d_z");
  }
}

struct EncoderPass {
  Pass net;
  MatrixXd mean, log_variance, sigma, z;
};

EncoderPass RunEncoder(const ModelBundle& bundle, const MatrixXd& x,
                       const MatrixXd& noise) {
  EncoderPass e;
  e.net = Run(bundle, Block::kPhi, x);
  const int dz = bundle.d_z();
  e.mean = e.net.out.leftCols(dz);
  e.log_variance = Clamp(e.net.out.rightCols(dz), kLogVarianceClamp);
  e.sigma = (0.5 * e.log_variance.array()).exp().matrix();
  e.z = e.mean + (e.sigma.array() * noise.array()).matrix();
  return e;
}

// Backpropagates dz plus direct posterior-parameter gradients into phi.
void BackEncoder(const ModelBundle& bundle, const EncoderPass& e,
                 const MatrixXd& noise, const MatrixXd& dz,
                 const MatrixXd& dmean, const MatrixXd& dlv,
                 BlockGradients& grads) {
  const int dz_dim = bundle.d_z();
  MatrixXd g(e.z.rows(), 2 * dz_dim);
  g.leftCols(dz_dim) = dz + dmean;
  g.rightCols(dz_dim) =
      ((0.5 * dz.array() * e.sigma.array() * noise.array() + dlv.array()) *
       PassMask(e.net.out.rightCols(dz_dim), kLogVarianceClamp).array())
          .matrix();
  Back(bundle, Block::kPhi, e.net, g, grads);
}

struct PriorPass {
  std::optional<Pass> net;
  MatrixXd z;
};

PriorPass RunPrior(const ModelBundle& bundle, const MatrixXd& noise) {
  if (noise.rows() < 1 || noise.cols() != bundle.d_noise()) {
    throw ValidationError("prior noise must be m x d_noise with m >= 1");
  }
  PriorPass p;
  if (bundle.explicit_prior()) {
    p.z = noise;
  } else {
    p.net = Run(bundle, Block::kPsi, noise);
    p.z = p.net->out;
  }
  return p;
}

void BackPrior(const ModelBundle& bundle, const PriorPass& p,
               const MatrixXd& dz, BlockGradients& grads) {
  if (p.net) Back(bundle, Block::kPsi, *p.net, dz, grads);
}

// mean -log N(x; net(in), I); accumulates coef * gradient.
double MeanNll(const ModelBundle& bundle, Block block, const MatrixXd& in,
               const MatrixXd& x, double coef, MatrixXd* d_in,
               BlockGradients* grads) {
  const Pass p = Run(bundle, block, in);
  const double value = GaussianNll(x, p.out).mean();
  if (grads) {
    const MatrixXd din =
        Back(bundle, block, p, coef * (p.out - x) / static_cast<double>(x.rows()),
             *grads);
    if (d_in) *d_in += din;
  }
  return value;
}

bool NearHalf(const VectorXd& logit) {
  double worst = 0.0;
  for (double l : logit) worst = std::max(worst, std::abs(Sigmoid(l) - 0.5));
  return worst < kUntrainedTolerance;
}

// mean clamped logit of a discriminator.
double MeanLogit(const ModelBundle& bundle, DiscriminatorKind kind,
                 const MatrixXd& in, double coef, MatrixXd* d_in,
                 BlockGradients* grads, bool* untrained) {
  const Block block = DiscriminatorBlock(kind);
  if (in.cols() != bundle.network(block).input_dim()) {
    throw ValidationError("discriminator input has the wrong width");
  }
  const Pass p = Run(bundle, block, in);
  const MatrixXd logit = Clamp(p.out, kDiscriminatorLogitClamp);
  if (untrained) *untrained = *untrained || NearHalf(logit.col(0));
  if (grads) {
    const MatrixXd g = coef / static_cast<double>(in.rows()) *
                       PassMask(p.out, kDiscriminatorLogitClamp);
    const MatrixXd din = Back(bundle, block, p, g, *grads);
    if (d_in) *d_in += din;
  }
  return logit.mean();
}

MatrixXd LogSoftmaxRows(const MatrixXd& logits) {
  MatrixXd out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    const double lse = m + std::log((out.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

// mean log P_xi(s_i | z_i).
double MeanConditionalLogLik(const ModelBundle& bundle, const MatrixXd& z,
                             std::span<const int> s, double coef, MatrixXd* dz,
                             BlockGradients* grads) {
  const Pass p = Run(bundle, Block::kXi, z);
  const MatrixXd logp = LogSoftmaxRows(Clamp(p.out, kLogitClamp));
  const int n = static_cast<int>(z.rows());
  double value = 0.0;
  for (int i = 0; i < n; ++i) value += logp(i, s[i]);
  value /= n;
  if (grads) {
    MatrixXd g = -logp.array().exp().matrix();
    for (int i = 0; i < n; ++i) g(i, s[i]) += 1.0;
    g = (coef / n) * g.cwiseProduct(PassMask(p.out, kLogitClamp));
    const MatrixXd din = Back(bundle, Block::kXi, p, g, *grads);
    if (dz) *dz += din;
  }
  return value;
}

// mean log P_xi(s_i) under the marginal head.
double MeanMarginalLogLik(const ModelBundle& bundle, std::span<const int> s,
                          double coef, BlockGradients* grads) {
  const int k = bundle.n_classes();
  const auto raw = bundle.marginal_logits();
  MatrixXd logits(1, k);
  for (int c = 0; c < k; ++c) logits(0, c) = raw[c];
  const MatrixXd clamped = Clamp(logits, kLogitClamp);
  const MatrixXd logp = LogSoftmaxRows(clamped);
  VectorXd freq = VectorXd::Zero(k);
  for (int v : s) freq(v) += 1.0;
  freq /= static_cast<double>(s.size());
  const double value = freq.dot(logp.row(0).transpose());
  if (grads) {
    const MatrixXd mask = PassMask(logits, kLogitClamp);
    VectorXd& g = (*grads)[BlockIndex(Block::kXi)];
    const std::size_t offset = bundle.network(Block::kXi).parameter_count();
    for (int c = 0; c < k; ++c) {
      g(offset + c) += coef * (freq(c) - std::exp(logp(0, c))) * mask(0, c);
    }
  }
  return value;
}

MatrixXd OneHot(std::span<const int> s, int n_classes) {
  MatrixXd m = MatrixXd::Zero(static_cast<Eigen::Index>(s.size()), n_classes);
  for (std::size_t i = 0; i < s.size(); ++i) m(i, s[i]) = 1.0;
  return m;
}

// mean KL(N(mean, diag exp(lv)) || N(0, I)).
double AnalyticKl(const EncoderPass& e, double coef, MatrixXd& dmean,
                  MatrixXd& dlv, bool want_grad) {
  const double n = static_cast<double>(e.mean.rows());
  const auto var = e.log_variance.array().exp();
  const double value =
      0.5 * (e.mean.array().square() + var - 1.0 - e.log_variance.array()).sum() / n;
  if (want_grad) {
    dmean += (coef / n) * e.mean;
    dlv += ((coef / n) * 0.5 * (var - 1.0)).matrix();
  }
  return value;
}

// mean_i [log N(z_i; m_i, v_i) - log (1/n) sum_j N(z_i; m_j, v_j)].
double BatchMixtureInformation(const EncoderPass& e, double coef, MatrixXd& dz,
                               MatrixXd& dmean, MatrixXd& dlv, bool want_grad) {
  const int n = static_cast<int>(e.z.rows());
  const int d = static_cast<int>(e.z.cols());
  const MatrixXd inv_var = (-e.log_variance.array()).exp().matrix();
  const VectorXd lv_sum = e.log_variance.rowwise().sum();
  MatrixXd log_density(n, n);  // (i, j): z_i under component j
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double q = 0.0;
      for (int k = 0; k < d; ++k) {
        const double r = e.z(i, k) - e.mean(j, k);
        q += r * r * inv_var(j, k);
      }
      log_density(i, j) = -0.5 * (q + lv_sum(j));
    }
  }
  double value = 0.0;
  MatrixXd weights(n, n);
  for (int i = 0; i < n; ++i) {
    const double m = log_density.row(i).maxCoeff();
    weights.row(i) = (log_density.row(i).array() - m).exp();
    const double total = weights.row(i).sum();
    weights.row(i) /= total;
    value += log_density(i, i) - (m + std::log(total)) + std::log(n);
  }
  value /= n;
  if (want_grad) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double g = coef / n * ((i == j ? 1.0 : 0.0) - weights(i, j));
        if (g == 0.0) continue;
        for (int k = 0; k < d; ++k) {
          const double r = e.z(i, k) - e.mean(j, k);
          const double ri = r * inv_var(j, k);
          dz(i, k) -= g * ri;
          dmean(j, k) += g * ri;
          dlv(j, k) += g * 0.5 * (r * ri - 1.0);
        }
      }
    }
  }
  return value;
}

struct Terms {
  UtilityTerms utility;
  LeakageP1Terms p1;
  LeakageP2Terms p2;
};

enum TermSet : unsigned { kUtility = 1, kP1 = 2, kP2 = 4 };

// Evaluates the requested terms; with `grads`, accumulates the gradient of
//   -recon - mkl - alpha * leakage(variant).
Terms Evaluate(unsigned which, const SampleBatch& batch,
               const ModelBundle& bundle, double alpha, const NoiseDraw& noise,
               BlockGradients* grads) {
  RequireBatch(batch, bundle, noise);
  const EncoderPass e = RunEncoder(bundle, batch.x, noise.encoder);
  const int n = batch.size(), dz_dim = bundle.d_z();
  MatrixXd dz = MatrixXd::Zero(n, dz_dim);
  MatrixXd dmean = MatrixXd::Zero(n, dz_dim);
  MatrixXd dlv = MatrixXd::Zero(n, dz_dim);
  Terms t;
  if (which & kUtility) {
    t.utility.recon_nll =
        MeanNll(bundle, Block::kTheta, e.z, batch.x, -1.0, &dz, grads);
    t.utility.marginal_kl_x =
        MeanLogit(bundle, DiscriminatorKind::kOutput, batch.x, -1.0, nullptr,
                  grads, &t.utility.untrained_discriminator);
  }
  if (which & kP1) {
    const double cond =
        MeanConditionalLogLik(bundle, e.z, batch.s, -alpha, &dz, grads);
    const double marg = MeanMarginalLogLik(bundle, batch.s, alpha, grads);
    t.p1.pred_fidelity = cond - marg;
    t.p1.dist_discrepancy = MeanLogit(
        bundle, DiscriminatorKind::kSensitive, OneHot(batch.s, bundle.n_classes()),
        alpha, nullptr, grads, &t.p1.untrained_discriminator);
  }
  if (which & kP2) {
    if (bundle.explicit_prior()) {
      t.p2.complexity = AnalyticKl(e, -alpha, dmean, dlv, grads != nullptr) -
                        MeanLogit(bundle, DiscriminatorKind::kLatent, e.z, alpha,
                                  &dz, grads, &t.p2.untrained_discriminator);
    } else {
      t.p2.complexity =
          BatchMixtureInformation(e, -alpha, dz, dmean, dlv, grads != nullptr);
    }
    MatrixXd d_in = MatrixXd::Zero(n, bundle.n_classes() + dz_dim);
    t.p2.uncertainty =
        MeanNll(bundle, Block::kVarphi,
                ConditionOnClass(batch.s, e.z, bundle.n_classes()), batch.x,
                -alpha, &d_in, grads);
    dz += d_in.rightCols(dz_dim);
  }
  if (grads) BackEncoder(bundle, e, noise.encoder, dz, dmean, dlv, *grads);
  return t;
}

LossBreakdown Assemble(Variant variant, double alpha, const Terms& t) {
  LossBreakdown b;
  b.variant = variant;
  b.alpha = alpha;
  b.recon_nll = t.utility.recon_nll;
  b.marginal_kl_x = t.utility.marginal_kl_x;
  b.untrained_discriminator = t.utility.untrained_discriminator;
  if (variant == Variant::kP1) {
    b.leakage_pred_fidelity = t.p1.pred_fidelity;
    b.leakage_dist_discrepancy = t.p1.dist_discrepancy;
    b.untrained_discriminator |= t.p1.untrained_discriminator;
  } else {
    b.complexity = t.p2.complexity;
    b.uncertainty = t.p2.uncertainty;
    b.untrained_discriminator |= t.p2.untrained_discriminator;
  }
  b.total = b.Recompose();
  return b;
}

unsigned TermsFor(Variant variant) {
  switch (variant) {
    case Variant::kP1: return kUtility | kP1;
    case Variant::kP2: return kUtility | kP2;
  }
  throw ValidationError("unknown variant");
}

void RequireAlpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ValidationError("alpha must be finite and >= 0");
  }
}

// Cross-entropy of a discriminator on (real, fake) rows; fills the gradients
// with respect to both inputs.
double CrossEntropy(const ModelBundle& bundle, DiscriminatorKind kind,
                    const MatrixXd& real, const MatrixXd& fake,
                    MatrixXd* d_real, MatrixXd* d_fake, BlockGradients* grads) {
  const Block block = DiscriminatorBlock(kind);
  if (real.cols() != bundle.network(block).input_dim() ||
      fake.cols() != real.cols()) {
    throw ValidationError("discriminator input has the wrong width");
  }
  double value = 0.0;
  for (int side = 0; side < 2; ++side) {
    const MatrixXd& in = side == 0 ? real : fake;
    const Pass p = Run(bundle, block, in);
    const MatrixXd logit = Clamp(p.out, kDiscriminatorLogitClamp);
    const double n = static_cast<double>(in.rows());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logit.rows(); ++i) {
      sum += side == 0 ? Softplus(-logit(i, 0)) : Softplus(logit(i, 0));
    }
    value += sum / n;
    if (grads) {
      MatrixXd g(logit.rows(), 1);
      for (Eigen::Index i = 0; i < logit.rows(); ++i) {
        const double sig = Sigmoid(logit(i, 0));
        g(i, 0) = (side == 0 ? sig - 1.0 : sig) / n;
      }
      g = g.cwiseProduct(PassMask(p.out, kDiscriminatorLogitClamp));
      const MatrixXd din = Back(bundle, block, p, g, *grads);
      MatrixXd* target = side == 0 ? d_real : d_fake;
      if (target) *target = din;
    }
  }
  return value;
}

}  // namespace

std::string_view VariantName(Variant v) { return v == Variant::kP1 ? "P1" : "P2"; }

std::optional<Variant> VariantFromName(std::string_view name) {
  if (name == "P1" || name == "p1") return Variant::kP1;
  if (name == "P2" || name == "p2") return Variant::kP2;
  return std::nullopt;
}

NoiseDraw NoiseDraw::Sample(const ModelBundle& bundle, int n, int m,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  NoiseDraw d;
  d.encoder.resize(n, bundle.d_z());
  d.prior.resize(m, bundle.d_noise());
  for (Eigen::Index j = 0; j < d.encoder.cols(); ++j)
    for (Eigen::Index i = 0; i < d.encoder.rows(); ++i) d.encoder(i, j) = normal(rng);
  for (Eigen::Index j = 0; j < d.prior.cols(); ++j)
    for (Eigen::Index i = 0; i < d.prior.rows(); ++i) d.prior(i, j) = normal(rng);
  return d;
}

double LossBreakdown::leakage() const {
  return variant == Variant::kP1
             ? leakage_pred_fidelity - leakage_dist_discrepancy
             : complexity + uncertainty;
}

double LossBreakdown::Recompose() const { return utility() - alpha * leakage(); }

UtilityTerms UtilityLowerBound(const SampleBatch& batch,
                               const ModelBundle& bundle,
                               const NoiseDraw& noise) {
  return Evaluate(kUtility, batch, bundle, 0.0, noise, nullptr).utility;
}

LeakageP1Terms LeakageP1(const SampleBatch& batch, const ModelBundle& bundle,
                         const NoiseDraw& noise) {
  return Evaluate(kP1, batch, bundle, 0.0, noise, nullptr).p1;
}

LeakageP2Terms LeakageP2Upper(const SampleBatch& batch,
                              const ModelBundle& bundle,
                              const NoiseDraw& noise) {
  return Evaluate(kP2, batch, bundle, 0.0, noise, nullptr).p2;
}

LossBreakdown TotalObjective(Variant variant, const SampleBatch& batch,
                             const ModelBundle& bundle, double alpha,
                             const NoiseDraw& noise) {
  RequireAlpha(alpha);
  return Assemble(variant, alpha,
                  Evaluate(TermsFor(variant), batch, bundle, alpha, noise, nullptr));
}

BlockGradients ZeroGradients(const ModelBundle& bundle) {
  BlockGradients g;
  for (Block b : kAllBlocks) g[BlockIndex(b)] = VectorXd::Zero(bundle.block(b).size());
  return g;
}

LossBreakdown TotalObjectiveWithGradient(Variant variant,
                                         const SampleBatch& batch,
                                         const ModelBundle& bundle,
                                         double alpha, const NoiseDraw& noise,
                                         BlockGradients& gradient) {
  RequireAlpha(alpha);
  gradient = ZeroGradients(bundle);
  return Assemble(variant, alpha,
                  Evaluate(TermsFor(variant), batch, bundle, alpha, noise,
                           &gradient));
}

double SensitiveNll(const SampleBatch& batch, const ModelBundle& bundle,
                    const NoiseDraw& noise, BlockGradients* gradient) {
  RequireBatch(batch, bundle, noise);
  if (gradient) *gradient = ZeroGradients(bundle);
  const EncoderPass e = RunEncoder(bundle, batch.x, noise.encoder);
  return -MeanConditionalLogLik(bundle, e.z, batch.s, -1.0, nullptr, gradient) -
         MeanMarginalLogLik(bundle, batch.s, -1.0, gradient);
}

double PrintedEncoderObjective(const SampleBatch& batch,
                               const ModelBundle& bundle, double alpha,
                               const NoiseDraw& noise,
                               BlockGradients* gradient) {
  RequireAlpha(alpha);
  RequireBatch(batch, bundle, noise);
  if (gradient) *gradient = ZeroGradients(bundle);
  const EncoderPass e = RunEncoder(bundle, batch.x, noise.encoder);
  const int n = batch.size(), d = bundle.d_z();
  MatrixXd dz = MatrixXd::Zero(n, d);
  const double recon =
      MeanNll(bundle, Block::kTheta, e.z, batch.x, -1.0, &dz, gradient);
  const double cond =
      MeanConditionalLogLik(bundle, e.z, batch.s, -alpha, &dz, gradient);
  const double marg = MeanMarginalLogLik(bundle, batch.s, -alpha, gradient);
  if (gradient) {
    BackEncoder(bundle, e, noise.encoder, dz, MatrixXd::Zero(n, d),
                MatrixXd::Zero(n, d), *gradient);
  }
  return -recon - alpha * cond - alpha * marg;
}

double AdversarialLoss(DiscriminatorKind kind, const SampleBatch& batch,
                       const ModelBundle& bundle, const NoiseDraw& noise,
                       BlockGradients* gradient) {
  if (batch.size() < 1) throw ValidationError("batch must be nonempty");
  if (gradient) *gradient = ZeroGradients(bundle);
  const PriorPass prior = RunPrior(bundle, noise.prior);
  const int m = static_cast<int>(prior.z.rows());
  switch (kind) {
    case DiscriminatorKind::kLatent: {
      RequireBatch(batch, bundle, noise);
      const EncoderPass e = RunEncoder(bundle, batch.x, noise.encoder);
      MatrixXd d_real, d_fake;
      const double v = CrossEntropy(bundle, kind, e.z, prior.z, &d_real,
                                    &d_fake, gradient);
      if (gradient) {
        const MatrixXd zero = MatrixXd::Zero(e.z.rows(), e.z.cols());
        BackEncoder(bundle, e, noise.encoder, d_real, zero, zero, *gradient);
        BackPrior(bundle, prior, d_fake, *gradient);
      }
      return v;
    }
    case DiscriminatorKind::kOutput: {
      if (batch.d_x() != bundle.d_x()) throw ValidationError("batch d_x mismatch");
      const Pass fake = Run(bundle, Block::kTheta, prior.z);
      MatrixXd d_fake;
      const double v =
          CrossEntropy(bundle, kind, batch.x, fake.out, nullptr, &d_fake, gradient);
      if (gradient) {
        BackPrior(bundle, prior,
                  Back(bundle, Block::kTheta, fake, d_fake, *gradient), *gradient);
      }
      return v;
    }
    case DiscriminatorKind::kSensitive: {
      const Pass head = Run(bundle, Block::kXi, prior.z);
      const MatrixXd probs = LogSoftmaxRows(Clamp(head.out, kLogitClamp))
                                 .array()
                                 .exp()
                                 .matrix();
      MatrixXd d_fake;
      const double v =
          CrossEntropy(bundle, kind, OneHot(batch.s, bundle.n_classes()), probs,
                       nullptr, &d_fake, gradient);
      if (gradient) {
        MatrixXd d_logits(m, probs.cols());
        for (int i = 0; i < m; ++i) {
          const double inner = probs.row(i).dot(d_fake.row(i));
          d_logits.row(i) =
              probs.row(i).array() * (d_fake.row(i).array() - inner);
        }
        d_logits = d_logits.cwiseProduct(PassMask(head.out, kLogitClamp));
        BackPrior(bundle, prior,
                  Back(bundle, Block::kXi, head, d_logits, *gradient), *gradient);
      }
      return v;
    }
  }
  throw ValidationError("unknown discriminator kind");
}

LinearGaussian LinearGaussianFromBundle(const ModelBundle& bundle,
                                        const Eigen::MatrixXd& sigma_x) {
  const Mlp& enc = bundle.network(Block::kPhi);
  if (!enc.spec().hidden_widths.empty()) {
    throw ValidationError("linear-Gaussian form needs an encoder without hidden layers");
  }
  const int dx = bundle.d_x(), dz = bundle.d_z();
  if (sigma_x.rows() != dx || sigma_x.cols() != dx) {
    throw ValidationError("sigma_x must be d_x x d_x");
  }
  const VectorXd& p = bundle.block(Block::kPhi);
  const Eigen::Map<const MatrixXd> w(p.data(), 2 * dz, dx);
  if (w.bottomRows(dz).cwiseAbs().maxCoeff() != 0.0) {
    throw ValidationError("log-variance head must not depend on x");
  }
  LinearGaussian lg;
  lg.a = w.topRows(dz);
  lg.b = p.segment(2 * dz * dx, dz);
  lg.variance = p.segment(2 * dz * dx + dz, dz)
                    .cwiseMax(-kLogVarianceClamp)
                    .cwiseMin(kLogVarianceClamp)
                    .array()
                    .exp();
  lg.sigma_x = sigma_x;
  lg.q_mean = VectorXd::Zero(dz);
  lg.q_cov = MatrixXd::Identity(dz, dz);
  return lg;
}

namespace {

double LogDet(const MatrixXd& m) {
  const Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError("covariance is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

double GaussianKl(const VectorXd& mean0, const MatrixXd& cov0,
                  const VectorXd& mean1, const MatrixXd& cov1) {
  const Eigen::LLT<MatrixXd> llt1(cov1);
  const VectorXd diff = mean1 - mean0;
  return 0.5 * ((llt1.solve(cov0)).trace() + diff.dot(llt1.solve(diff)) -
                static_cast<double>(mean0.size()) + LogDet(cov1) - LogDet(cov0));
}

double ConditionalKlToReference(const LinearGaussian& lg) {
  const Eigen::LLT<MatrixXd> q(lg.q_cov);
  const MatrixXd d = lg.variance.asDiagonal();
  const VectorXd diff = lg.b - lg.q_mean;
  const MatrixXd spread = lg.a * lg.sigma_x * lg.a.transpose();
  return 0.5 * (q.solve(d).trace() + q.solve(spread).trace() +
                diff.dot(q.solve(diff)) - static_cast<double>(lg.b.size()) +
                LogDet(lg.q_cov) - lg.variance.array().log().sum());
}

double MarginalKlToReference(const LinearGaussian& lg) {
  const MatrixXd cov_z = lg.a * lg.sigma_x * lg.a.transpose() +
                         MatrixXd(lg.variance.asDiagonal());
  return GaussianKl(lg.b, cov_z, lg.q_mean, lg.q_cov);
}

double LinearGaussianMutualInformation(const LinearGaussian& lg) {
  const MatrixXd cov_z = lg.a * lg.sigma_x * lg.a.transpose() +
                         MatrixXd(lg.variance.asDiagonal());
  return 0.5 * (LogDet(cov_z) - lg.variance.array().log().sum());
}

std::string LossBreakdownJson(const LossBreakdown& b, std::int64_t step,
                              std::optional<double> wall_clock_s) {
  Json j{{"step", step},
         {"variant", std::string(VariantName(b.variant))},
         {"alpha", b.alpha},
         {"recon_nll", b.recon_nll},
         {"marginal_kl_x", b.marginal_kl_x},
         {"leakage_pred_fidelity", b.leakage_pred_fidelity},
         {"leakage_dist_discrepancy", b.leakage_dist_discrepancy},
         {"complexity", b.complexity},
         {"uncertainty", b.uncertainty},
         {"total", b.total},
         {"untrained_discriminator", b.untrained_discriminator}};
  if (wall_clock_s) j["wall_clock_s"] = *wall_clock_s;
  return j.dump();
}

LossBreakdown ParseLossBreakdownJson(std::string_view line, std::int64_t* step) {
  try {
    const Json j = Json::parse(line);
    LossBreakdown b;
    const auto variant = VariantFromName(j.at("variant").get<std::string>());
    if (!variant) throw ValidationError("unknown variant in record");
    b.variant = *variant;
    b.alpha = j.at("alpha").get<double>();
    b.recon_nll = j.at("recon_nll").get<double>();
    b.marginal_kl_x = j.at("marginal_kl_x").get<double>();
    b.leakage_pred_fidelity = j.at("leakage_pred_fidelity").get<double>();
    b.leakage_dist_discrepancy = j.at("leakage_dist_discrepancy").get<double>();
    b.complexity = j.at("complexity").get<double>();
    b.uncertainty = j.at("uncertainty").get<double>();
    b.total = j.at("total").get<double>();
    b.untrained_discriminator = j.value("untrained_discriminator", false);
    if (step) *step = j.at("step").get<std::int64_t>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed loss record: ") + e.what());
  }
}

}  // namespace dvpf
