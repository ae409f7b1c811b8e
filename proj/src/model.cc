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
#include "dvpf/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dvpf/errors.hpp"
#include "json.hpp"

namespace dvpf {
namespace {

using Json = nlohmann::ordered_json;

const double kDiscriminatorLogitClamp =
    std::log((1.0 - kDiscriminatorFloor) / kDiscriminatorFloor);

constexpr std::array<std::string_view, 8> kBlockNames = {
    "phi", "theta", "xi", "varphi", "psi", "eta", "omega", "tau"};

const NetworkSpec& SpecFor(const ModelSpecs& specs, Block b) {
  switch (b) {
    case Block::kPhi: return specs.encoder;
    case Block::kTheta: return specs.utility_decoder;
    case Block::kXi: return specs.sensitive_decoder;
    case Block::kVarphi: return specs.uncertainty_decoder;
    case Block::kPsi: return specs.prior_generator;
    case Block::kEta: return specs.latent_discriminator;
    case Block::kOmega: return specs.output_discriminator;
    case Block::kTau: return specs.sensitive_discriminator;
  }
  throw ValidationError("unknown block");
}

void Require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("ModelSpecs: " + what);
}

Json SpecToJson(const NetworkSpec& s) {
  return Json{{"input_dim", s.input_dim},
              {"hidden_widths", s.hidden_widths},
              {"output_dim", s.output_dim},
              {"activation", ActivationName(s.activation)}};
}

NetworkSpec SpecFromJson(const Json& j) {
  NetworkSpec s;
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
  s.output_dim = j.at("output_dim").get<int>();
  s.activation = ActivationFromName(j.at("activation").get<std::string>());
  return s;
}

void CheckRows(const Eigen::MatrixXd& m, int cols, const char* what) {
  if (m.cols() != cols) {
    throw ValidationError(std::string(what) + ": expected " +
                          std::to_string(cols) + " columns, got " +
                          std::to_string(m.cols()));
  }
}

}  // namespace

std::string_view BlockName(Block b) { return kBlockNames[BlockIndex(b)]; }

std::optional<Block> BlockFromName(std::string_view name) {
  for (Block b : kAllBlocks) {
    if (BlockName(b) == name) return b;
  }
  return std::nullopt;
}

ModelSpecs ModelSpecs::Uniform(int d_x, int d_z, int n_classes,
                               std::vector<int> hidden, Activation activation,
                               bool explicit_prior) {
  auto net = [&](int in, int out) {
    return NetworkSpec{in, hidden, out, activation};
  };
  ModelSpecs s;
  s.encoder = net(d_x, 2 * d_z);
  s.utility_decoder = net(d_z, d_x);
  s.sensitive_decoder = net(d_z, n_classes);
  s.uncertainty_decoder = net(n_classes + d_z, d_x);
  s.prior_generator = net(d_z, d_z);
  s.latent_discriminator = net(d_z, 1);
  s.output_discriminator = net(d_x, 1);
  s.sensitive_discriminator = net(n_classes, 1);
  s.explicit_prior = explicit_prior;
  s.Validate();
  return s;
}

void ModelSpecs::Validate() const {
  for (Block b : kAllBlocks) SpecFor(*this, b).Validate();
  const int dx = d_x(), dz = d_z(), n = n_classes();
  Require(encoder.output_dim == 2 * dz, "encoder output must be 2 d_z");
  Require(utility_decoder.output_dim == dx, "utility decoder output != d_x");
  Require(sensitive_decoder.input_dim == dz, "sensitive decoder input != d_z");
  Require(uncertainty_decoder.input_dim == n + dz,
          "uncertainty decoder input != N + d_z");
  Require(uncertainty_decoder.output_dim == dx,
          "uncertainty decoder output != d_x");
  Require(prior_generator.output_dim == dz, "prior output != d_z");
  Require(latent_discriminator.input_dim == dz &&
              latent_discriminator.output_dim == 1,
          "latent discriminator must map d_z -> 1");
  Require(output_discriminator.input_dim == dx &&
              output_discriminator.output_dim == 1,
          "output discriminator must map d_x -> 1");
  Require(sensitive_discriminator.input_dim == n &&
              sensitive_discriminator.output_dim == 1,
          "sensitive discriminator must map N -> 1");
  Require(!explicit_prior || d_noise() == dz,
          "explicit prior requires d_noise = d_z");
}

ModelBundle::ModelBundle(ModelSpecs specs, std::uint64_t seed)
    : ModelBundle(std::move(specs), seed, true) {}

ModelBundle ModelBundle::Zeros(ModelSpecs specs) {
  return ModelBundle(std::move(specs), 0, false);
}

ModelBundle::ModelBundle(ModelSpecs specs, std::uint64_t seed, bool initialize)
    : specs_(std::move(specs)), seed_(seed) {
  specs_.Validate();
  for (Block b : kAllBlocks) {
    networks_.emplace_back(SpecFor(specs_, b));
    std::size_t size = networks_.back().parameter_count();
    if (b == Block::kXi) size += specs_.n_classes();
    if (b == Block::kPsi && specs_.explicit_prior) size = 0;
    blocks_[BlockIndex(b)] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
    if (!initialize || size == 0) continue;
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(BlockIndex(b)) + 1u};
    std::mt19937_64 rng(seq);
    networks_.back().Initialize(
        std::span<double>(blocks_[BlockIndex(b)].data(),
                          networks_.back().parameter_count()),
        rng);
  }
}

std::span<const double> ModelBundle::network_params(Block b) const {
  const auto& v = blocks_[BlockIndex(b)];
  return std::span<const double>(v.data(), networks_[BlockIndex(b)].parameter_count());
}

std::span<const double> ModelBundle::marginal_logits() const {
  const auto& v = blocks_[BlockIndex(Block::kXi)];
  const std::size_t offset = networks_[BlockIndex(Block::kXi)].parameter_count();
  return std::span<const double>(v.data() + offset, specs_.n_classes());
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.size());
  return n;
}

EncoderPosterior Posterior(const ModelBundle& bundle, const Eigen::MatrixXd& x) {
  CheckRows(x, bundle.d_x(), "encode");
  const Eigen::MatrixXd out = bundle.network(Block::kPhi)
                                  .Forward(bundle.network_params(Block::kPhi), x);
  const int dz = bundle.d_z();
  EncoderPosterior post;
  post.mean = out.leftCols(dz);
  post.log_variance =
      out.rightCols(dz).cwiseMax(-kLogVarianceClamp).cwiseMin(kLogVarianceClamp);
  return post;
}

EncodeResult Encode(const ModelBundle& bundle, const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& noise) {
  EncodeResult r;
  r.posterior = Posterior(bundle, x);
  if (noise.rows() != x.rows() || noise.cols() != bundle.d_z()) {
    throw ValidationError("encode: noise must be n x d_z");
  }
  r.z = r.posterior.mean +
        ((0.5 * r.posterior.log_variance.array()).exp() * noise.array()).matrix();
  return r;
}

Eigen::MatrixXd DecodeUtility(const ModelBundle& bundle,
                              const Eigen::MatrixXd& z) {
  CheckRows(z, bundle.d_z(), "decode_utility");
  return bundle.network(Block::kTheta)
      .Forward(bundle.network_params(Block::kTheta), z);
}

Eigen::VectorXd GaussianNll(const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& mean) {
  const double constant = 0.5 * x.cols() * std::log(2.0 * M_PI);
  return (0.5 * (x - mean).rowwise().squaredNorm()).array() + constant;
}

Eigen::MatrixXd SensitiveLogits(const ModelBundle& bundle,
                                const Eigen::MatrixXd& z) {
  CheckRows(z, bundle.d_z(), "decode_sensitive");
  return bundle.network(Block::kXi)
      .Forward(bundle.network_params(Block::kXi), z)
      .cwiseMax(-kLogitClamp)
      .cwiseMin(kLogitClamp);
}

Eigen::MatrixXd DecodeSensitive(const ModelBundle& bundle,
                                const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p = SensitiveLogits(bundle, z);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    p.row(i).array() -= p.row(i).maxCoeff();
    p.row(i) = p.row(i).array().exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

DiscreteDistribution MarginalSensitive(const ModelBundle& bundle) {
  const auto logits = bundle.marginal_logits();
  std::vector<double> p(logits.size());
  double max = logits[0];
  for (double l : logits) max = std::max(max, std::clamp(l, -kLogitClamp, kLogitClamp));
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(std::clamp(logits[i], -kLogitClamp, kLogitClamp) - max);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return DiscreteDistribution(std::move(p));
}

Eigen::MatrixXd ConditionOnClass(std::span<const int> s,
                                 const Eigen::MatrixXd& z, int n_classes) {
  if (static_cast<Eigen::Index>(s.size()) != z.rows()) {
    throw ValidationError("class labels and z rows disagree");
  }
  Eigen::MatrixXd in = Eigen::MatrixXd::Zero(z.rows(), n_classes + z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (s[i] < 0 || s[i] >= n_classes) {
      throw ValidationError("class " + std::to_string(s[i]) +
                            " outside [0, " + std::to_string(n_classes) + ")");
    }
    in(i, s[i]) = 1.0;
  }
  in.rightCols(z.cols()) = z;
  return in;
}

Eigen::MatrixXd DecodeUncertainty(const ModelBundle& bundle,
                                  std::span<const int> s,
                                  const Eigen::MatrixXd& z) {
  CheckRows(z, bundle.d_z(), "decode_uncertainty");
  return bundle.network(Block::kVarphi)
      .Forward(bundle.network_params(Block::kVarphi),
               ConditionOnClass(s, z, bundle.n_classes()));
}

Eigen::MatrixXd SamplePrior(const ModelBundle& bundle,
                            const Eigen::MatrixXd& noise) {
  if (noise.rows() < 1) throw ValidationError("sample_prior: n must be >= 1");
  CheckRows(noise, bundle.d_noise(), "sample_prior");
  if (bundle.explicit_prior()) return noise;
  return bundle.network(Block::kPsi)
      .Forward(bundle.network_params(Block::kPsi), noise);
}

Block DiscriminatorBlock(DiscriminatorKind kind) {
  switch (kind) {
    case DiscriminatorKind::kLatent: return Block::kEta;
    case DiscriminatorKind::kOutput: return Block::kOmega;
    case DiscriminatorKind::kSensitive: return Block::kTau;
  }
  throw ValidationError("unknown discriminator kind");
}

Eigen::VectorXd DiscriminatorLogit(DiscriminatorKind kind,
                                   const ModelBundle& bundle,
                                   const Eigen::MatrixXd& input) {
  const Block b = DiscriminatorBlock(kind);
  const Mlp& net = bundle.network(b);
  if (input.cols() != net.input_dim()) {
    throw ValidationError("discriminator " + std::string(BlockName(b)) +
                          " expects input dim " +
                          std::to_string(net.input_dim()) + ", got " +
                          std::to_string(input.cols()));
  }
  return net.Forward(bundle.network_params(b), input)
      .col(0)
      .cwiseMax(-kDiscriminatorLogitClamp)
      .cwiseMin(kDiscriminatorLogitClamp);
}

Eigen::VectorXd Discriminate(DiscriminatorKind kind, const ModelBundle& bundle,
                             const Eigen::MatrixXd& input) {
  const Eigen::VectorXd logit = DiscriminatorLogit(kind, bundle, input);
  return (1.0 / (1.0 + (-logit.array()).exp()))
      .cwiseMax(kDiscriminatorFloor)
      .cwiseMin(1.0 - kDiscriminatorFloor)
      .matrix();
}

void SaveCheckpoint(const ModelBundle& bundle, const std::string& path) {
  const ModelSpecs& s = bundle.specs();
  Json manifest{{"format", std::string(kCheckpointFormat)},
                {"d_x", s.d_x()},
                {"d_z", s.d_z()},
                {"n_classes", s.n_classes()},
                {"d_noise", s.d_noise()},
                {"explicit_prior", s.explicit_prior},
                {"seed", bundle.seed()}};
  Json specs;
  Json blocks;
  for (Block b : kAllBlocks) {
    const std::string name(BlockName(b));
    specs[name] = SpecToJson(SpecFor(s, b));
    const auto& v = bundle.block(b);
    blocks[name] = std::vector<double>(v.data(), v.data() + v.size());
  }
  manifest["specs"] = specs;
  Json doc{{"manifest", manifest}, {"blocks", blocks}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << doc.dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path);
}

ModelBundle LoadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path);
  Json doc;
  try {
    doc = Json::parse(in);
    const Json& m = doc.at("manifest");
    if (m.at("format").get<std::string>() != kCheckpointFormat) {
      throw ValidationError("unsupported checkpoint format");
    }
    ModelSpecs s;
    const Json& specs = m.at("specs");
    s.encoder = SpecFromJson(specs.at("phi"));
    s.utility_decoder = SpecFromJson(specs.at("theta"));
    s.sensitive_decoder = SpecFromJson(specs.at("xi"));
    s.uncertainty_decoder = SpecFromJson(specs.at("varphi"));
    s.prior_generator = SpecFromJson(specs.at("psi"));
    s.latent_discriminator = SpecFromJson(specs.at("eta"));
    s.output_discriminator = SpecFromJson(specs.at("omega"));
    s.sensitive_discriminator = SpecFromJson(specs.at("tau"));
    s.explicit_prior = m.at("explicit_prior").get<bool>();
    ModelBundle bundle = ModelBundle::Zeros(s);
    for (Block b : kAllBlocks) {
      const auto values =
          doc.at("blocks").at(std::string(BlockName(b))).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != bundle.block(b).size()) {
        throw ValidationError("block " + std::string(BlockName(b)) +
                              " has the wrong length");
      }
      bundle.block(b) =
          Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    }
    // Preserve the recorded seed.
    ModelBundle out(s, m.at("seed").get<std::uint64_t>());
    for (Block b : kAllBlocks) out.block(b) = bundle.block(b);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path + ": " + e.what());
  }
}

}  // namespace dvpf
