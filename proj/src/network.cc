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
#include "dvpf/network.hpp"

#include <cmath>

#include "dvpf/errors.hpp"

namespace dvpf {
namespace {

constexpr double kLeakySlope = 0.2;

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

Eigen::MatrixXd Activate(Activation a, const Eigen::MatrixXd& pre) {
  if (a == Activation::kTanhLike) return pre.array().tanh().matrix();
  return pre.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Eigen::MatrixXd ActivationDerivative(Activation a, const Eigen::MatrixXd& pre) {
  if (a == Activation::kTanhLike) {
    return (1.0 - pre.array().tanh().square()).matrix();
  }
  return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

}  // namespace

std::string ActivationName(Activation a) {
  return a == Activation::kTanhLike ? "tanh" : "relu";
}

Activation ActivationFromName(const std::string& name) {
  if (name == "tanh") return Activation::kTanhLike;
  if (name == "relu") return Activation::kReluLike;
  throw ValidationError("unknown activation '" + name + "'");
}

void NetworkSpec::Validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw ValidationError("NetworkSpec: dims must be >= 1");
  }
  for (int w : hidden_widths) {
    if (w < 1) throw ValidationError("NetworkSpec: hidden width must be >= 1");
  }
}

std::size_t NetworkSpec::ParameterCount() const {
  std::size_t count = 0;
  int in = input_dim;
  for (int w : hidden_widths) {
    count += static_cast<std::size_t>(w) * (in + 1);
    in = w;
  }
  return count + static_cast<std::size_t>(output_dim) * (in + 1);
}

Mlp::Mlp(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.Validate();
  int in = spec_.input_dim;
  std::size_t offset = 0;
  auto add = [&](int out) {
    Layer l{in, out, offset, offset + static_cast<std::size_t>(in) * out};
    offset = l.bias_offset + out;
    layers_.push_back(l);
    in = out;
  };
  for (int w : spec_.hidden_widths) add(w);
  add(spec_.output_dim);
  parameter_count_ = offset;
}

Eigen::MatrixXd Mlp::Forward(std::span<const double> params,
                             const Eigen::MatrixXd& x, Tape* tape) const {
  if (x.cols() != spec_.input_dim) {
    throw ValidationError("Mlp: expected input dim " +
                          std::to_string(spec_.input_dim) + ", got " +
                          std::to_string(x.cols()));
  }
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->preactivations.clear();
  }
  Eigen::MatrixXd h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    ConstMatrixMap w(params.data() + l.weight_offset, l.out, l.in);
    ConstVectorMap b(params.data() + l.bias_offset, l.out);
    Eigen::MatrixXd pre = h * w.transpose();
    pre.rowwise() += b.transpose();
    if (!pre.allFinite()) {
      throw NumericError("non-finite activation in layer " + std::to_string(i));
    }
    if (tape != nullptr) tape->inputs.push_back(std::move(h));
    if (i + 1 < layers_.size()) {
      h = Activate(spec_.activation, pre);
    } else {
      h = pre;
    }
    if (tape != nullptr) tape->preactivations.push_back(std::move(pre));
  }
  return h;
}

Eigen::MatrixXd Mlp::Backward(std::span<const double> params, const Tape& tape,
                              const Eigen::MatrixXd& grad_output,
                              std::span<double> grad) const {
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const Layer& l = layers_[idx];
    if (idx + 1 < layers_.size()) {
      delta.array() *=
          ActivationDerivative(spec_.activation, tape.preactivations[idx])
              .array();
    }
    MatrixMap gw(grad.data() + l.weight_offset, l.out, l.in);
    VectorMap gb(grad.data() + l.bias_offset, l.out);
    gw.noalias() += delta.transpose() * tape.inputs[idx];
    gb.noalias() += delta.colwise().sum().transpose();
    ConstMatrixMap w(params.data() + l.weight_offset, l.out, l.in);
    delta = delta * w;
  }
  return delta;
}

void Mlp::Initialize(std::span<double> params, std::mt19937_64& rng) const {
  for (const Layer& l : layers_) {
    const double bound = std::sqrt(3.0 / l.in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = 0; k < static_cast<std::size_t>(l.in) * l.out; ++k) {
      params[l.weight_offset + k] = u(rng);
    }
    for (int k = 0; k < l.out; ++k) params[l.bias_offset + k] = 0.0;
  }
}

}  // namespace dvpf
