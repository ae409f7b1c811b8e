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
// Fully connected networks whose parameters live in a caller-owned flat
// buffer. Rows of every activation matrix are samples.
#ifndef DVPF_NETWORK_HPP_
#define DVPF_NETWORK_HPP_

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dvpf {

enum class Activation { kReluLike, kTanhLike };

std::string ActivationName(Activation a);
Activation ActivationFromName(const std::string& name);

struct NetworkSpec {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  int output_dim = 1;
  Activation activation = Activation::kReluLike;

  void Validate() const;
  std::size_t ParameterCount() const;
  bool operator==(const NetworkSpec&) const = default;
};

// Layer l stores its weight matrix (out x in, column-major) followed by its
// bias. Hidden layers apply the activation; the output layer is affine.
class Mlp {
 public:
  explicit Mlp(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return parameter_count_; }
  int input_dim() const { return spec_.input_dim; }
  int output_dim() const { return spec_.output_dim; }

  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;       // input to each layer
    std::vector<Eigen::MatrixXd> preactivations;
  };

  // Throws NumericError naming the layer when an activation is non-finite.
  Eigen::MatrixXd Forward(std::span<const double> params,
                          const Eigen::MatrixXd& x, Tape* tape = nullptr) const;

  // Accumulates dL/dparams into `grad` and returns dL/dx.
  Eigen::MatrixXd Backward(std::span<const double> params, const Tape& tape,
                           const Eigen::MatrixXd& grad_output,
                           std::span<double> grad) const;

  // Fan-in scaled uniform weights, zero biases.
  void Initialize(std::span<double> params, std::mt19937_64& rng) const;

 private:
  struct Layer {
    int in = 0;
    int out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };

  NetworkSpec spec_;
  std::vector<Layer> layers_;
  std::size_t parameter_count_ = 0;
};

}  // namespace dvpf

#endif  // DVPF_NETWORK_HPP_
