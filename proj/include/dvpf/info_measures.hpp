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
// Discrete information measures in bits, plus the cross-entropy lower bound
// on I(X;S) obtained from any probabilistic predictor of S.
#ifndef DVPF_INFO_MEASURES_HPP_
#define DVPF_INFO_MEASURES_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dvpf {

// Reports are in bits; training losses are in nats. Multiply nats by this.
inline constexpr double kBitsPerNat = 1.4426950408889634;
// Floor applied inside logarithms of predicted probabilities.
inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kSumTolerance = 1e-9;

struct Bits {
  double value = 0.0;
};

inline Bits FromNats(double nats) { return Bits{nats * kBitsPerNat}; }

class DiscreteDistribution {
 public:
  // Throws ValidationError on empty, negative or non-normalized input.
  explicit DiscreteDistribution(std::vector<double> probs);

  static DiscreteDistribution Uniform(std::size_t k);
  static DiscreteDistribution PointMass(std::size_t k, std::size_t at);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

// Joint pmf over (S, X): rows index s, columns index x.
class JointDistribution {
 public:
  explicit JointDistribution(Eigen::MatrixXd table);

  static JointDistribution Product(const DiscreteDistribution& s,
                                   const DiscreteDistribution& x);

  int s_size() const { return static_cast<int>(table_.rows()); }
  int x_size() const { return static_cast<int>(table_.cols()); }
  const Eigen::MatrixXd& table() const { return table_; }
  double operator()(int s, int x) const { return table_(s, x); }

  DiscreteDistribution MarginalS() const;
  DiscreteDistribution MarginalX() const;

 private:
  Eigen::MatrixXd table_;
};

Bits Entropy(const DiscreteDistribution& dist);

// Throws DomainError naming the first index with p_i > 0 and q_i = 0.
Bits KlDivergence(const DiscreteDistribution& p, const DiscreteDistribution& q);

Bits JointEntropy(const JointDistribution& joint);

// H(S) + H(X) - H(S,X).
Bits MutualInformation(const JointDistribution& joint);

// Conditional entropy H(X|S) of the joint.
Bits ConditionalEntropyXGivenS(const JointDistribution& joint);

// Entropy of the empirical label histogram.
Bits EmpiricalLabelEntropy(std::span<const int> labels, int n_classes);

struct ClassifierBound {
  Bits bits;
  // Realized labels whose predicted probability fell below kProbabilityFloor.
  std::size_t floored = 0;
  double cross_entropy_bits = 0.0;
};

// H_emp(S) - mean(-log2 q(s_i | x_i)), clamped below at zero. Row i of
// `predicted_probs` is the predictor's distribution for sample i.
ClassifierBound ClassifierMiBound(std::span<const int> labels,
                                  const Eigen::MatrixXd& predicted_probs);

// Raw-span helpers shared with the solvers; no validation.
double EntropyNats(std::span<const double> probs);
double MutualInformationNats(const Eigen::MatrixXd& joint_table);

}  // namespace dvpf

#endif  // DVPF_INFO_MEASURES_HPP_
