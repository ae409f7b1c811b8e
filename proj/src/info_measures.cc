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
#include "dvpf/info_measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "dvpf/errors.hpp"

namespace dvpf {
namespace {

void ValidateProbabilities(std::span<const double> probs, const char* what) {
  if (probs.empty()) {
    throw ValidationError(std::string(what) + ": empty distribution");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i]) || probs[i] < 0.0) {
      std::ostringstream msg;
      msg << what << ": entry " << i << " is " << probs[i];
      throw ValidationError(msg.str());
    }
    sum += probs[i];
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": probabilities sum to " << sum;
    throw ValidationError(msg.str());
  }
}

double XLogX(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  ValidateProbabilities(probs_, "DiscreteDistribution");
}

DiscreteDistribution DiscreteDistribution::Uniform(std::size_t k) {
  if (k == 0) throw ValidationError("Uniform: k must be >= 1");
  return DiscreteDistribution(std::vector<double>(k, 1.0 / k));
}

DiscreteDistribution DiscreteDistribution::PointMass(std::size_t k,
                                                     std::size_t at) {
  if (at >= k) throw ValidationError("PointMass: index out of range");
  std::vector<double> p(k, 0.0);
  p[at] = 1.0;
  return DiscreteDistribution(std::move(p));
}

JointDistribution::JointDistribution(Eigen::MatrixXd table)
    : table_(std::move(table)) {
  if (table_.size() == 0) throw ValidationError("JointDistribution: empty");
  ValidateProbabilities(std::span<const double>(table_.data(), table_.size()),
                        "JointDistribution");
}

JointDistribution JointDistribution::Product(const DiscreteDistribution& s,
                                             const DiscreteDistribution& x) {
  Eigen::MatrixXd t(s.size(), x.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) t(i, j) = s[i] * x[j];
  }
  // Products of normalized vectors can drift by an ulp or two.
  t /= t.sum();
  return JointDistribution(std::move(t));
}

DiscreteDistribution JointDistribution::MarginalS() const {
  Eigen::VectorXd m = table_.rowwise().sum();
  return DiscreteDistribution(std::vector<double>(m.data(), m.data() + m.size()));
}

DiscreteDistribution JointDistribution::MarginalX() const {
  Eigen::RowVectorXd m = table_.colwise().sum();
  return DiscreteDistribution(std::vector<double>(m.data(), m.data() + m.size()));
}

double EntropyNats(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) h -= XLogX(p);
  return std::max(h, 0.0);
}

double MutualInformationNats(const Eigen::MatrixXd& joint_table) {
  const Eigen::VectorXd ps = joint_table.rowwise().sum();
  const Eigen::RowVectorXd px = joint_table.colwise().sum();
  double hs = 0.0, hx = 0.0, hsx = 0.0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) hs -= XLogX(ps(i));
  for (Eigen::Index j = 0; j < px.size(); ++j) hx -= XLogX(px(j));
  for (Eigen::Index j = 0; j < joint_table.cols(); ++j) {
    for (Eigen::Index i = 0; i < joint_table.rows(); ++i) {
      hsx -= XLogX(joint_table(i, j));
    }
  }
  return std::max(hs + hx - hsx, 0.0);
}

Bits Entropy(const DiscreteDistribution& dist) {
  return FromNats(EntropyNats(dist.probs()));
}

Bits KlDivergence(const DiscreteDistribution& p,
                  const DiscreteDistribution& q) {
  if (p.size() != q.size()) {
    throw ValidationError("KlDivergence: length mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw DomainError("KlDivergence: q[" + std::to_string(i) +
                            "] = 0 where p > 0 (support violation)",
                        i);
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return FromNats(std::max(kl, 0.0));
}

Bits JointEntropy(const JointDistribution& joint) {
  const auto& t = joint.table();
  return FromNats(EntropyNats(std::span<const double>(t.data(), t.size())));
}

Bits MutualInformation(const JointDistribution& joint) {
  return FromNats(MutualInformationNats(joint.table()));
}

Bits ConditionalEntropyXGivenS(const JointDistribution& joint) {
  const double h_sx = JointEntropy(joint).value;
  const double h_s = Entropy(joint.MarginalS()).value;
  return Bits{std::max(h_sx - h_s, 0.0)};
}

Bits EmpiricalLabelEntropy(std::span<const int> labels, int n_classes) {
  if (labels.empty()) throw ValidationError("EmpiricalLabelEntropy: no labels");
  std::vector<double> counts(n_classes, 0.0);
  for (int s : labels) {
    if (s < 0 || s >= n_classes) {
      throw ValidationError("EmpiricalLabelEntropy: label out of range");
    }
    counts[s] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(labels.size());
  return FromNats(EntropyNats(counts));
}

ClassifierBound ClassifierMiBound(std::span<const int> labels,
                                  const Eigen::MatrixXd& predicted_probs) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n == 0 || predicted_probs.rows() != n) {
    throw ValidationError(
        "ClassifierMiBound: need one predicted distribution per sample");
  }
  const int n_classes = static_cast<int>(predicted_probs.cols());
  ClassifierBound out;
  double ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = labels[i];
    if (s < 0 || s >= n_classes) {
      throw ValidationError("ClassifierMiBound: label " + std::to_string(s) +
                            " out of range");
    }
    double q = predicted_probs(i, s);
    if (!(q >= kProbabilityFloor)) {
      q = kProbabilityFloor;
      ++out.floored;
    }
    ce -= std::log(q);
  }
  ce /= static_cast<double>(n);
  out.cross_entropy_bits = ce * kBitsPerNat;
  const double h = EmpiricalLabelEntropy(labels, n_classes).value;
  out.bits = Bits{std::max(h - out.cross_entropy_bits, 0.0)};
  return out;
}

}  // namespace dvpf
