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
#include "dvpf/tabular.hpp"

#include <cmath>
#include <string>

#include "dvpf/errors.hpp"

namespace dvpf {
namespace {

struct Cell {
  int s, x, z;
  double weight;
};

double SafeLog(double p) { return std::log(std::max(p, kProbabilityFloor)); }

std::vector<Cell> SampleCells(const std::vector<TabularSample>& samples) {
  if (samples.empty()) throw ValidationError("no tabular samples");
  std::vector<Cell> cells;
  cells.reserve(samples.size());
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const auto& t : samples) cells.push_back({t.s, t.x, t.z, w});
  return cells;
}

std::vector<Cell> ExactCells(const JointDistribution& joint,
                             const Channel& channel) {
  if (channel.x_size() != joint.x_size()) {
    throw ValidationError("channel rows must match |X|");
  }
  std::vector<Cell> cells;
  for (int s = 0; s < joint.s_size(); ++s)
    for (int x = 0; x < joint.x_size(); ++x)
      for (int z = 0; z < channel.z_cardinality(); ++z) {
        const double p = joint(s, x) * channel.matrix()(x, z);
        if (p > 0.0) cells.push_back({s, x, z, p});
      }
  return cells;
}

void CheckDecoders(const TabularDecoders& d, int s_size, int z_cardinality) {
  if (d.s_given_z.rows() != z_cardinality || d.s_given_z.cols() != s_size ||
      d.s_marginal.size() != s_size || d.z_marginal.size() != z_cardinality ||
      static_cast<int>(d.x_given_sz.size()) != s_size) {
    throw ValidationError("decoder tables do not match the alphabets");
  }
}

TabularP1Estimate P1From(const std::vector<Cell>& cells,
                         const Eigen::VectorXd& p_s,
                         const TabularDecoders& d) {
  double fidelity = 0.0, discrepancy = 0.0;
  for (const Cell& c : cells) {
    fidelity += c.weight * (SafeLog(d.s_given_z(c.z, c.s)) - SafeLog(d.s_marginal(c.s)));
    discrepancy += c.weight * (SafeLog(p_s(c.s)) - SafeLog(d.s_marginal(c.s)));
  }
  TabularP1Estimate e;
  e.pred_fidelity = FromNats(fidelity);
  e.dist_discrepancy = FromNats(discrepancy);
  e.leakage = FromNats(fidelity - discrepancy);
  return e;
}

TabularP2Estimate P2From(const std::vector<Cell>& cells,
                         const JointDistribution& joint, const Channel& channel,
                         const TabularDecoders& d) {
  double complexity = 0.0, uncertainty = 0.0;
  for (const Cell& c : cells) {
    complexity += c.weight * (SafeLog(channel.matrix()(c.x, c.z)) -
                              SafeLog(d.z_marginal(c.z)));
    uncertainty -= c.weight * SafeLog(d.x_given_sz[c.s](c.z, c.x));
  }
  TabularP2Estimate e;
  e.complexity = FromNats(complexity);
  e.uncertainty = FromNats(uncertainty);
  e.constant = Bits{-ConditionalEntropyXGivenS(joint).value};
  e.leakage = Bits{e.complexity.value + e.uncertainty.value + e.constant.value};
  return e;
}

}  // namespace

std::vector<TabularSample> SampleThroughChannel(const JointDistribution& joint,
                                                const Channel& channel, int n,
                                                std::mt19937_64& rng) {
  if (n < 1) throw ValidationError("sample count must be >= 1");
  if (channel.x_size() != joint.x_size()) {
    throw ValidationError("channel rows must match |X|");
  }
  const Eigen::MatrixXd& t = joint.table();
  std::discrete_distribution<int> cell(t.data(), t.data() + t.size());
  std::vector<std::discrete_distribution<int>> rows;
  for (int x = 0; x < channel.x_size(); ++x) {
    const Eigen::RowVectorXd r = channel.matrix().row(x);
    rows.emplace_back(r.data(), r.data() + r.size());
  }
  std::vector<TabularSample> out(n);
  for (auto& sample : out) {
    const int k = cell(rng);  // column-major index
    sample.s = k % joint.s_size();
    sample.x = k / joint.s_size();
    sample.z = rows[sample.x](rng);
  }
  return out;
}

TabularDecoders FitTabularDecoders(const std::vector<TabularSample>& samples,
                                   int s_size, int x_size, int z_cardinality,
                                   double smoothing) {
  if (samples.empty()) throw ValidationError("no tabular samples");
  if (smoothing <= 0.0) throw ValidationError("smoothing must be positive");
  Eigen::MatrixXd sz = Eigen::MatrixXd::Zero(z_cardinality, s_size);
  std::vector<Eigen::MatrixXd> xsz(s_size, Eigen::MatrixXd::Zero(z_cardinality, x_size));
  for (const auto& t : samples) {
    if (t.s < 0 || t.s >= s_size || t.x < 0 || t.x >= x_size || t.z < 0 ||
        t.z >= z_cardinality) {
      throw ValidationError("tabular sample outside the alphabets");
    }
    sz(t.z, t.s) += 1.0;
    xsz[t.s](t.z, t.x) += 1.0;
  }
  TabularDecoders d;
  d.s_marginal = (sz.colwise().sum().transpose().array() + smoothing).matrix();
  d.s_marginal /= d.s_marginal.sum();
  d.z_marginal = (sz.rowwise().sum().array() + smoothing).matrix();
  d.z_marginal /= d.z_marginal.sum();
  d.s_given_z = (sz.array() + smoothing).matrix();
  for (int z = 0; z < z_cardinality; ++z) d.s_given_z.row(z) /= d.s_given_z.row(z).sum();
  for (auto& m : xsz) {
    m.array() += smoothing;
    for (int z = 0; z < z_cardinality; ++z) m.row(z) /= m.row(z).sum();
  }
  d.x_given_sz = std::move(xsz);
  return d;
}

TabularDecoders ExactDecoders(const JointDistribution& joint,
                              const Channel& channel) {
  const int ns = joint.s_size(), nx = joint.x_size(), nz = channel.z_cardinality();
  const Eigen::MatrixXd sz = (joint.table() * channel.matrix()).transpose();
  TabularDecoders d;
  d.s_marginal = sz.colwise().sum().transpose();
  d.z_marginal = sz.rowwise().sum();
  d.s_given_z = sz;
  for (int z = 0; z < nz; ++z) {
    const double pz = d.z_marginal(z);
    if (pz > 0) {
      d.s_given_z.row(z) /= pz;
    } else {
      d.s_given_z.row(z).setConstant(1.0 / ns);
    }
  }
  for (int s = 0; s < ns; ++s) {
    Eigen::MatrixXd m(nz, nx);
    for (int z = 0; z < nz; ++z) {
      for (int x = 0; x < nx; ++x) m(z, x) = joint(s, x) * channel.matrix()(x, z);
      const double total = m.row(z).sum();
      if (total > 0) {
        m.row(z) /= total;
      } else {
        m.row(z).setConstant(1.0 / nx);
      }
    }
    d.x_given_sz.push_back(std::move(m));
  }
  return d;
}

TabularP1Estimate EstimateTabularP1(const std::vector<TabularSample>& samples,
                                    const TabularDecoders& decoders) {
  const int ns = static_cast<int>(decoders.s_marginal.size());
  CheckDecoders(decoders, ns, static_cast<int>(decoders.z_marginal.size()));
  Eigen::VectorXd p_s = Eigen::VectorXd::Zero(ns);
  for (const auto& t : samples) {
    if (t.s < 0 || t.s >= ns) throw ValidationError("label outside the alphabet");
    p_s(t.s) += 1.0;
  }
  p_s /= p_s.sum();
  return P1From(SampleCells(samples), p_s, decoders);
}

TabularP2Estimate EstimateTabularP2(const std::vector<TabularSample>& samples,
                                    const JointDistribution& joint,
                                    const Channel& channel,
                                    const TabularDecoders& decoders) {
  CheckDecoders(decoders, joint.s_size(), channel.z_cardinality());
  return P2From(SampleCells(samples), joint, channel, decoders);
}

TabularP1Estimate ExpectedTabularP1(const JointDistribution& joint,
                                    const Channel& channel,
                                    const TabularDecoders& decoders) {
  CheckDecoders(decoders, joint.s_size(), channel.z_cardinality());
  const Eigen::VectorXd p_s = joint.table().rowwise().sum();
  return P1From(ExactCells(joint, channel), p_s, decoders);
}

TabularP2Estimate ExpectedTabularP2(const JointDistribution& joint,
                                    const Channel& channel,
                                    const TabularDecoders& decoders) {
  CheckDecoders(decoders, joint.s_size(), channel.z_cardinality());
  return P2From(ExactCells(joint, channel), joint, channel, decoders);
}

}  // namespace dvpf
