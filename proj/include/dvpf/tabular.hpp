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
// Tabular instances of the two leakage estimators: a discrete channel for the
// encoder and count-fitted tables for the decoders. Everything is reported in
// bits. The P2 estimate adds the constant -H(X|S) so it is directly comparable
// with I(S;Z).
#ifndef DVPF_TABULAR_HPP_
#define DVPF_TABULAR_HPP_

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dvpf/info_measures.hpp"
#include "dvpf/pf_oracle.hpp"

namespace dvpf {

struct TabularSample {
  int s = 0;
  int x = 0;
  int z = 0;
};

// Draws (s, x) from the joint, then z from the channel row of x.
std::vector<TabularSample> SampleThroughChannel(const JointDistribution& joint,
                                                const Channel& channel, int n,
                                                std::mt19937_64& rng);

struct TabularDecoders {
  Eigen::MatrixXd s_given_z;             // |Z| x |S|, rows sum to 1
  Eigen::VectorXd s_marginal;            // P_xi(S)
  Eigen::VectorXd z_marginal;            // aggregate posterior estimate
  std::vector<Eigen::MatrixXd> x_given_sz;  // [s] is |Z| x |X|
};

// Maximum-likelihood tables with additive smoothing on every count.
TabularDecoders FitTabularDecoders(const std::vector<TabularSample>& samples,
                                   int s_size, int x_size, int z_cardinality,
                                   double smoothing = 0.5);

// The true conditionals of the joint pushed through the channel.
TabularDecoders ExactDecoders(const JointDistribution& joint,
                              const Channel& channel);

struct TabularP1Estimate {
  Bits pred_fidelity;     // E log P_xi(s|z) - E log P_xi(s)
  Bits dist_discrepancy;  // E log P_S(s) / P_xi(s)
  Bits leakage;
};

struct TabularP2Estimate {
  Bits complexity;   // E log P(z|x) / P_Z(z)
  Bits uncertainty;  // E -log P_varphi(x|s,z)
  Bits constant;     // -H(X|S)
  Bits leakage;
};

// Sample averages; P_S is the empirical label distribution of `samples`.
TabularP1Estimate EstimateTabularP1(const std::vector<TabularSample>& samples,
                                    const TabularDecoders& decoders);
TabularP2Estimate EstimateTabularP2(const std::vector<TabularSample>& samples,
                                    const JointDistribution& joint,
                                    const Channel& channel,
                                    const TabularDecoders& decoders);

// Exact expectations under P(s, x) W(z|x).
TabularP1Estimate ExpectedTabularP1(const JointDistribution& joint,
                                    const Channel& channel,
                                    const TabularDecoders& decoders);
TabularP2Estimate ExpectedTabularP2(const JointDistribution& joint,
                                    const Channel& channel,
                                    const TabularDecoders& decoders);

}  // namespace dvpf

#endif  // DVPF_TABULAR_HPP_
