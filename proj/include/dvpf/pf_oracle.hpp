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
// Exact Privacy Funnel solver for small finite alphabets. Solves
//   sup_{P(Z|X)} I(X;Z)  s.t.  I(S;Z) <= budget
// through its Lagrangian I(X;Z) - alpha * I(S;Z), with multi-restart
// projected-gradient ascent over row-stochastic channels.
#ifndef DVPF_PF_ORACLE_HPP_
#define DVPF_PF_ORACLE_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dvpf/info_measures.hpp"

namespace dvpf {

// Row-stochastic P(Z|X), rows index x.
class Channel {
 public:
  explicit Channel(Eigen::MatrixXd matrix);

  static Channel Identity(int n);
  static Channel Constant(int x_size, int z_cardinality);
  // Deterministic map x -> mapping[x].
  static Channel Deterministic(const std::vector<int>& mapping,
                               int z_cardinality);

  int x_size() const { return static_cast<int>(matrix_.rows()); }
  int z_cardinality() const { return static_cast<int>(matrix_.cols()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  Eigen::MatrixXd matrix_;
};

struct InducedInformations {
  Bits utility;  // I(X;Z)
  Bits leakage;  // I(S;Z)
};

// Exact informations of Z drawn through `channel` under S - X - Z.
InducedInformations ComputeInducedInformations(const JointDistribution& joint,
                                               const Channel& channel);

inline constexpr int kMaxOracleAlphabet = 12;
inline constexpr std::int64_t kMaxDeterministicSeeds = 4096;

struct SolverOptions {
  // Used when |Z|^|X| exceeds kMaxDeterministicSeeds.
  int random_restarts = 64;
  int max_iterations = 400;
  // Stop a restart once an accepted step improves the objective less than this.
  double tolerance = 1e-12;
  std::uint64_t seed = 0x5eed;
};

struct LagrangianSolution {
  Channel channel;
  Bits utility;
  Bits leakage;
  double objective_bits = 0.0;  // utility - alpha * leakage
};

// Throws CapacityError when |X| > kMaxOracleAlphabet or |Z| too large.
LagrangianSolution SolveLagrangian(const JointDistribution& joint, double alpha,
                                   int z_cardinality,
                                   const SolverOptions& options = {});

struct PFPoint {
  Bits leakage_budget;
  Bits utility;
  Channel achieving_channel;
  Bits achieved_leakage;
  // Lagrange weight whose solution achieved this point; for points found by
  // the constrained refinement, the multiplier implied by the penalty.
  double alpha = 0.0;
};

struct PFCurve {
  std::vector<PFPoint> points;
  // Every (leakage, utility) pair visited, for envelope queries.
  std::vector<std::pair<double, double>> achievable;

  // Upper concave envelope of `achievable` evaluated at `leakage_bits`.
  // This is the funnel with time-sharing allowed, the right reference for
  // continuous representations.
  double ConcaveEnvelopeAt(double leakage_bits) const;
};

// 25 points log-spaced over [1e-2, 1e2].
std::vector<double> DefaultAlphaGrid();

// Sweeps alpha, bisects alpha around each budget, then runs a penalty-based
// constrained ascent per budget (the Lagrangian alone only reaches the concave
// hull). Keeps the best feasible channel per budget. Budgets must be sorted
// ascending and >= 0.
PFCurve ComputePFCurve(const JointDistribution& joint,
                       const std::vector<double>& budgets, int z_cardinality,
                       const std::vector<double>& alphas = DefaultAlphaGrid(),
                       const SolverOptions& options = {});

}  // namespace dvpf

#endif  // DVPF_PF_ORACLE_HPP_
