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
#include "dvpf/pf_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "dvpf/errors.hpp"

namespace dvpf {
namespace {

constexpr double kRowTolerance = 1e-9;
// Mixing weight toward uniform applied to deterministic seeds so that the
// ascent can leave the vertex when a stochastic channel is better.
constexpr double kSeedSmoothing = 0.02;
constexpr int kBisectionSteps = 12;

double SafeLog(double v) { return std::log(std::max(v, kProbabilityFloor)); }

// Precomputed marginals of the joint for repeated objective evaluation.
struct Problem {
  Eigen::MatrixXd joint;  // |S| x |X|
  Eigen::VectorXd px;
  Eigen::VectorXd ps;
  double alpha = 0.0;
  // Penalty mode: maximize I(X;Z) - penalty * max(0, I(S;Z) - budget)^2.
  bool penalized = false;
  double budget = 0.0;  // nats
  double penalty = 0.0;
};

struct Evaluation {
  double ixz = 0.0;  // nats
  double isz = 0.0;  // nats
  double objective = 0.0;
};

Evaluation Evaluate(const Problem& p, const Eigen::MatrixXd& w) {
  const Eigen::RowVectorXd q = p.px.transpose() * w;
  const Eigen::MatrixXd r = p.joint * w;  // joint of (S, Z)
  Evaluation e;
  for (Eigen::Index x = 0; x < w.rows(); ++x) {
    if (p.px(x) == 0.0) continue;
    for (Eigen::Index z = 0; z < w.cols(); ++z) {
      const double v = w(x, z);
      if (v > 0.0) e.ixz += p.px(x) * v * std::log(v / q(z));
    }
  }
  e.isz = MutualInformationNats(r);
  e.ixz = std::max(e.ixz, 0.0);
  if (p.penalized) {
    const double excess = std::max(e.isz - p.budget, 0.0);
    e.objective = e.ixz - p.penalty * excess * excess;
  } else {
    e.objective = e.ixz - p.alpha * e.isz;
  }
  return e;
}

// Weight on grad I(S;Z) in the ascent direction at the evaluated point.
double LeakageWeight(const Problem& p, const Evaluation& e) {
  if (!p.penalized) return p.alpha;
  return 2.0 * p.penalty * std::max(e.isz - p.budget, 0.0);
}

Eigen::MatrixXd Gradient(const Problem& p, const Eigen::MatrixXd& w,
                         double leak_weight) {
  const Eigen::RowVectorXd q = p.px.transpose() * w;
  const Eigen::MatrixXd r = p.joint * w;
  Eigen::MatrixXd g(w.rows(), w.cols());
  for (Eigen::Index x = 0; x < w.rows(); ++x) {
    for (Eigen::Index z = 0; z < w.cols(); ++z) {
      double leak = 0.0;
      for (Eigen::Index s = 0; s < p.joint.rows(); ++s) {
        const double psx = p.joint(s, x);
        if (psx == 0.0) continue;
        leak += psx * (SafeLog(r(s, z)) - SafeLog(p.ps(s) * q(z)));
      }
      const double util = p.px(x) * (SafeLog(w(x, z)) - SafeLog(q(z)));
      g(x, z) = util - leak_weight * leak;
    }
  }
  return g;
}

// Euclidean projection of each row onto the probability simplex.
void ProjectRows(Eigen::MatrixXd& w) {
  const Eigen::Index k = w.cols();
  std::vector<double> u(k);
  for (Eigen::Index x = 0; x < w.rows(); ++x) {
    for (Eigen::Index z = 0; z < k; ++z) u[z] = w(x, z);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      cumsum += u[j];
      const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
      if (u[j] - t > 0.0) theta = t;
    }
    for (Eigen::Index z = 0; z < k; ++z) w(x, z) = std::max(w(x, z) - theta, 0.0);
    w.row(x) /= w.row(x).sum();
  }
}

struct Candidate {
  Eigen::MatrixXd w;
  Evaluation eval;
};

Candidate Ascend(const Problem& p, Eigen::MatrixXd w,
                 const SolverOptions& options) {
  Evaluation cur = Evaluate(p, w);
  double step = 1.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::MatrixXd g = Gradient(p, w, LeakageWeight(p, cur));
    bool accepted = false;
    double gain = 0.0;
    for (int bt = 0; bt < 40; ++bt) {
      Eigen::MatrixXd trial = w + step * g;
      ProjectRows(trial);
      const double dir = (g.array() * (trial - w).array()).sum();
      const Evaluation e = Evaluate(p, trial);
      if (dir > 0.0 && e.objective >= cur.objective + 1e-4 * dir) {
        gain = e.objective - cur.objective;
        w = std::move(trial);
        cur = e;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || gain < options.tolerance) break;
    step = std::min(step * 2.0, 1e6);
  }
  return Candidate{std::move(w), cur};
}

// Penalty continuation toward max I(X;Z) s.t. I(S;Z) <= budget, then restores
// exact feasibility by mixing toward the constant channel; I(S;Z) is convex in
// the channel and zero at the constant channel, so the mixture weight can be
// found by bisection.
// `multiplier` receives the penalty-implied Lagrange weight on I(S;Z).
Candidate ConstrainedRefine(Problem p, double budget_nats, Eigen::MatrixXd w,
                            const SolverOptions& options, double* multiplier) {
  p.penalized = true;
  p.budget = budget_nats;
  for (double penalty : {1e1, 1e2, 1e3, 1e4, 1e5, 1e6}) {
    p.penalty = penalty;
    w = Ascend(p, std::move(w), options).w;
  }
  Evaluation e = Evaluate(p, w);
  *multiplier = LeakageWeight(p, e);
  p.penalized = false;
  p.alpha = 0.0;
  e = Evaluate(p, w);
  if (e.isz > budget_nats) {
    const Eigen::MatrixXd flat =
        Eigen::MatrixXd::Constant(w.rows(), w.cols(), 1.0 / w.cols());
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (Evaluate(p, (1.0 - mid) * w + mid * flat).isz > budget_nats) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    w = (1.0 - hi) * w + hi * flat;
    e = Evaluate(p, w);
  }
  return Candidate{std::move(w), e};
}

// Restricted-growth strings enumerate deterministic maps up to relabeling of
// Z, which leaves both informations unchanged.
void EnumerateCanonicalMaps(int x_size, int z_card,
                            std::vector<std::vector<int>>& out) {
  std::vector<int> map(x_size, 0);
  std::vector<int> max_before(x_size, 0);
  while (true) {
    out.push_back(map);
    int i = x_size - 1;
    while (i > 0) {
      const int limit = std::min(max_before[i] + 1, z_card - 1);
      if (map[i] < limit) break;
      --i;
    }
    if (i <= 0) break;
    ++map[i];
    for (int j = i + 1; j < x_size; ++j) {
      map[j] = 0;
      max_before[j] = std::max(max_before[j - 1], map[j - 1]);
    }
  }
}

void CheckCapacity(const JointDistribution& joint, int z_cardinality) {
  if (z_cardinality < 1) throw ValidationError("z_cardinality must be >= 1");
  if (joint.x_size() > kMaxOracleAlphabet ||
      z_cardinality > kMaxOracleAlphabet) {
    std::ostringstream msg;
    msg << "oracle alphabet cap exceeded (|X| = " << joint.x_size()
        << ", |Z| = " << z_cardinality << ", cap " << kMaxOracleAlphabet
        << "); use the variational trainer for larger problems";
    throw CapacityError(msg.str());
  }
}

bool DeterministicSeedingApplies(int x_size, int z_card) {
  double count = std::pow(static_cast<double>(z_card), x_size);
  return count <= static_cast<double>(kMaxDeterministicSeeds);
}

Problem MakeProblem(const JointDistribution& joint, double alpha) {
  Problem p;
  p.joint = joint.table();
  p.px = p.joint.colwise().sum().transpose();
  p.ps = p.joint.rowwise().sum();
  p.alpha = alpha;
  return p;
}

// Starting channels: smoothed deterministic maps when they are few enough,
// otherwise Dirichlet(1) rows. `vertices` receives the unsmoothed maps.
std::vector<Eigen::MatrixXd> StartingChannels(
    int nx, int z_card, const SolverOptions& options,
    std::vector<Eigen::MatrixXd>* vertices) {
  std::vector<Eigen::MatrixXd> seeds;
  if (DeterministicSeedingApplies(nx, z_card)) {
    std::vector<std::vector<int>> maps;
    EnumerateCanonicalMaps(nx, z_card, maps);
    for (const auto& m : maps) {
      const Eigen::MatrixXd vertex = Channel::Deterministic(m, z_card).matrix();
      if (vertices != nullptr) vertices->push_back(vertex);
      Eigen::MatrixXd seed = (1.0 - kSeedSmoothing) * vertex;
      seed.array() += kSeedSmoothing / z_card;
      seeds.push_back(std::move(seed));
    }
  } else {
    std::mt19937_64 rng(options.seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    for (int r = 0; r < options.random_restarts; ++r) {
      Eigen::MatrixXd seed(nx, z_card);
      for (int x = 0; x < nx; ++x) {
        for (int z = 0; z < z_card; ++z) seed(x, z) = gamma(rng) + 1e-12;
        seed.row(x) /= seed.row(x).sum();
      }
      seeds.push_back(std::move(seed));
    }
  }
  return seeds;
}

std::vector<Candidate> SolveAll(const JointDistribution& joint, double alpha,
                                int z_card, const SolverOptions& options) {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  CheckCapacity(joint, z_card);
  const Problem p = MakeProblem(joint, alpha);
  std::vector<Eigen::MatrixXd> vertices;
  auto seeds = StartingChannels(joint.x_size(), z_card, options, &vertices);
  std::vector<Candidate> out;
  for (auto& v : vertices) {
    Evaluation e = Evaluate(p, v);
    out.push_back(Candidate{std::move(v), e});
  }
  for (auto& s : seeds) out.push_back(Ascend(p, std::move(s), options));
  return out;
}

const Candidate& Best(const std::vector<Candidate>& all) {
  return *std::max_element(all.begin(), all.end(),
                           [](const Candidate& a, const Candidate& b) {
                             return a.eval.objective < b.eval.objective;
                           });
}

LagrangianSolution ToSolution(const Candidate& c, double alpha) {
  LagrangianSolution s{Channel(c.w), FromNats(c.eval.ixz),
                       FromNats(c.eval.isz), 0.0};
  s.objective_bits = s.utility.value - alpha * s.leakage.value;
  return s;
}

}  // namespace

Channel::Channel(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() < 1 || matrix_.cols() < 1) {
    throw ValidationError("Channel: empty matrix");
  }
  for (Eigen::Index x = 0; x < matrix_.rows(); ++x) {
    double sum = 0.0;
    for (Eigen::Index z = 0; z < matrix_.cols(); ++z) {
      const double v = matrix_(x, z);
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("Channel: row " + std::to_string(x) +
                              " has an invalid entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      throw ValidationError("Channel: row " + std::to_string(x) +
                            " does not sum to 1");
    }
  }
}

Channel Channel::Identity(int n) {
  return Channel(Eigen::MatrixXd::Identity(n, n));
}

Channel Channel::Constant(int x_size, int z_cardinality) {
  return Channel(Eigen::MatrixXd::Constant(x_size, z_cardinality,
                                           1.0 / z_cardinality));
}

Channel Channel::Deterministic(const std::vector<int>& mapping,
                               int z_cardinality) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(mapping.size()), z_cardinality);
  for (std::size_t x = 0; x < mapping.size(); ++x) {
    if (mapping[x] < 0 || mapping[x] >= z_cardinality) {
      throw ValidationError("Channel::Deterministic: target out of range");
    }
    m(static_cast<Eigen::Index>(x), mapping[x]) = 1.0;
  }
  return Channel(std::move(m));
}

InducedInformations ComputeInducedInformations(const JointDistribution& joint,
                                               const Channel& channel) {
  if (channel.x_size() != joint.x_size()) {
    throw ValidationError("channel has " + std::to_string(channel.x_size()) +
                          " rows but |X| = " + std::to_string(joint.x_size()));
  }
  Problem p;
  p.joint = joint.table();
  p.px = p.joint.colwise().sum().transpose();
  p.ps = p.joint.rowwise().sum();
  const Evaluation e = Evaluate(p, channel.matrix());
  return InducedInformations{FromNats(e.ixz), FromNats(e.isz)};
}

LagrangianSolution SolveLagrangian(const JointDistribution& joint, double alpha,
                                   int z_cardinality,
                                   const SolverOptions& options) {
  const auto all = SolveAll(joint, alpha, z_cardinality, options);
  return ToSolution(Best(all), alpha);
}

std::vector<double> DefaultAlphaGrid() {
  std::vector<double> grid(25);
  for (int i = 0; i < 25; ++i) grid[i] = std::pow(10.0, -2.0 + 4.0 * i / 24.0);
  return grid;
}

double PFCurve::ConcaveEnvelopeAt(double leakage_bits) const {
  std::vector<std::pair<double, double>> pts = achievable;
  pts.emplace_back(0.0, 0.0);
  std::sort(pts.begin(), pts.end());
  // Andrew's monotone chain, upper hull.
  std::vector<std::pair<double, double>> hull;
  for (const auto& pt : pts) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.first - a.first) * (pt.second - a.second) -
                           (b.second - a.second) * (pt.first - a.first);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(pt);
  }
  // Clip to the non-decreasing part: past the peak, extra budget is unused.
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    if (hull[i].first > leakage_bits) {
      if (i == 0) return 0.0;
      const auto& a = hull[i - 1];
      const auto& b = hull[i];
      const double t = (leakage_bits - a.first) / (b.first - a.first);
      return std::max(best, a.second + t * (b.second - a.second));
    }
    best = std::max(best, hull[i].second);
  }
  return best;
}

PFCurve ComputePFCurve(const JointDistribution& joint,
                       const std::vector<double>& budgets, int z_cardinality,
                       const std::vector<double>& alphas,
                       const SolverOptions& options) {
  if (budgets.empty()) throw ValidationError("pf curve: empty budget list");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (!(budgets[i] >= 0.0) || (i > 0 && budgets[i] < budgets[i - 1])) {
      throw ValidationError("pf curve: budgets must be >= 0 and ascending");
    }
  }
  if (alphas.empty()) throw ValidationError("pf curve: empty alpha grid");
  CheckCapacity(joint, z_cardinality);

  struct Pooled {
    Candidate c;
    double alpha;
  };
  std::vector<Pooled> pool;
  // Best solution per solved alpha, keyed by alpha.
  std::vector<std::pair<double, double>> best_leak_by_alpha;
  auto solve = [&](double alpha) {
    auto all = SolveAll(joint, alpha, z_cardinality, options);
    const Candidate& best = Best(all);
    best_leak_by_alpha.emplace_back(alpha, best.eval.isz * kBitsPerNat);
    for (auto& c : all) pool.push_back(Pooled{std::move(c), alpha});
  };

  std::vector<double> grid = alphas;
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (double a : grid) solve(a);
  {
    const Eigen::MatrixXd constant =
        Channel::Constant(joint.x_size(), z_cardinality).matrix();
    pool.push_back(Pooled{Candidate{constant, Evaluation{}}, grid.back()});
  }

  // Bisection on alpha between the last infeasible and first feasible grid
  // solutions for each budget.
  for (double budget : budgets) {
    auto sorted = best_leak_by_alpha;
    std::sort(sorted.begin(), sorted.end());
    double lo = -1.0, hi = -1.0;
    for (const auto& [a, leak] : sorted) {
      if (leak > budget) {
        lo = a;
      } else if (lo >= 0.0) {
        hi = a;
        break;
      }
    }
    if (lo < 0.0 || hi < 0.0) continue;
    for (int i = 0; i < kBisectionSteps; ++i) {
      const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
      solve(mid);
      if (best_leak_by_alpha.back().second > budget) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }

  // Lagrangian solutions only reach the concave hull of the achievable
  // region; refine each budget directly under the constraint.
  {
    const Problem base = MakeProblem(joint, 0.0);
    auto seeds = StartingChannels(joint.x_size(), z_cardinality, options, nullptr);
    for (double budget : budgets) {
      std::vector<Eigen::MatrixXd> starts = seeds;
      const Pooled* best = nullptr;
      for (const auto& p : pool) {
        if (p.c.eval.isz * kBitsPerNat > budget) continue;
        if (best == nullptr || p.c.eval.ixz > best->c.eval.ixz) best = &p;
      }
      if (best != nullptr) starts.push_back(best->c.w);
      for (auto& s : starts) {
        double multiplier = 0.0;
        Candidate c = ConstrainedRefine(base, budget / kBitsPerNat,
                                        std::move(s), options, &multiplier);
        pool.push_back(Pooled{std::move(c), multiplier});
      }
    }
  }

  PFCurve curve;
  curve.achievable.reserve(pool.size());
  for (const auto& p : pool) {
    curve.achievable.emplace_back(p.c.eval.isz * kBitsPerNat,
                                  p.c.eval.ixz * kBitsPerNat);
  }
  for (double budget : budgets) {
    const Pooled* best = nullptr;
    for (const auto& p : pool) {
      if (p.c.eval.isz * kBitsPerNat > budget) continue;
      if (best == nullptr || p.c.eval.ixz > best->c.eval.ixz) best = &p;
    }
    // The constant channel is always in the pool and always feasible.
    curve.points.push_back(PFPoint{Bits{budget}, FromNats(best->c.eval.ixz),
                                   Channel(best->c.w),
                                   FromNats(best->c.eval.isz), best->alpha});
  }
  return curve;
}

}  // namespace dvpf
