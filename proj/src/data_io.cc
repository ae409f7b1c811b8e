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
#include "dvpf/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

#include "dvpf/errors.hpp"

namespace dvpf {
namespace {

std::mt19937_64 SeededEngine(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

std::vector<std::string_view> Tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool ParseNumber(std::string_view token, T& value) {
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  return ec == std::errc() && ptr == token.data() + token.size();
}

std::string_view StripComment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

void AppendDouble(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, r.ptr);
}

std::ifstream OpenForRead(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

double LogNormalDiag(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                     const Eigen::VectorXd& var) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double d = x(k) - mean(k);
    acc += -0.5 * (d * d / var(k) + std::log(2.0 * M_PI * var(k)));
  }
  return acc;
}

}  // namespace

DiscreteDataset GenDiscrete(const JointDistribution& joint, int embed_dim, int n,
                            std::uint64_t seed, double noise_sigma) {
  if (embed_dim < 1) throw ValidationError("embed_dim must be >= 1");
  auto rng = SeededEngine(seed, 1);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd codebook(joint.x_size(), embed_dim);
  for (int j = 0; j < embed_dim; ++j)
    for (int i = 0; i < joint.x_size(); ++i) codebook(i, j) = normal(rng);
  return GenDiscrete(joint, codebook, n, seed, noise_sigma);
}

DiscreteDataset GenDiscrete(const JointDistribution& joint,
                            const Eigen::MatrixXd& codebook, int n,
                            std::uint64_t seed, double noise_sigma) {
  if (n < 1) throw ValidationError("n must be >= 1");
  if (codebook.rows() != joint.x_size()) {
    throw ValidationError("codebook needs one row per x value");
  }
  if (!(noise_sigma >= 0.0) || !codebook.allFinite()) {
    throw ValidationError("noise_sigma must be >= 0 and the codebook finite");
  }
  const Eigen::MatrixXd& t = joint.table();
  std::vector<double> cells;
  for (int s = 0; s < t.rows(); ++s)
    for (int x = 0; x < t.cols(); ++x) cells.push_back(t(s, x));
  auto rng = SeededEngine(seed, 2);
  std::discrete_distribution<int> cell(cells.begin(), cells.end());
  std::normal_distribution<double> normal;

  DiscreteDataset d;
  d.codebook = codebook;
  d.mutual_information = MutualInformation(joint);
  SampleBatch& b = d.batch;
  b.n_classes = joint.s_size();
  b.x.resize(n, codebook.cols());
  b.s.resize(n);
  b.identity.emplace(n);
  for (int i = 0; i < n; ++i) {
    const int c = cell(rng);
    b.s[i] = c / joint.x_size();
    (*b.identity)[i] = c % joint.x_size();
    b.x.row(i) = codebook.row((*b.identity)[i]);
    if (noise_sigma > 0.0) {
      for (Eigen::Index k = 0; k < b.x.cols(); ++k) b.x(i, k) += noise_sigma * normal(rng);
    }
  }
  return d;
}

void MixtureSpec::Validate() const {
  if (weights.empty()) throw ValidationError("mixture needs at least one class");
  if (means.size() != weights.size() || variances.size() != weights.size()) {
    throw ValidationError("mixture needs one mean and variance per class");
  }
  const Eigen::Index d = means[0].size();
  if (d < 1) throw ValidationError("mixture dimension must be >= 1");
  double sum = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (!(weights[c] >= 0.0)) throw ValidationError("mixture weights must be >= 0");
    sum += weights[c];
    if (means[c].size() != d || variances[c].size() != d) {
      throw ValidationError("mixture dimensions disagree");
    }
    if (!means[c].allFinite() || !variances[c].allFinite() ||
        (variances[c].array() <= 0.0).any()) {
      throw ValidationError("mixture means must be finite and variances > 0");
    }
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
}

MixtureDataset GenMixture(const MixtureSpec& spec, int n, std::uint64_t seed,
                          const IdentityOptions& identities) {
  spec.Validate();
  if (n < 1) throw ValidationError("n must be >= 1");
  const int k = identities.identities_per_class;
  if (k < 0 || (k > 0 && !(identities.rho >= 0.0 && identities.rho < 1.0))) {
    throw ValidationError("identity options need count >= 0 and rho in [0, 1)");
  }
  auto rng = SeededEngine(seed, 3);
  std::normal_distribution<double> normal;
  std::discrete_distribution<int> cls(spec.weights.begin(), spec.weights.end());
  const int d = spec.d_x();

  // Centroids are drawn before any sample so they do not depend on n.
  std::vector<Eigen::VectorXd> centroids;
  for (int c = 0; c < spec.n_classes() && k > 0; ++c) {
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd m(d);
      for (int t = 0; t < d; ++t) {
        m(t) = spec.means[c](t) +
               std::sqrt(identities.rho * spec.variances[c](t)) * normal(rng);
      }
      centroids.push_back(m);
    }
  }
  std::uniform_int_distribution<int> pick(0, std::max(k - 1, 0));

  MixtureDataset out;
  SampleBatch& b = out.batch;
  b.n_classes = spec.n_classes();
  b.x.resize(n, d);
  b.s.resize(n);
  if (k > 0) b.identity.emplace(n);
  for (int i = 0; i < n; ++i) {
    const int c = cls(rng);
    b.s[i] = c;
    if (k > 0) {
      const int id = c * k + pick(rng);
      (*b.identity)[i] = id;
      for (int t = 0; t < d; ++t) {
        b.x(i, t) = centroids[id](t) +
                    std::sqrt((1.0 - identities.rho) * spec.variances[c](t)) * normal(rng);
      }
    } else {
      for (int t = 0; t < d; ++t) {
        b.x(i, t) = spec.means[c](t) + std::sqrt(spec.variances[c](t)) * normal(rng);
      }
    }
  }
  out.mutual_information = MixtureMutualInformation(spec);
  return out;
}

std::optional<Bits> MixtureMutualInformation(const MixtureSpec& spec,
                                             int nodes_per_dim) {
  spec.Validate();
  const int d = spec.d_x();
  if (d > 2) return std::nullopt;
  if (nodes_per_dim < 2) throw ValidationError("quadrature needs >= 2 nodes");
  // Keep the 2-D grid at a manageable size.
  const int nodes = d == 1 ? nodes_per_dim : std::min(nodes_per_dim, 1000);
  std::vector<double> lo(d), step(d);
  for (int t = 0; t < d; ++t) {
    double a = std::numeric_limits<double>::infinity(), b = -a;
    for (int c = 0; c < spec.n_classes(); ++c) {
      const double sd = std::sqrt(spec.variances[c](t));
      a = std::min(a, spec.means[c](t) - 10.0 * sd);
      b = std::max(b, spec.means[c](t) + 10.0 * sd);
    }
    lo[t] = a;
    step[t] = (b - a) / nodes;
  }
  const long total = d == 1 ? nodes : static_cast<long>(nodes) * nodes;
  const double cell = d == 1 ? step[0] : step[0] * step[1];
  std::vector<double> log_cond(spec.n_classes());
  double acc = 0.0;
  Eigen::VectorXd x(d);
  for (long idx = 0; idx < total; ++idx) {
    x(0) = lo[0] + (static_cast<double>(idx % nodes) + 0.5) * step[0];
    if (d == 2) x(1) = lo[1] + (static_cast<double>(idx / nodes) + 0.5) * step[1];
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < spec.n_classes(); ++c) {
      log_cond[c] = LogNormalDiag(x, spec.means[c], spec.variances[c]);
      if (spec.weights[c] > 0.0) mx = std::max(mx, log_cond[c] + std::log(spec.weights[c]));
    }
    double mix = 0.0;
    for (int c = 0; c < spec.n_classes(); ++c) {
      if (spec.weights[c] > 0.0) mix += std::exp(log_cond[c] + std::log(spec.weights[c]) - mx);
    }
    const double log_marginal = mx + std::log(mix);
    for (int c = 0; c < spec.n_classes(); ++c) {
      if (spec.weights[c] == 0.0) continue;
      const double p = std::exp(log_cond[c]);
      if (p > 0.0) acc += spec.weights[c] * p * (log_cond[c] - log_marginal) * cell;
    }
  }
  return FromNats(std::max(acc, 0.0));
}

MixtureSpec StandardMixtureSpec() {
  constexpr int kDim = 8;
  MixtureSpec spec;
  spec.weights = {0.5, 0.5};
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(kDim), m1 = m0;
  m0(0) = -2.0;
  m1(0) = 2.0;
  spec.means = {m0, m1};
  spec.variances = {Eigen::VectorXd::Ones(kDim), Eigen::VectorXd::Ones(kDim)};
  return spec;
}

JointDistribution StandardCodebookJoint() {
  Eigen::MatrixXd t(2, 4);
  t << 0.2, 0.05, 0.05, 0.2, 0.05, 0.2, 0.2, 0.05;
  return JointDistribution(t);
}

Eigen::MatrixXd StandardCodebook() {
  Eigen::MatrixXd c(4, 2);
  c << -1, -2, 1, -2, 1, 2, -1, 2;
  return c;
}

SyntheticDataset MakeSynthetic(std::string_view name, int n, std::uint64_t seed) {
  SyntheticDataset out;
  if (name == "mixture") {
    MixtureDataset m = GenMixture(StandardMixtureSpec(), n, seed, {20, 0.5});
    out.batch = std::move(m.batch);
    out.mutual_information = m.mutual_information;
  } else if (name == "codebook") {
    const JointDistribution joint = StandardCodebookJoint();
    DiscreteDataset d = GenDiscrete(joint, StandardCodebook(), n, seed);
    out.batch = std::move(d.batch);
    out.mutual_information = d.mutual_information;
    out.joint = joint;
  } else {
    throw ValidationError("unknown synthetic dataset '" + std::string(name) +
                          "' (expected mixture or codebook)");
  }
  return out;
}

std::pair<SampleBatch, SampleBatch> SplitTrainTest(const SampleBatch& batch,
                                                   std::uint64_t seed,
                                                   double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1)");
  }
  const int n = batch.size();
  const int n_train = static_cast<int>(std::lround(train_fraction * n));
  if (n_train < 1 || n_train >= n) throw ValidationError("split leaves an empty part");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = SeededEngine(seed, 4);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> train(perm.begin(), perm.begin() + n_train);
  std::vector<int> test(perm.begin() + n_train, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  SampleBatch a = batch.Rows(train), b = batch.Rows(test);
  a.split = Split::kTrain;
  b.split = Split::kTest;
  return {std::move(a), std::move(b)};
}

void WriteEmbeddings(const SampleBatch& batch, std::ostream& out) {
  batch.Validate();
  const bool has_identity = batch.identity.has_value();
  out << kEmbeddingFormat << ' ' << batch.size() << ' ' << batch.d_x() << ' '
      << batch.n_classes << ' ' << (has_identity ? 1 : 0) << '\n';
  std::string line;
  for (int i = 0; i < batch.size(); ++i) {
    line.clear();
    line += std::to_string(has_identity ? (*batch.identity)[i] : -1);
    line += ' ';
    line += std::to_string(batch.s[i]);
    for (int k = 0; k < batch.d_x(); ++k) {
      line += ' ';
      AppendDouble(line, batch.x(i, k));
    }
    line += '\n';
    out << line;
  }
}

SampleBatch ReadEmbeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", line_no);
  const auto head = Tokens(line);
  long n = 0, d = 0;
  int n_classes = 0, has_identity = 0;
  if (head.size() != 5 || head[0] != kEmbeddingFormat) {
    throw ParseError("header must be 'dvpf-emb-1 n d_x N has_identity'", line_no);
  }
  if (!ParseNumber(head[1], n) || !ParseNumber(head[2], d) ||
      !ParseNumber(head[3], n_classes) || !ParseNumber(head[4], has_identity) ||
      n < 0 || d < 1 || n_classes < 1 || (has_identity != 0 && has_identity != 1)) {
    throw ParseError("malformed header fields", line_no);
  }
  SampleBatch b;
  b.n_classes = n_classes;
  b.x.resize(n, d);
  b.s.resize(n);
  if (has_identity) b.identity.emplace(n);
  for (long i = 0; i < n; ++i) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw ParseError("expected " + std::to_string(n) + " records, found " +
                           std::to_string(i),
                       line_no);
    }
    const auto tok = Tokens(line);
    if (static_cast<long>(tok.size()) != d + 2) {
      throw ParseError("expected " + std::to_string(d + 2) + " fields, found " +
                           std::to_string(tok.size()),
                       line_no);
    }
    int identity = 0, s = 0;
    if (!ParseNumber(tok[0], identity)) throw ParseError("bad identity", line_no);
    if (has_identity ? identity < 0 : identity != -1) {
      throw ParseError("identity out of range", line_no);
    }
    if (!ParseNumber(tok[1], s)) throw ParseError("bad label", line_no);
    if (s < 0 || s >= n_classes) {
      throw ParseError("label " + std::to_string(s) + " outside [0, " +
                           std::to_string(n_classes) + ")",
                       line_no);
    }
    for (long k = 0; k < d; ++k) {
      double v = 0.0;
      if (!ParseNumber(tok[k + 2], v) || !std::isfinite(v)) {
        throw ParseError("bad value in column " + std::to_string(k), line_no);
      }
      b.x(i, k) = v;
    }
    b.s[i] = s;
    if (has_identity) (*b.identity)[i] = identity;
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!Tokens(line).empty()) throw ParseError("records beyond the declared count", line_no);
  }
  return b;
}

void SaveEmbeddings(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  WriteEmbeddings(batch, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

SampleBatch LoadEmbeddings(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadEmbeddings(in);
}

JointDistribution ReadJoint(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = Tokens(StripComment(line));
    if (tok.empty()) continue;
    std::vector<double> row;
    for (auto t : tok) {
      double v = 0.0;
      if (!ParseNumber(t, v)) throw ParseError("bad probability '" + std::string(t) + "'", line_no);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw ParseError("ragged joint row", line_no);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty joint", line_no + 1);
  Eigen::MatrixXd t(rows.size(), rows[0].size());
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t x = 0; x < rows[0].size(); ++x) t(s, x) = rows[s][x];
  return JointDistribution(t);
}

JointDistribution LoadJoint(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadJoint(in);
}

std::map<std::string, std::string> ReadKeyValues(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return std::string(v);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = StripComment(line);
    if (trim(body).empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (out.count(key)) throw ParseError("duplicate key '" + key + "'", line_no);
    out[key] = trim(body.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> LoadKeyValues(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadKeyValues(in);
}

void WriteKeyValues(const std::map<std::string, std::string>& values,
                    std::ostream& out) {
  for (const auto& [k, v] : values) out << k << " = " << v << '\n';
}

std::string FileChecksum(const std::string& path) {
  auto in = OpenForRead(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

}  // namespace dvpf
