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
// Synthetic datasets with known information content, the dvpf-emb-1 embedding
// file format, and flat key-value documents.
#ifndef DVPF_DATA_IO_HPP_
#define DVPF_DATA_IO_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dvpf/info_measures.hpp"
#include "dvpf/sample_batch.hpp"

namespace dvpf {

struct DiscreteDataset {
  SampleBatch batch;         // identity = codeword index
  Eigen::MatrixXd codebook;  // |X| x embed_dim
  Bits mutual_information;   // I(S; X) of the joint
};

// Samples (s, x-index) from `joint` and emits codebook[x-index] plus
// N(0, noise_sigma^2) noise. The codebook is drawn N(0, I) from the seed.
DiscreteDataset GenDiscrete(const JointDistribution& joint, int embed_dim,
                            int n, std::uint64_t seed, double noise_sigma = 0.01);
// Same with a caller-chosen codebook (|X| rows).
DiscreteDataset GenDiscrete(const JointDistribution& joint,
                            const Eigen::MatrixXd& codebook, int n,
                            std::uint64_t seed, double noise_sigma = 0.01);

struct MixtureSpec {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::VectorXd> variances;  // diagonal covariances

  int n_classes() const { return static_cast<int>(weights.size()); }
  int d_x() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  // Throws ValidationError.
  void Validate() const;
};

// Optional identity structure inside each class: an identity centroid is
// drawn from N(mean_s, rho diag(cov_s)) and each sample from
// N(centroid, (1 - rho) diag(cov_s)), so the class-conditional law is kept.
struct IdentityOptions {
  int identities_per_class = 0;
  double rho = 0.5;
};

struct MixtureDataset {
  SampleBatch batch;
  std::optional<Bits> mutual_information;  // quadrature, d_x <= 2
};

MixtureDataset GenMixture(const MixtureSpec& spec, int n, std::uint64_t seed,
                          const IdentityOptions& identities = {});

// I(X; S) by tensor-grid quadrature; nullopt for d_x > 2.
std::optional<Bits> MixtureMutualInformation(const MixtureSpec& spec,
                                             int nodes_per_dim = 10000);

// Named synthetic datasets shared by the command line and the acceptance
// suite.
//   mixture:  binary S, unit-variance Gaussians in 8 dimensions with means
//             -2 / +2 on the first coordinate, 20 identities per class.
//   codebook: the 2 x 4 joint of StandardCodebookJoint() on the codewords of
//             StandardCodebook(), sigma 0.01; identity = codeword index.
struct SyntheticDataset {
  SampleBatch batch;
  std::optional<JointDistribution> joint;  // codebook only
  std::optional<Bits> mutual_information;  // I(S; X) when known
};

MixtureSpec StandardMixtureSpec();
JointDistribution StandardCodebookJoint();
// Codewords (-1,-2), (1,-2), (1,2), (-1,2): the pairs {0,1} and {2,3} differ
// only along the first axis, which is also the axis that carries S.
Eigen::MatrixXd StandardCodebook();
// Throws ValidationError for unknown names.
SyntheticDataset MakeSynthetic(std::string_view name, int n, std::uint64_t seed);

// Deterministic split by a seed-derived permutation; both parts keep their
// original relative row order.
std::pair<SampleBatch, SampleBatch> SplitTrainTest(const SampleBatch& batch,
                                                   std::uint64_t seed,
                                                   double train_fraction = 0.8);

inline constexpr std::string_view kEmbeddingFormat = "dvpf-emb-1";

// Header `dvpf-emb-1 n d_x N has_identity`, then `identity s x_0 ... x_{d-1}`
// per row (identity -1 when absent). Doubles use shortest round-trip form.
void WriteEmbeddings(const SampleBatch& batch, std::ostream& out);
// Throws ParseError with the 1-based line number.
SampleBatch ReadEmbeddings(std::istream& in);
void SaveEmbeddings(const SampleBatch& batch, const std::string& path);
SampleBatch LoadEmbeddings(const std::string& path);

// Rows of whitespace-separated probabilities, one row per sensitive value.
// '#' starts a comment.
JointDistribution ReadJoint(std::istream& in);
JointDistribution LoadJoint(const std::string& path);

// `key = value` lines; '#' comments and blank lines are skipped.
std::map<std::string, std::string> ReadKeyValues(std::istream& in);
std::map<std::string, std::string> LoadKeyValues(const std::string& path);
void WriteKeyValues(const std::map<std::string, std::string>& values,
                    std::ostream& out);

// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string FileChecksum(const std::string& path);

}  // namespace dvpf

#endif  // DVPF_DATA_IO_HPP_
