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
// Paired records (x, s, optional identity) consumed by training and audits.
#ifndef DVPF_SAMPLE_BATCH_HPP_
#define DVPF_SAMPLE_BATCH_HPP_

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dvpf {

enum class Split { kTrain, kTest };

struct SampleBatch {
  Eigen::MatrixXd x;  // n x d_x
  std::vector<int> s;
  std::optional<std::vector<int>> identity;
  int n_classes = 2;
  Split split = Split::kTrain;

  int size() const { return static_cast<int>(x.rows()); }
  int d_x() const { return static_cast<int>(x.cols()); }

  // Throws ValidationError on row-count disagreement, out-of-range labels,
  // negative identities, or non-finite entries.
  void Validate() const;

  // Rows in the given order; identities follow when present.
  SampleBatch Rows(std::span<const int> indices) const;
};

std::string_view SplitName(Split split);

}  // namespace dvpf

#endif  // DVPF_SAMPLE_BATCH_HPP_
