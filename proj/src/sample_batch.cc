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
#include "dvpf/sample_batch.hpp"

#include <string>

#include "dvpf/errors.hpp"

namespace dvpf {

void SampleBatch::Validate() const {
  if (n_classes < 1) throw ValidationError("n_classes must be >= 1");
  if (static_cast<int>(s.size()) != size()) {
    throw ValidationError("labels (" + std::to_string(s.size()) +
                          ") and rows (" + std::to_string(size()) + ") disagree");
  }
  if (identity && static_cast<int>(identity->size()) != size()) {
    throw ValidationError("identities and rows disagree");
  }
  for (int i = 0; i < size(); ++i) {
    if (s[i] < 0 || s[i] >= n_classes) {
      throw ValidationError("label " + std::to_string(s[i]) + " at row " +
                            std::to_string(i) + " outside [0, " +
                            std::to_string(n_classes) + ")");
    }
    if (identity && (*identity)[i] < 0) {
      throw ValidationError("negative identity at row " + std::to_string(i));
    }
  }
  if (!x.allFinite()) throw ValidationError("non-finite feature value");
}

SampleBatch SampleBatch::Rows(std::span<const int> indices) const {
  SampleBatch out;
  out.n_classes = n_classes;
  out.split = split;
  out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
  out.s.reserve(indices.size());
  if (identity) out.identity.emplace();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= size()) throw ValidationError("row index out of range");
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(i);
    out.s.push_back(s[i]);
    if (identity) out.identity->push_back((*identity)[i]);
  }
  return out;
}

std::string_view SplitName(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

}  // namespace dvpf
