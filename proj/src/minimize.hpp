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
// Smooth unconstrained minimization for the attack classifiers.
#ifndef DVPF_SRC_MINIMIZE_HPP_
#define DVPF_SRC_MINIMIZE_HPP_

#include <functional>

#include <Eigen/Dense>

namespace dvpf::internal {

// Returns f(x) and writes its gradient.
using SmoothObjective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// Quasi-Newton descent from x0 until the gradient norm drops below
// `gradient_tolerance` or `max_iterations` is reached.
Eigen::VectorXd Minimize(const SmoothObjective& f, Eigen::VectorXd x0,
                         int max_iterations = 500,
                         double gradient_tolerance = 1e-6);

}  // namespace dvpf::internal

#endif  // DVPF_SRC_MINIMIZE_HPP_
