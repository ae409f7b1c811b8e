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
#include "minimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <mutex>

namespace dvpf::internal {
namespace {

struct Context {
  const SmoothObjective* f;
  Eigen::VectorXd x, grad;
};

void Load(const gsl_vector* v, Eigen::VectorXd& out) {
  for (std::size_t i = 0; i < v->size; ++i) out(i) = gsl_vector_get(v, i);
}

double Value(const gsl_vector* v, void* params) {
  auto* c = static_cast<Context*>(params);
  Load(v, c->x);
  return (*c->f)(c->x, c->grad);
}

void Gradient(const gsl_vector* v, void* params, gsl_vector* g) {
  auto* c = static_cast<Context*>(params);
  Load(v, c->x);
  (*c->f)(c->x, c->grad);
  for (Eigen::Index i = 0; i < c->grad.size(); ++i) gsl_vector_set(g, i, c->grad(i));
}

void ValueAndGradient(const gsl_vector* v, void* params, double* f,
                      gsl_vector* g) {
  auto* c = static_cast<Context*>(params);
  Load(v, c->x);
  *f = (*c->f)(c->x, c->grad);
  for (Eigen::Index i = 0; i < c->grad.size(); ++i) gsl_vector_set(g, i, c->grad(i));
}

}  // namespace

Eigen::VectorXd Minimize(const SmoothObjective& f, Eigen::VectorXd x0,
                         int max_iterations, double gradient_tolerance) {
  static std::once_flag quiet;
  std::call_once(quiet, [] { gsl_set_error_handler_off(); });
  const std::size_t n = static_cast<std::size_t>(x0.size());
  Context ctx{&f, Eigen::VectorXd::Zero(x0.size()), Eigen::VectorXd::Zero(x0.size())};
  gsl_multimin_function_fdf fdf{&Value, &Gradient, &ValueAndGradient, n, &ctx};
  gsl_vector* start = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) gsl_vector_set(start, i, x0(i));
  gsl_multimin_fdfminimizer* s =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
  gsl_multimin_fdfminimizer_set(s, &fdf, start, 0.01, 0.1);
  for (int it = 0; it < max_iterations; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(s->gradient, gradient_tolerance) == GSL_SUCCESS) break;
  }
  Load(s->x, x0);
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(start);
  return x0;
}

}  // namespace dvpf::internal
