// Copyright 2026 The protospoof Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>

#include "protospoof/error.hpp"
#include "protospoof/numkernel/param_store.hpp"

namespace protospoof {

struct AdamBetas {
  double first = 0.9;
  double second = 0.999;
};

/// One bias-corrected Adam update over every parameter, then gradients are
/// cleared.
inline void adam_step(ParamStore& params, double lr, AdamBetas betas = {}, double eps = 1e-8) {
  params.increment_step();
  const double t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(betas.first, t);
  const double c2 = 1.0 - std::pow(betas.second, t);
  for (Parameter& p : params.params()) {
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = p.first_moment.data();
    auto v = p.second_moment.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = betas.first * m[i] + (1.0 - betas.first) * g[i];
      v[i] = betas.second * v[i] + (1.0 - betas.second) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  params.zero_grad();
}

/// Step decay: base_lr * gamma^floor(epoch / step_size).
inline double step_lr(double base_lr, std::size_t epoch, std::size_t step_size, double gamma) {
  if (step_size == 0) throw ConfigError("step_lr: step_size must be at least 1");
  return base_lr * std::pow(gamma, static_cast<double>(epoch / step_size));
}

}  // namespace protospoof
