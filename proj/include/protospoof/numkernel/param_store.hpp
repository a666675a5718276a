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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protospoof/error.hpp"
#include "protospoof/numkernel/tensor.hpp"

namespace protospoof {

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 first_moment;
  Tensor2 second_moment;
};

/// Named trainable tensors plus their gradient and Adam state. Insertion
/// order is preserved and defines the on-disk order of checkpoints.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor2 init) {
    for (const auto& p : params_)
      if (p.name == name) throw ConfigError("parameter '" + name + "' registered twice");
    const std::size_t r = init.rows(), c = init.cols();
    params_.push_back(Parameter{std::move(name), std::move(init), Tensor2(r, c), Tensor2(r, c), Tensor2(r, c)});
    return ParamId{params_.size() - 1};
  }

  ParamId id(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return ParamId{i};
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }

  bool contains(std::string_view name) const {
    for (const auto& p : params_)
      if (p.name == name) return true;
    return false;
  }

  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }

  Tensor2& value(ParamId id) { return params_.at(id.index).value; }
  const Tensor2& value(ParamId id) const { return params_.at(id.index).value; }

  std::span<Parameter> params() noexcept { return params_; }
  std::span<const Parameter> params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  std::uint64_t step() const noexcept { return step_; }
  void increment_step() noexcept { ++step_; }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  /// Drops optimizer state; values are kept.
  void reset_optimizer() {
    for (auto& p : params_) {
      p.grad.fill(0.0);
      p.first_moment.fill(0.0);
      p.second_moment.fill(0.0);
    }
    step_ = 0;
  }

 private:
  std::vector<Parameter> params_;
  std::uint64_t step_ = 0;
};

}  // namespace protospoof
