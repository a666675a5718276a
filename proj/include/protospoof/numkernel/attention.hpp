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
#include <string>
#include <vector>

#include "protospoof/numkernel/ops.hpp"

namespace protospoof {

/// Tape handles for one self-attention layer. Projection weights are
/// width x width, biases 1 x width.
struct AttentionVars {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Scaled dot-product self-attention over the rows of `z`, split into
/// `heads` heads, concatenated and passed through the output projection.
/// No positional terms: the result is equivariant under row permutations.
inline Var multi_head_self_attention(Tape& tape, Var z, const AttentionVars& p, std::size_t heads) {
  const Tensor2& zv = tape.value(z);
  const std::size_t width = zv.cols();
  if (heads == 0 || width % heads != 0)
    throw ConfigError("attention width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  if (zv.rows() == 0) throw DimensionError("attention over an empty set");
  const std::size_t head_width = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));

  const Var q = affine(tape, z, p.wq, p.bq);
  const Var k = affine(tape, z, p.wk, p.bk);
  const Var v = affine(tape, z, p.wv, p.bv);

  std::vector<Var> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * head_width;
    const Var qh = slice_cols(tape, q, off, head_width);
    const Var kh = slice_cols(tape, k, off, head_width);
    const Var vh = slice_cols(tape, v, off, head_width);
    const Var logits = scale(tape, matmul(tape, qh, transpose(tape, kh)), inv_sqrt);
    const Var weights = softmax_rows(tape, logits);
    head_out.push_back(matmul(tape, weights, vh));
  }
  const Var joined = heads == 1 ? head_out.front() : concat_cols(tape, head_out);
  return affine(tape, joined, p.wo, p.bo);
}

}  // namespace protospoof
