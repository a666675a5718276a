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

// Differentiable primitives. Every op computes its forward value eagerly and
// records a closure computing the vector-Jacobian product.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "protospoof/numkernel/tape.hpp"

namespace protospoof {

namespace detail {

// out += a * b
inline void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out += a^T * b
inline void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a.row(p).data();
    const double* brow = b.row(p).data();
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out += a * b^T
inline void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i).data();
    double* orow = out.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      orow[j] += s;
    }
  }
}

inline void softmax_row(std::span<const double> x, std::span<double> y) {
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  for (double& v : y) v /= sum;
}

}  // namespace detail

inline Var matmul(Tape& tape, Var a, Var b) {
  const Tensor2& av = tape.value(a);
  const Tensor2& bv = tape.value(b);
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: " + av.shape() + " x " + bv.shape());
  Tensor2 out(av.rows(), bv.cols());
  detail::gemm_nn(av, bv, out);
  return tape.record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    detail::gemm_nt(g, t.value(b), t.grad(a.id));
    detail::gemm_tn(t.value(a), g, t.grad(b.id));
  });
}

/// x * w + b with b broadcast over rows.
inline Var affine(Tape& tape, Var x, Var w, Var b) {
  const Tensor2& xv = tape.value(x);
  const Tensor2& wv = tape.value(w);
  const Tensor2& bv = tape.value(b);
  if (xv.cols() != wv.rows())
    throw DimensionError("affine: input " + xv.shape() + " incompatible with weight " + wv.shape());
  if (bv.rows() != 1 || bv.cols() != wv.cols())
    throw DimensionError("affine: bias " + bv.shape() + " incompatible with weight " + wv.shape());
  Tensor2 out(xv.rows(), wv.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) std::copy(bv.data().begin(), bv.data().end(), out.row(i).begin());
  detail::gemm_nn(xv, wv, out);
  return tape.record(std::move(out), [x, w, b](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    detail::gemm_nt(g, t.value(w), t.grad(x.id));
    detail::gemm_tn(t.value(x), g, t.grad(w.id));
    Tensor2& gb = t.grad(b.id);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
  });
}

inline Var add(Tape& tape, Var a, Var b) {
  const Tensor2& av = tape.value(a);
  const Tensor2& bv = tape.value(b);
  av.require_same_shape(bv, "add");
  Tensor2 out = av;
  out += bv;
  return tape.record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    t.grad(a.id) += g;
    t.grad(b.id) += g;
  });
}

inline Var scale(Tape& tape, Var x, double factor) {
  Tensor2 out = tape.value(x);
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), [x, factor](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += factor * g.data()[i];
  });
}

inline Var relu(Tape& tape, Var x) {
  Tensor2 out = tape.value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& xv = t.value(x);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv.data()[i] > 0.0) gx.data()[i] += g.data()[i];
  });
}

inline Var transpose(Tape& tape, Var x) {
  const Tensor2& xv = tape.value(x);
  Tensor2 out(xv.cols(), xv.rows());
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out(j, i) = xv(i, j);
  return tape.record(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx(j, i) += g(i, j);
  });
}

/// Row-wise softmax with max subtraction.
inline Var softmax_rows(Tape& tape, Var x) {
  const Tensor2& xv = tape.value(x);
  Tensor2 out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) detail::softmax_row(xv.row(i), out.row(i));
  return tape.record(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

inline Var log_softmax_rows(Tape& tape, Var x) {
  const Tensor2& xv = tape.value(x);
  Tensor2 out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    const auto r = xv.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) = r[j] - lse;
  }
  return tape.record(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) gsum += g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += g(i, j) - std::exp(y(i, j)) * gsum;
    }
  });
}

inline Var slice_cols(Tape& tape, Var x, std::size_t begin, std::size_t count) {
  const Tensor2& xv = tape.value(x);
  if (begin + count > xv.cols())
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                         ") out of range for " + xv.shape());
  Tensor2 out(xv.rows(), count);
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = xv(i, begin + j);
  return tape.record(std::move(out), [x, begin](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, begin + j) += g(i, j);
  });
}

inline Var concat_cols(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = tape.value(parts.front()).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (tape.value(p).rows() != rows)
      throw DimensionError("concat_cols: row count " + tape.value(p).shape() + " vs " + std::to_string(rows));
    cols += tape.value(p).cols();
  }
  Tensor2 out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor2& pv = tape.value(p);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, off + j) = pv(i, j);
    off += pv.cols();
  }
  return tape.record(std::move(out), [parts](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    std::size_t o = 0;
    for (Var p : parts) {
      Tensor2& gp = t.grad(p.id);
      for (std::size_t i = 0; i < gp.rows(); ++i)
        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, o + j);
      o += gp.cols();
    }
  });
}

inline Var concat_rows(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t cols = tape.value(parts.front()).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (tape.value(p).cols() != cols)
      throw DimensionError("concat_rows: column count " + tape.value(p).shape() + " vs " + std::to_string(cols));
    rows += tape.value(p).rows();
  }
  Tensor2 out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor2& pv = tape.value(p);
    std::copy(pv.data().begin(), pv.data().end(), out.row(off).begin());
    off += pv.rows();
  }
  return tape.record(std::move(out), [parts](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    std::size_t o = 0;
    for (Var p : parts) {
      Tensor2& gp = t.grad(p.id);
      for (std::size_t i = 0; i < gp.rows(); ++i)
        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(o + i, j);
      o += gp.rows();
    }
  });
}

inline Var gather_rows(Tape& tape, Var x, std::vector<std::size_t> indices) {
  const Tensor2& xv = tape.value(x);
  for (std::size_t r : indices)
    if (r >= xv.rows()) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range for " + xv.shape());
  Tensor2 out = select_rows(xv, indices);
  return tape.record(std::move(out), [x, idx = std::move(indices)](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx(idx[i], j) += g(i, j);
  });
}

/// Column means as a 1 x cols row.
inline Var mean_rows(Tape& tape, Var x) {
  const Tensor2& xv = tape.value(x);
  if (xv.rows() == 0) throw DimensionError("mean_rows: empty input");
  Tensor2 out(1, xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out(0, j) += xv(i, j);
  const double n = static_cast<double>(xv.rows());
  for (double& v : out.data()) v /= n;
  return tape.record(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad(x.id);
    const double inv = 1.0 / static_cast<double>(gx.rows());
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += g(0, j) * inv;
  });
}

inline double row_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

/// Scales each row to unit Euclidean norm. Rows with norm below `min_norm`
/// are rejected.
inline Var l2_normalize_rows(Tape& tape, Var x, double min_norm = 1e-12) {
  const Tensor2& xv = tape.value(x);
  Tensor2 out = xv;
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    const double n = row_norm(xv.row(i));
    if (!(n >= min_norm)) throw NumericError("l2_normalize_rows: row " + std::to_string(i) + " has norm " + std::to_string(n));
    for (double& v : out.row(i)) v /= n;
  }
  return tape.record(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    const Tensor2& xv = t.value(x);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      const double n = row_norm(xv.row(i));
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += (g(i, j) - y(i, j) * dot) / n;
    }
  });
}

/// out(i, j) = ||a_i - b_j||, or its square when `squared`. The gradient of
/// the plain norm at a coincident pair is taken as zero.
inline Var pairwise_distance(Tape& tape, Var a, Var b, bool squared) {
  const Tensor2& av = tape.value(a);
  const Tensor2& bv = tape.value(b);
  if (av.cols() != bv.cols()) throw DimensionError("pairwise_distance: " + av.shape() + " vs " + bv.shape());
  Tensor2 out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < av.cols(); ++k) {
        const double d = av(i, k) - bv(j, k);
        s += d * d;
      }
      out(i, j) = squared ? s : std::sqrt(s);
    }
  return tape.record(std::move(out), [a, b, squared](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& dist = t.value(self);
    const Tensor2& av = t.value(a);
    const Tensor2& bv = t.value(b);
    Tensor2& ga = t.grad(a.id);
    Tensor2& gb = t.grad(b.id);
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < bv.rows(); ++j) {
        double coef;
        if (squared) {
          coef = 2.0 * g(i, j);
        } else {
          if (dist(i, j) == 0.0) continue;
          coef = g(i, j) / dist(i, j);
        }
        for (std::size_t k = 0; k < av.cols(); ++k) {
          const double d = coef * (av(i, k) - bv(j, k));
          ga(i, k) += d;
          gb(j, k) -= d;
        }
      }
  });
}

/// Negative mean of log_probs(i, targets[i]); a 1 x 1 result.
inline Var nll_mean(Tape& tape, Var log_probs, std::vector<std::size_t> targets) {
  const Tensor2& lp = tape.value(log_probs);
  if (targets.size() != lp.rows() || targets.empty())
    throw DimensionError("nll_mean: " + std::to_string(targets.size()) + " targets for " + lp.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= lp.cols()) throw DimensionError("nll_mean: target class out of range");
    s -= lp(i, targets[i]);
  }
  Tensor2 out(1, 1, s / static_cast<double>(targets.size()));
  return tape.record(std::move(out), [log_probs, tg = std::move(targets)](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    Tensor2& gl = t.grad(log_probs.id);
    const double w = g / static_cast<double>(tg.size());
    for (std::size_t i = 0; i < tg.size(); ++i) gl(i, tg[i]) -= w;
  });
}

inline Var sum_all(Tape& tape, Var x) {
  double s = 0.0;
  for (double v : tape.value(x).data()) s += v;
  return tape.record(Tensor2(1, 1, s), [x](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (double& v : t.grad(x.id).data()) v += g;
  });
}

inline Var sum_squares(Tape& tape, Var x) {
  double s = 0.0;
  for (double v : tape.value(x).data()) s += v * v;
  return tape.record(Tensor2(1, 1, s), [x](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    const Tensor2& xv = t.value(x);
    Tensor2& gx = t.grad(x.id);
    for (std::size_t i = 0; i < xv.size(); ++i) gx.data()[i] += 2.0 * g * xv.data()[i];
  });
}

}  // namespace protospoof
