#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "entlib/common.hpp"
#include "entlib/tensor.hpp"

// Differentiable operations. Every op takes the tape as its first argument;
// passing nullptr runs the forward computation only (inference mode). A node
// is recorded when the tape is present and at least one input requires grad,
// and the output's requires_grad is set accordingly.

namespace entlib {

constexpr real kNllEpsilon = real(1e-12);

namespace detail {

inline bool want_grad(const Tape* tape, bool any_input_grad) {
  return tape != nullptr && any_input_grad;
}

inline void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw DataError(std::string(op) + " produced a non-finite value");
}

}  // namespace detail

// C[m x p] = A[m x n] * B[n x p]; dA += dC * B^T, dB += A^T * dC.
inline Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  }
  const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  Tensor c = Tensor::zeros({m, p});
  {
    const real* av = a.values().data();
    const real* bv = b.values().data();
    real* cv = c.values().data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const real aik = av[i * n + k];
        if (aik == real(0)) continue;
        for (std::size_t j = 0; j < p; ++j) cv[i * p + j] += aik * bv[k * p + j];
      }
    }
  }
  if (detail::want_grad(tape, a.requires_grad() || b.requires_grad())) {
    c.set_requires_grad(true);
    tape->record(c, [a, b, c]() mutable {
      const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
      const auto& gc = c.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        const auto& bv = b.values();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < n; ++k) {
            real acc = 0;
            for (std::size_t j = 0; j < p; ++j) acc += gc[i * p + j] * bv[k * p + j];
            ga[i * n + k] += acc;
          }
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        const auto& av = a.values();
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t i = 0; i < m; ++i) {
            const real aik = av[i * n + k];
            if (aik == real(0)) continue;
            for (std::size_t j = 0; j < p; ++j) gb[k * p + j] += aik * gc[i * p + j];
          }
      }
    });
  }
  return c;
}

// y[m] = W[m x n] * x[n]
inline Tensor matvec(Tape* tape, const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.size()) {
    throw ShapeError("matvec shape mismatch: " + w.shape_string() + " x " + x.shape_string());
  }
  const std::size_t m = w.rows(), n = w.cols();
  Tensor y = Tensor::zeros({m});
  {
    const real* wv = w.values().data();
    const real* xv = x.values().data();
    real* yv = y.values().data();
    for (std::size_t i = 0; i < m; ++i) {
      real acc = 0;
      const real* row = wv + i * n;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * xv[j];
      yv[i] = acc;
    }
  }
  if (detail::want_grad(tape, w.requires_grad() || x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [w, x, y]() mutable {
      const std::size_t m = w.rows(), n = w.cols();
      const auto& gy = y.grad();
      if (w.requires_grad()) {
        auto& gw = w.grad();
        const auto& xv = x.values();
        for (std::size_t i = 0; i < m; ++i) {
          const real gyi = gy[i];
          if (gyi == real(0)) continue;
          real* row = gw.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += gyi * xv[j];
        }
      }
      if (x.requires_grad()) {
        auto& gx = x.grad();
        const auto& wv = w.values();
        for (std::size_t i = 0; i < m; ++i) {
          const real gyi = gy[i];
          if (gyi == real(0)) continue;
          const real* row = wv.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) gx[j] += gyi * row[j];
        }
      }
    });
  }
  return y;
}

// y[n] = x^T W for W[m x n], x[m] (row-vector convention).
inline Tensor vecmat(Tape* tape, const Tensor& x, const Tensor& w) {
  if (w.rank() != 2 || x.rank() != 1 || w.rows() != x.size()) {
    throw ShapeError("vecmat shape mismatch: " + x.shape_string() + " x " + w.shape_string());
  }
  const std::size_t m = w.rows(), n = w.cols();
  Tensor y = Tensor::zeros({n});
  {
    const real* wv = w.values().data();
    const real* xv = x.values().data();
    real* yv = y.values().data();
    for (std::size_t i = 0; i < m; ++i) {
      const real xi = xv[i];
      if (xi == real(0)) continue;
      const real* row_ptr = wv + i * n;
      for (std::size_t j = 0; j < n; ++j) yv[j] += xi * row_ptr[j];
    }
  }
  if (detail::want_grad(tape, w.requires_grad() || x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [w, x, y]() mutable {
      const std::size_t m = w.rows(), n = w.cols();
      const auto& gy = y.grad();
      if (w.requires_grad()) {
        auto& gw = w.grad();
        const auto& xv = x.values();
        for (std::size_t i = 0; i < m; ++i) {
          const real xi = xv[i];
          if (xi == real(0)) continue;
          real* row_ptr = gw.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row_ptr[j] += xi * gy[j];
        }
      }
      if (x.requires_grad()) {
        auto& gx = x.grad();
        const auto& wv = w.values();
        for (std::size_t i = 0; i < m; ++i) {
          const real* row_ptr = wv.data() + i * n;
          real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += row_ptr[j] * gy[j];
          gx[i] += acc;
        }
      }
    });
  }
  return y;
}

inline Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor y = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y.at(i) = a.at(i) + b.at(i);
  if (detail::want_grad(tape, a.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [a, b, y]() mutable {
      const auto& gy = y.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
      }
    });
  }
  return y;
}

// Elementwise product.
inline Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor y = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y.at(i) = a.at(i) * b.at(i);
  if (detail::want_grad(tape, a.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [a, b, y]() mutable {
      const auto& gy = y.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * b.at(i);
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * a.at(i);
      }
    });
  }
  return y;
}

inline Tensor scale(Tape* tape, const Tensor& x, real c) {
  Tensor y = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y.at(i) = c * x.at(i);
  if (detail::want_grad(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [x, y, c]() mutable {
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += c * gy[i];
    });
  }
  return y;
}

inline Tensor concat(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) {
    throw ShapeError("concat expects rank-1 tensors, got " + a.shape_string() + " and " +
                     b.shape_string());
  }
  Tensor y = Tensor::zeros({a.size() + b.size()});
  for (std::size_t i = 0; i < a.size(); ++i) y.at(i) = a.at(i);
  for (std::size_t i = 0; i < b.size(); ++i) y.at(a.size() + i) = b.at(i);
  if (detail::want_grad(tape, a.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [a, b, y]() mutable {
      const auto& gy = y.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < b.size(); ++i) gb[i] += gy[a.size() + i];
      }
    });
  }
  return y;
}

// y = x[lo:hi), rank-1.
inline Tensor slice(Tape* tape, const Tensor& x, std::size_t lo, std::size_t hi) {
  if (x.rank() != 1 || lo > hi || hi > x.size()) {
    throw ShapeError("slice [" + std::to_string(lo) + "," + std::to_string(hi) +
                     ") out of range for " + x.shape_string());
  }
  Tensor y = Tensor::zeros({hi - lo});
  for (std::size_t i = lo; i < hi; ++i) y.at(i - lo) = x.at(i);
  if (detail::want_grad(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [x, y, lo]() mutable {
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[lo + i] += gy[i];
    });
  }
  return y;
}

// Embedding lookup: y = W[idx, :].
inline Tensor row(Tape* tape, const Tensor& w, std::size_t idx) {
  if (w.rank() != 2 || idx >= w.rows()) {
    throw IndexError("row " + std::to_string(idx) + " out of range for " + w.shape_string());
  }
  const std::size_t n = w.cols();
  Tensor y = Tensor::zeros({n});
  for (std::size_t j = 0; j < n; ++j) y.at(j) = w.at(idx, j);
  if (detail::want_grad(tape, w.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [w, y, idx, n]() mutable {
      const auto& gy = y.grad();
      auto& gw = w.grad();
      for (std::size_t j = 0; j < n; ++j) gw[idx * n + j] += gy[j];
    });
  }
  return y;
}

// y = sum over W rows named by indices (speaker-set sum).
inline Tensor rows_sum(Tape* tape, const Tensor& w, const std::vector<int>& indices) {
  if (w.rank() != 2) throw ShapeError("rows_sum expects a matrix, got " + w.shape_string());
  if (indices.empty()) throw DataError("rows_sum requires a non-empty index set");
  const std::size_t n = w.cols();
  Tensor y = Tensor::zeros({n});
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= w.rows()) {
      throw IndexError("rows_sum index " + std::to_string(idx) + " out of range for " +
                       w.shape_string());
    }
    for (std::size_t j = 0; j < n; ++j) y.at(j) += w.at(static_cast<std::size_t>(idx), j);
  }
  if (detail::want_grad(tape, w.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [w, y, indices, n]() mutable {
      const auto& gy = y.grad();
      auto& gw = w.grad();
      for (int idx : indices)
        for (std::size_t j = 0; j < n; ++j) gw[static_cast<std::size_t>(idx) * n + j] += gy[j];
    });
  }
  return y;
}

inline Tensor tanh(Tape* tape, const Tensor& x) {
  Tensor y = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y.at(i) = std::tanh(x.at(i));
  if (detail::want_grad(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [x, y]() mutable {
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * (real(1) - y.at(i) * y.at(i));
    });
  }
  return y;
}

inline Tensor sigmoid(Tape* tape, const Tensor& x) {
  Tensor y = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y.at(i) = real(1) / (real(1) + std::exp(-x.at(i)));
  if (detail::want_grad(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [x, y]() mutable {
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * y.at(i) * (real(1) - y.at(i));
    });
  }
  return y;
}

inline Tensor relu(Tape* tape, const Tensor& x) {
  Tensor y = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y.at(i) = x.at(i) > real(0) ? x.at(i) : real(0);
  if (detail::want_grad(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [x, y]() mutable {
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i)
        if (x.at(i) > real(0)) gx[i] += gy[i];
    });
  }
  return y;
}

// Numerically stable softmax over a rank-1 tensor; outputs are strictly
// positive and sum to 1.
inline Tensor softmax(Tape* tape, const Tensor& v) {
  if (v.rank() != 1 || v.size() == 0) {
    throw ShapeError("softmax expects a non-empty vector, got " + v.shape_string());
  }
  const std::size_t n = v.size();
  Tensor y = Tensor::zeros({n});
  real mx = v.at(0);
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v.at(i));
  real sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y.at(i) = std::exp(v.at(i) - mx);
    sum += y.at(i);
  }
  for (std::size_t i = 0; i < n; ++i) y.at(i) /= sum;
  if (detail::want_grad(tape, v.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [v, y]() mutable {
      const auto& gy = y.grad();
      auto& gv = v.grad();
      real dot = 0;
      for (std::size_t i = 0; i < gy.size(); ++i) dot += gy[i] * y.at(i);
      for (std::size_t i = 0; i < gy.size(); ++i) gv[i] += y.at(i) * (gy[i] - dot);
    });
  }
  return y;
}

// Cosine similarity of a query against every row of E: out[j] in [-1, 1].
// Zero-norm rows or query are rejected; no epsilon is folded into the norms.
inline Tensor cosine_rows(Tape* tape, const Tensor& e_matrix, const Tensor& query) {
  if (e_matrix.rank() != 2 || query.rank() != 1 || e_matrix.cols() != query.size()) {
    throw ShapeError("cosine_rows shape mismatch: " + e_matrix.shape_string() + " vs " +
                     query.shape_string());
  }
  const std::size_t n_rows = e_matrix.rows(), k = e_matrix.cols();
  real qnorm2 = 0;
  for (std::size_t j = 0; j < k; ++j) qnorm2 += query.at(j) * query.at(j);
  const real qnorm = std::sqrt(qnorm2);
  if (qnorm == real(0)) throw DegenerateInputError("cosine_rows: zero-norm query");
  Tensor y = Tensor::zeros({n_rows});
  std::vector<real> row_norms(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    real dot = 0, norm2 = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const real w = e_matrix.at(i, j);
      dot += w * query.at(j);
      norm2 += w * w;
    }
    const real norm = std::sqrt(norm2);
    if (norm == real(0)) {
      throw DegenerateInputError("cosine_rows: zero-norm row " + std::to_string(i));
    }
    row_norms[i] = norm;
    y.at(i) = dot / (norm * qnorm);
  }
  detail::check_finite(y, "cosine_rows");
  if (detail::want_grad(tape, e_matrix.requires_grad() || query.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [e_matrix, query, y, row_norms, qnorm]() mutable {
      const std::size_t n_rows = e_matrix.rows(), k = e_matrix.cols();
      const auto& gy = y.grad();
      // d cos_j / d E_j = q/(|E_j||q|) - cos_j * E_j/|E_j|^2
      // d cos_j / d q  = E_j/(|E_j||q|) - cos_j * q/|q|^2
      for (std::size_t i = 0; i < n_rows; ++i) {
        const real g = gy[i];
        if (g == real(0)) continue;
        const real c = y.at(i);
        const real denom = row_norms[i] * qnorm;
        if (e_matrix.requires_grad()) {
          auto& ge = e_matrix.grad();
          for (std::size_t j = 0; j < k; ++j) {
            ge[i * k + j] += g * (query.at(j) / denom -
                                  c * e_matrix.at(i, j) / (row_norms[i] * row_norms[i]));
          }
        }
        if (query.requires_grad()) {
          auto& gq = query.grad();
          for (std::size_t j = 0; j < k; ++j) {
            gq[j] += g * (e_matrix.at(i, j) / denom - c * query.at(j) / (qnorm * qnorm));
          }
        }
      }
    });
  }
  return y;
}

// Inverted dropout: survivors are scaled by 1/(1-rate) so inference is a
// strict identity (the input tensor is returned unchanged).
inline Tensor dropout(Tape* tape, const Tensor& x, real rate, bool training, Rng& rng) {
  if (!(rate >= real(0) && rate < real(1))) {
    throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
  }
  if (!training || rate == real(0)) return x;
  const real keep_scale = real(1) / (real(1) - rate);
  std::vector<real> mask(x.size());
  Tensor y = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = uniform01(rng) < rate ? real(0) : keep_scale;
    y.at(i) = x.at(i) * mask[i];
  }
  if (detail::want_grad(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [x, y, mask = std::move(mask)]() mutable {
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

// Negative log-likelihood of the gold class under a probability vector,
// floored at kNllEpsilon so an early confident miss does not yield -inf.
inline Tensor nll_loss(Tape* tape, const Tensor& probs, std::size_t gold) {
  if (probs.rank() != 1 || probs.size() == 0) {
    throw ShapeError("nll_loss expects a probability vector, got " + probs.shape_string());
  }
  if (gold >= probs.size()) {
    throw IndexError("nll_loss gold index " + std::to_string(gold) + " out of range [0," +
                     std::to_string(probs.size()) + ")");
  }
  real sum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) sum += probs.at(i);
  if (std::abs(sum - real(1)) > real(1e-6)) {
    throw DataError("nll_loss input does not sum to 1 (sum=" + std::to_string(sum) + ")");
  }
  Tensor y = Tensor::scalar(-std::log(probs.at(gold) + kNllEpsilon));
  if (detail::want_grad(tape, probs.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [probs, y, gold]() mutable {
      probs.grad()[gold] += y.grad()[0] * (-real(1) / (probs.at(gold) + kNllEpsilon));
    });
  }
  return y;
}

inline Tensor sum(Tape* tape, const Tensor& x) {
  real acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.at(i);
  Tensor y = Tensor::scalar(acc);
  if (detail::want_grad(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    tape->record(y, [x, y]() mutable {
      const real g = y.grad()[0];
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

// Arithmetic mean of scalar tensors.
inline Tensor average(Tape* tape, const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw ShapeError("average of zero scalars");
  real acc = 0;
  bool any_grad = false;
  for (const Tensor& t : scalars) {
    acc += t.item();
    any_grad = any_grad || t.requires_grad();
  }
  const real inv = real(1) / static_cast<real>(scalars.size());
  Tensor y = Tensor::scalar(acc * inv);
  if (detail::want_grad(tape, any_grad)) {
    y.set_requires_grad(true);
    tape->record(y, [items = scalars, y, inv]() mutable {
      const real g = y.grad()[0] * inv;
      for (Tensor& t : items)
        if (t.requires_grad()) t.grad()[0] += g;
    });
  }
  return y;
}

}  // namespace entlib
