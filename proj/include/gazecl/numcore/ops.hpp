#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gazecl/numcore/parallel.hpp"
#include "gazecl/numcore/tensor.hpp"

namespace gazecl::numcore {

using i64 = std::int64_t;

namespace detail {

constexpr i64 kParallelGrain = 1 << 15;

// Elementwise helper: splits flat index space across workers when large.
inline void for_each(i64 n, const std::function<void(i64, i64)>& body) {
  if (n >= kParallelGrain)
    parallel_for(n, body);
  else
    body(0, n);
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op) {
  if (a.shape() != b.shape())
    throw ContractError(std::string(op) + ": shape mismatch " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  const i64 n = a.size();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  detail::for_each(n, [&](i64 lo, i64 hi) {
    for (i64 i = lo; i < hi; ++i) out[i] = pa[i] + pb[i];
  });
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>(
      a.shape(), std::move(out), {a, b}, [an, bn, n](detail::Node<T>& self) {
        const T* g = self.grad.data();
        for (auto& p : {an, bn}) {
          if (!p->requires_grad) continue;
          p->ensure_grad();
          T* pg = p->grad.data();
          detail::for_each(n, [&](i64 lo, i64 hi) {
            for (i64 i = lo; i < hi; ++i) pg[i] += g[i];
          });
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  const i64 n = a.size();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  detail::for_each(n, [&](i64 lo, i64 hi) {
    for (i64 i = lo; i < hi; ++i) out[i] = pa[i] * pb[i];
  });
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>(
      a.shape(), std::move(out), {a, b}, [an, bn, n](detail::Node<T>& self) {
        const T* g = self.grad.data();
        if (an->requires_grad) {
          an->ensure_grad();
          T* pg = an->grad.data();
          const T* other = bn->value.data();
          detail::for_each(n, [&](i64 lo, i64 hi) {
            for (i64 i = lo; i < hi; ++i) pg[i] += g[i] * other[i];
          });
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          T* pg = bn->grad.data();
          const T* other = an->value.data();
          detail::for_each(n, [&](i64 lo, i64 hi) {
            for (i64 i = lo; i < hi; ++i) pg[i] += g[i] * other[i];
          });
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  const i64 n = a.size();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  for (i64 i = 0; i < n; ++i) out[i] = pa[i] * s;
  auto an = a.node();
  return detail::make_result<T>(
      a.shape(), std::move(out), {a}, [an, s, n](detail::Node<T>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const T* g = self.grad.data();
        T* pg = an->grad.data();
        for (i64 i = 0; i < n; ++i) pg[i] += g[i] * s;
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  const i64 n = a.size();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  detail::for_each(n, [&](i64 lo, i64 hi) {
    for (i64 i = lo; i < hi; ++i) out[i] = pa[i] > T(0) ? pa[i] : T(0);
  });
  auto an = a.node();
  return detail::make_result<T>(
      a.shape(), std::move(out), {a}, [an, n](detail::Node<T>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const T* g = self.grad.data();
        const T* x = an->value.data();
        T* pg = an->grad.data();
        detail::for_each(n, [&](i64 lo, i64 hi) {
          for (i64 i = lo; i < hi; ++i)
            if (x[i] > T(0)) pg[i] += g[i];
        });
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  const i64 n = a.size();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  for (i64 i = 0; i < n; ++i)
    out[i] = T(1) / (T(1) + std::exp(-pa[i]));
  auto an = a.node();
  return detail::make_result<T>(
      a.shape(), std::move(out), {a}, [an, n](detail::Node<T>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const T* g = self.grad.data();
        const T* y = self.value.data();
        T* pg = an->grad.data();
        for (i64 i = 0; i < n; ++i) pg[i] += g[i] * y[i] * (T(1) - y[i]);
      });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  const i64 n = a.size();
  if (n == 0) throw ContractError("mean_all: empty tensor");
  T acc = T(0);
  for (T v : a.data()) acc += v;
  auto an = a.node();
  return detail::make_result<T>(
      {}, {acc / static_cast<T>(n)}, {a}, [an, n](detail::Node<T>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const T g = self.grad[0] / static_cast<T>(n);
        for (T& v : an->grad) v += g;
      });
}

// ---------------------------------------------------------------------------
// conv1d_same: dilated 1-D convolution with symmetric zero padding, output
// length equals input length. Accepts [C,T] or [B,C,T].
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv1d_same(const Tensor<T>& input, const Tensor<T>& kernels,
                      const Tensor<T>& bias, i64 dilation = 1) {
  const bool batched = input.rank() == 3;
  if (!batched && input.rank() != 2)
    throw ContractError("conv1d_same: input must be [C,T] or [B,C,T], got " +
                        shape_str(input.shape()));
  if (kernels.rank() != 3)
    throw ContractError("conv1d_same: kernels must be [C_out,C_in,K]");
  const i64 B = batched ? input.dim(0) : 1;
  const i64 Cin = batched ? input.dim(1) : input.dim(0);
  const i64 Tlen = batched ? input.dim(2) : input.dim(1);
  const i64 Cout = kernels.dim(0);
  const i64 K = kernels.dim(2);
  if (kernels.dim(1) != Cin)
    throw ContractError("conv1d_same: input has " + std::to_string(Cin) +
                        " channels but kernels expect " +
                        std::to_string(kernels.dim(1)));
  if (K % 2 == 0) throw ContractError("conv1d_same: kernel size must be odd");
  if (dilation < 1) throw ContractError("conv1d_same: dilation must be >= 1");
  if (Tlen < 1) throw ContractError("conv1d_same: empty time axis");
  if (bias.size() != Cout)
    throw ContractError("conv1d_same: bias length must equal C_out");

  const i64 half = (K - 1) / 2;
  std::vector<T> out(static_cast<std::size_t>(B * Cout * Tlen));
  const T* x = input.data().data();
  const T* w = kernels.data().data();
  const T* bb = bias.data().data();

  // One worker owns each (b, oc) output row; taps accumulate in fixed
  // (ic, k) order so results do not depend on the worker count.
  parallel_for(B * Cout, [&](i64 lo, i64 hi) {
    for (i64 idx = lo; idx < hi; ++idx) {
      const i64 b = idx / Cout, oc = idx % Cout;
      T* orow = out.data() + (b * Cout + oc) * Tlen;
      for (i64 t = 0; t < Tlen; ++t) orow[t] = bb[oc];
      for (i64 ic = 0; ic < Cin; ++ic) {
        const T* xrow = x + (b * Cin + ic) * Tlen;
        const T* wrow = w + (oc * Cin + ic) * K;
        for (i64 k = 0; k < K; ++k) {
          const T a = wrow[k];
          const i64 off = (k - half) * dilation;
          const i64 t0 = std::max<i64>(0, -off);
          const i64 t1 = std::min<i64>(Tlen, Tlen - off);
          for (i64 t = t0; t < t1; ++t) orow[t] += a * xrow[t + off];
        }
      }
    }
  });

  Shape out_shape = batched ? Shape{B, Cout, Tlen} : Shape{Cout, Tlen};
  auto xn = input.node(), wn = kernels.node(), bn = bias.node();
  return detail::make_result<T>(
      std::move(out_shape), std::move(out), {input, kernels, bias},
      [xn, wn, bn, B, Cin, Cout, Tlen, K, half,
       dilation](detail::Node<T>& self) {
        const T* g = self.grad.data();
        if (xn->requires_grad) {
          xn->ensure_grad();
          T* gx = xn->grad.data();
          const T* w = wn->value.data();
          parallel_for(B * Cin, [&](i64 lo, i64 hi) {
            for (i64 idx = lo; idx < hi; ++idx) {
              const i64 b = idx / Cin, ic = idx % Cin;
              T* gxrow = gx + (b * Cin + ic) * Tlen;
              for (i64 oc = 0; oc < Cout; ++oc) {
                const T* grow = g + (b * Cout + oc) * Tlen;
                const T* wrow = w + (oc * Cin + ic) * K;
                for (i64 k = 0; k < K; ++k) {
                  const T a = wrow[k];
                  const i64 off = (k - half) * dilation;
                  const i64 u0 = std::max<i64>(0, off);
                  const i64 u1 = std::min<i64>(Tlen, Tlen + off);
                  for (i64 u = u0; u < u1; ++u) gxrow[u] += a * grow[u - off];
                }
              }
            }
          });
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          T* gw = wn->grad.data();
          const T* x = xn->value.data();
          // Batch-outer order keeps the output-grad row and the sample's
          // input rows cache-hot across all taps.
          parallel_for(Cout, [&](i64 lo, i64 hi) {
            std::vector<T> acc(static_cast<std::size_t>(Cin * K));
            for (i64 oc = lo; oc < hi; ++oc) {
              std::fill(acc.begin(), acc.end(), T(0));
              for (i64 b = 0; b < B; ++b) {
                const T* grow = g + (b * Cout + oc) * Tlen;
                for (i64 ic = 0; ic < Cin; ++ic) {
                  const T* xrow = x + (b * Cin + ic) * Tlen;
                  for (i64 k = 0; k < K; ++k) {
                    const i64 off = (k - half) * dilation;
                    const i64 t0 = std::max<i64>(0, -off);
                    const i64 t1 = std::min<i64>(Tlen, Tlen - off);
                    T s = T(0);
                    for (i64 t = t0; t < t1; ++t) s += xrow[t + off] * grow[t];
                    acc[ic * K + k] += s;
                  }
                }
              }
              for (i64 j = 0; j < Cin * K; ++j) gw[oc * Cin * K + j] += acc[j];
            }
          });
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          T* gb = bn->grad.data();
          parallel_for(Cout, [&](i64 lo, i64 hi) {
            for (i64 oc = lo; oc < hi; ++oc) {
              T acc = T(0);
              for (i64 b = 0; b < B; ++b) {
                const T* grow = g + (b * Cout + oc) * Tlen;
                for (i64 t = 0; t < Tlen; ++t) acc += grow[t];
              }
              gb[oc] += acc;
            }
          });
        }
      });
}

// ---------------------------------------------------------------------------
// batchnorm1d over [B,C,T]: per-channel statistics across batch and time.
// ---------------------------------------------------------------------------

enum class NormMode { Train, Eval };

template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);

  explicit BatchNormState(i64 channels = 0)
      : running_mean(static_cast<std::size_t>(channels), T(0)),
        running_var(static_cast<std::size_t>(channels), T(1)) {}
};

inline constexpr double kBatchNormEps = 1e-5;

template <typename T>
Tensor<T> batchnorm1d(const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, BatchNormState<T>& state,
                      NormMode mode) {
  if (x.rank() != 3)
    throw ContractError("batchnorm1d: input must be [B,C,T], got " +
                        shape_str(x.shape()));
  const i64 B = x.dim(0), C = x.dim(1), Tlen = x.dim(2);
  const i64 M = B * Tlen;
  if (gamma.size() != C || beta.size() != C ||
      static_cast<i64>(state.running_mean.size()) != C)
    throw ContractError("batchnorm1d: parameter width must equal C");
  if (mode == NormMode::Train && M < 2)
    throw ContractError("batchnorm1d: train mode needs B*T >= 2");

  const T eps = static_cast<T>(kBatchNormEps);
  std::vector<T> mean(static_cast<std::size_t>(C));
  std::vector<T> invstd(static_cast<std::size_t>(C));
  const T* px = x.data().data();

  if (mode == NormMode::Train) {
    parallel_for(C, [&](i64 lo, i64 hi) {
      for (i64 c = lo; c < hi; ++c) {
        T s = T(0);
        for (i64 b = 0; b < B; ++b) {
          const T* row = px + (b * C + c) * Tlen;
          for (i64 t = 0; t < Tlen; ++t) s += row[t];
        }
        const T mu = s / static_cast<T>(M);
        T sq = T(0);
        for (i64 b = 0; b < B; ++b) {
          const T* row = px + (b * C + c) * Tlen;
          for (i64 t = 0; t < Tlen; ++t) {
            const T d = row[t] - mu;
            sq += d * d;
          }
        }
        const T var = sq / static_cast<T>(M);
        mean[c] = mu;
        invstd[c] = T(1) / std::sqrt(var + eps);
        const T unbiased = sq / static_cast<T>(M - 1);
        state.running_mean[c] =
            (T(1) - state.momentum) * state.running_mean[c] + state.momentum * mu;
        state.running_var[c] =
            (T(1) - state.momentum) * state.running_var[c] +
            state.momentum * unbiased;
      }
    });
  } else {
    for (i64 c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      invstd[c] = T(1) / std::sqrt(state.running_var[c] + eps);
    }
  }

  std::vector<T> out(static_cast<std::size_t>(B * C * Tlen));
  const T* pg = gamma.data().data();
  const T* pb = beta.data().data();
  detail::for_each(B * C, [&](i64 lo, i64 hi) {
    for (i64 idx = lo; idx < hi; ++idx) {
      const i64 c = idx % C;
      const T* row = px + idx * Tlen;
      T* orow = out.data() + idx * Tlen;
      const T a = pg[c] * invstd[c];
      const T o = pb[c] - a * mean[c];
      for (i64 t = 0; t < Tlen; ++t) orow[t] = a * row[t] + o;
    }
  });

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  const bool train = mode == NormMode::Train;
  return detail::make_result<T>(
      x.shape(), std::move(out), {x, gamma, beta},
      [xn, gn, bn, B, C, Tlen, M, mean = std::move(mean),
       invstd = std::move(invstd), train](detail::Node<T>& self) {
        const T* g = self.grad.data();
        const T* px = xn->value.data();
        const T* pgamma = gn->value.data();
        if (xn->requires_grad) xn->ensure_grad();
        if (gn->requires_grad) gn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        parallel_for(C, [&](i64 lo, i64 hi) {
          for (i64 c = lo; c < hi; ++c) {
            T s1 = T(0), s2 = T(0);
            for (i64 b = 0; b < B; ++b) {
              const T* grow = g + (b * C + c) * Tlen;
              const T* xrow = px + (b * C + c) * Tlen;
              for (i64 t = 0; t < Tlen; ++t) {
                s1 += grow[t];
                s2 += grow[t] * (xrow[t] - mean[c]) * invstd[c];
              }
            }
            if (gn->requires_grad) gn->grad[c] += s2;
            if (bn->requires_grad) bn->grad[c] += s1;
            if (xn->requires_grad) {
              T* gx = xn->grad.data();
              const T a = pgamma[c] * invstd[c];
              if (train) {
                const T m1 = s1 / static_cast<T>(M);
                const T m2 = s2 / static_cast<T>(M);
                for (i64 b = 0; b < B; ++b) {
                  const T* grow = g + (b * C + c) * Tlen;
                  const T* xrow = px + (b * C + c) * Tlen;
                  T* gxrow = gx + (b * C + c) * Tlen;
                  for (i64 t = 0; t < Tlen; ++t) {
                    const T xh = (xrow[t] - mean[c]) * invstd[c];
                    gxrow[t] += a * (grow[t] - m1 - xh * m2);
                  }
                }
              } else {
                for (i64 b = 0; b < B; ++b) {
                  const T* grow = g + (b * C + c) * Tlen;
                  T* gxrow = gx + (b * C + c) * Tlen;
                  for (i64 t = 0; t < Tlen; ++t) gxrow[t] += a * grow[t];
                }
              }
            }
          }
        });
      });
}

// ---------------------------------------------------------------------------
// global average pooling over the time axis: [C,T] -> [C], [B,C,T] -> [B,C]
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const bool batched = x.rank() == 3;
  if (!batched && x.rank() != 2)
    throw ContractError("global_avg_pool: input must be [C,T] or [B,C,T]");
  const i64 rows = batched ? x.dim(0) * x.dim(1) : x.dim(0);
  const i64 Tlen = batched ? x.dim(2) : x.dim(1);
  if (Tlen < 1) throw ContractError("global_avg_pool: empty time axis");

  std::vector<T> out(static_cast<std::size_t>(rows));
  const T* px = x.data().data();
  detail::for_each(rows, [&](i64 lo, i64 hi) {
    for (i64 r = lo; r < hi; ++r) {
      T s = T(0);
      const T* row = px + r * Tlen;
      for (i64 t = 0; t < Tlen; ++t) s += row[t];
      out[r] = s / static_cast<T>(Tlen);
    }
  });

  Shape out_shape = batched ? Shape{x.dim(0), x.dim(1)} : Shape{x.dim(0)};
  auto xn = x.node();
  return detail::make_result<T>(
      std::move(out_shape), std::move(out), {x},
      [xn, rows, Tlen](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T* g = self.grad.data();
        T* gx = xn->grad.data();
        detail::for_each(rows, [&](i64 lo, i64 hi) {
          for (i64 r = lo; r < hi; ++r) {
            const T gr = g[r] / static_cast<T>(Tlen);
            T* row = gx + r * Tlen;
            for (i64 t = 0; t < Tlen; ++t) row[t] += gr;
          }
        });
      });
}

// ---------------------------------------------------------------------------
// channel_scale: y[b,c,t] = x[b,c,t] * s[b,c]   ([C,T] * [C] unbatched)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& s) {
  const bool batched = x.rank() == 3;
  if (!batched && x.rank() != 2)
    throw ContractError("channel_scale: input must be [C,T] or [B,C,T]");
  const i64 rows = batched ? x.dim(0) * x.dim(1) : x.dim(0);
  const i64 Tlen = batched ? x.dim(2) : x.dim(1);
  if (s.size() != rows)
    throw ContractError("channel_scale: scale shape " + shape_str(s.shape()) +
                        " does not match input " + shape_str(x.shape()));

  std::vector<T> out(static_cast<std::size_t>(rows * Tlen));
  const T* px = x.data().data();
  const T* ps = s.data().data();
  detail::for_each(rows, [&](i64 lo, i64 hi) {
    for (i64 r = lo; r < hi; ++r) {
      const T a = ps[r];
      const T* row = px + r * Tlen;
      T* orow = out.data() + r * Tlen;
      for (i64 t = 0; t < Tlen; ++t) orow[t] = a * row[t];
    }
  });

  auto xn = x.node(), sn = s.node();
  return detail::make_result<T>(
      x.shape(), std::move(out), {x, s},
      [xn, sn, rows, Tlen](detail::Node<T>& self) {
        const T* g = self.grad.data();
        if (xn->requires_grad) {
          xn->ensure_grad();
          T* gx = xn->grad.data();
          const T* ps = sn->value.data();
          detail::for_each(rows, [&](i64 lo, i64 hi) {
            for (i64 r = lo; r < hi; ++r) {
              const T a = ps[r];
              const T* grow = g + r * Tlen;
              T* gxrow = gx + r * Tlen;
              for (i64 t = 0; t < Tlen; ++t) gxrow[t] += a * grow[t];
            }
          });
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          T* gs = sn->grad.data();
          const T* px = xn->value.data();
          detail::for_each(rows, [&](i64 lo, i64 hi) {
            for (i64 r = lo; r < hi; ++r) {
              const T* grow = g + r * Tlen;
              const T* xrow = px + r * Tlen;
              T acc = T(0);
              for (i64 t = 0; t < Tlen; ++t) acc += grow[t] * xrow[t];
              gs[r] += acc;
            }
          });
        }
      });
}

// ---------------------------------------------------------------------------
// linear: y = W x + b, batched over rows. x: [B,F_in] or [F_in].
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const bool batched = x.rank() == 2;
  if (!batched && x.rank() != 1)
    throw ContractError("linear: input must be [F] or [B,F]");
  if (w.rank() != 2) throw ContractError("linear: weights must be [F_out,F_in]");
  const i64 B = batched ? x.dim(0) : 1;
  const i64 Fin = batched ? x.dim(1) : x.dim(0);
  const i64 Fout = w.dim(0);
  if (w.dim(1) != Fin)
    throw ContractError("linear: input width " + std::to_string(Fin) +
                        " does not match weights " + shape_str(w.shape()));
  if (b.size() != Fout) throw ContractError("linear: bias length mismatch");

  std::vector<T> out(static_cast<std::size_t>(B * Fout));
  const T* px = x.data().data();
  const T* pw = w.data().data();
  const T* pb = b.data().data();
  detail::for_each(B, [&](i64 lo, i64 hi) {
    for (i64 r = lo; r < hi; ++r) {
      const T* xrow = px + r * Fin;
      T* orow = out.data() + r * Fout;
      for (i64 o = 0; o < Fout; ++o) {
        const T* wrow = pw + o * Fin;
        T acc = pb[o];
        for (i64 i = 0; i < Fin; ++i) acc += wrow[i] * xrow[i];
        orow[o] = acc;
      }
    }
  });

  Shape out_shape = batched ? Shape{B, Fout} : Shape{Fout};
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return detail::make_result<T>(
      std::move(out_shape), std::move(out), {x, w, b},
      [xn, wn, bn, B, Fin, Fout](detail::Node<T>& self) {
        const T* g = self.grad.data();
        if (xn->requires_grad) {
          xn->ensure_grad();
          T* gx = xn->grad.data();
          const T* pw = wn->value.data();
          detail::for_each(B, [&](i64 lo, i64 hi) {
            for (i64 r = lo; r < hi; ++r) {
              const T* grow = g + r * Fout;
              T* gxrow = gx + r * Fin;
              for (i64 o = 0; o < Fout; ++o) {
                const T a = grow[o];
                const T* wrow = pw + o * Fin;
                for (i64 i = 0; i < Fin; ++i) gxrow[i] += a * wrow[i];
              }
            }
          });
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          T* gw = wn->grad.data();
          const T* px = xn->value.data();
          detail::for_each(Fout, [&](i64 lo, i64 hi) {
            for (i64 o = lo; o < hi; ++o) {
              T* gwrow = gw + o * Fin;
              for (i64 r = 0; r < B; ++r) {
                const T a = g[r * Fout + o];
                const T* xrow = px + r * Fin;
                for (i64 i = 0; i < Fin; ++i) gwrow[i] += a * xrow[i];
              }
            }
          });
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          T* gb = bn->grad.data();
          for (i64 r = 0; r < B; ++r)
            for (i64 o = 0; o < Fout; ++o) gb[o] += g[r * Fout + o];
        }
      });
}

// ---------------------------------------------------------------------------
// row_l2_normalize: y[r,:] = x[r,:] / ||x[r,:]||. Rows with norm below
// min_norm are rejected (degenerate embeddings).
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> row_l2_normalize(const Tensor<T>& x, double min_norm = 1e-12) {
  if (x.rank() != 2) throw ContractError("row_l2_normalize: input must be [R,C]");
  const i64 R = x.dim(0), C = x.dim(1);
  std::vector<T> out(static_cast<std::size_t>(R * C));
  std::vector<T> norms(static_cast<std::size_t>(R));
  const T* px = x.data().data();
  for (i64 r = 0; r < R; ++r) {
    const T* row = px + r * C;
    T sq = T(0);
    for (i64 c = 0; c < C; ++c) sq += row[c] * row[c];
    const T n = std::sqrt(sq);
    if (static_cast<double>(n) < min_norm)
      throw NumericError("row_l2_normalize: row " + std::to_string(r) +
                         " has near-zero norm (degenerate embedding)");
    norms[r] = n;
    T* orow = out.data() + r * C;
    for (i64 c = 0; c < C; ++c) orow[c] = row[c] / n;
  }
  auto xn = x.node();
  return detail::make_result<T>(
      x.shape(), std::move(out), {x},
      [xn, R, C, norms = std::move(norms)](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T* g = self.grad.data();
        const T* y = self.value.data();
        T* gx = xn->grad.data();
        for (i64 r = 0; r < R; ++r) {
          const T* grow = g + r * C;
          const T* yrow = y + r * C;
          T dot = T(0);
          for (i64 c = 0; c < C; ++c) dot += grow[c] * yrow[c];
          T* gxrow = gx + r * C;
          for (i64 c = 0; c < C; ++c)
            gxrow[c] += (grow[c] - dot * yrow[c]) / norms[r];
        }
      });
}

// ---------------------------------------------------------------------------
// matmul_nt: C = A * B^T with A [R,K], B [S,K].
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ContractError("matmul_nt: both inputs must be rank 2");
  const i64 R = a.dim(0), K = a.dim(1), S = b.dim(0);
  if (b.dim(1) != K)
    throw ContractError("matmul_nt: inner dimensions differ: " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(static_cast<std::size_t>(R * S));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  detail::for_each(R, [&](i64 lo, i64 hi) {
    for (i64 r = lo; r < hi; ++r) {
      const T* arow = pa + r * K;
      T* orow = out.data() + r * S;
      for (i64 s = 0; s < S; ++s) {
        const T* brow = pb + s * K;
        T acc = T(0);
        for (i64 k = 0; k < K; ++k) acc += arow[k] * brow[k];
        orow[s] = acc;
      }
    }
  });
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>(
      Shape{R, S}, std::move(out), {a, b},
      [an, bn, R, K, S](detail::Node<T>& self) {
        const T* g = self.grad.data();
        if (an->requires_grad) {
          an->ensure_grad();
          T* ga = an->grad.data();
          const T* pb = bn->value.data();
          for (i64 r = 0; r < R; ++r) {
            T* garow = ga + r * K;
            const T* grow = g + r * S;
            for (i64 s = 0; s < S; ++s) {
              const T w = grow[s];
              const T* brow = pb + s * K;
              for (i64 k = 0; k < K; ++k) garow[k] += w * brow[k];
            }
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          T* gb = bn->grad.data();
          const T* pa = an->value.data();
          for (i64 s = 0; s < S; ++s) {
            T* gbrow = gb + s * K;
            for (i64 r = 0; r < R; ++r) {
              const T w = g[r * S + s];
              const T* arow = pa + r * K;
              for (i64 k = 0; k < K; ++k) gbrow[k] += w * arow[k];
            }
          }
        }
      });
}

}  // namespace gazecl::numcore
