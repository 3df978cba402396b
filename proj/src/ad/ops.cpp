#include "mapfusion/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "mapfusion/parallel.hpp"

namespace mapfusion::ad {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstStrided = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using Strided = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;

// Column tile of the shifted-GEMM convolutions. Fixed, so the floating-point
// reduction order never depends on the worker count.
constexpr std::int64_t kTile = 4096;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// out_full[co, j] = sum_{kh,kw} weights[kh*k+kw] (Cout x Cin) * in[ci, j + kh*row + kw]
// for j in [0, out_rows * row). `in` holds Cin channels, `channel_stride`
// elements apart; each channel must carry k-1 readable slack elements.
template <typename T>
void shifted_correlate(const T* in, std::int64_t cin, std::int64_t channel_stride, std::int64_t row, int k,
                       const std::vector<Mat<T>>& weights, std::int64_t out_rows, T* out_full) {
  const std::int64_t cout = weights.front().rows();
  const std::int64_t cols = out_rows * row;
  const std::int64_t tiles = (cols + kTile - 1) / kTile;
  parallel_for(static_cast<std::size_t>(tiles), [&](std::size_t t) {
    const std::int64_t j0 = static_cast<std::int64_t>(t) * kTile;
    const std::int64_t n = std::min(kTile, cols - j0);
    Strided<T> out(out_full + j0, cout, n, Eigen::OuterStride<>(cols));
    out.setZero();
    for (int kh = 0; kh < k; ++kh)
      for (int kw = 0; kw < k; ++kw) {
        ConstStrided<T> src(in + j0 + kh * row + kw, cin, n, Eigen::OuterStride<>(channel_stride));
        out.noalias() += weights[kh * k + kw] * src;
      }
  });
}

template <typename T>
struct ConvGeometry {
  std::int64_t n, cin, h, w, cout, k, pad, stride, ho, wo, hp, wp;
};

template <typename T>
std::vector<T> pad_input(const T* x, const ConvGeometry<T>& g, std::int64_t channel_stride) {
  std::vector<T> xp(static_cast<std::size_t>(g.cin * channel_stride), T(0));
  for (std::int64_t c = 0; c < g.cin; ++c)
    for (std::int64_t r = 0; r < g.h; ++r)
      std::copy_n(x + (c * g.h + r) * g.w, g.w, xp.data() + c * channel_stride + (r + g.pad) * g.wp + g.pad);
  return xp;
}

template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, const ConvGeometry<T>& g) {
  const auto& xv = x.values();
  const auto& wv = kernel.values();
  std::vector<T> out(static_cast<std::size_t>(g.n * g.cout * g.ho * g.wo), T(0));
  auto xat = [&](std::int64_t n, std::int64_t c, std::int64_t r, std::int64_t q) -> T {
    if (r < 0 || r >= g.h || q < 0 || q >= g.w) return T(0);
    return xv[((n * g.cin + c) * g.h + r) * g.w + q];
  };
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t co = 0; co < g.cout; ++co)
      for (std::int64_t r = 0; r < g.ho; ++r)
        for (std::int64_t q = 0; q < g.wo; ++q) {
          T acc = bias.defined() ? bias.values()[co] : T(0);
          for (std::int64_t ci = 0; ci < g.cin; ++ci)
            for (std::int64_t kh = 0; kh < g.k; ++kh)
              for (std::int64_t kw = 0; kw < g.k; ++kw)
                acc += wv[((co * g.cin + ci) * g.k + kh) * g.k + kw] *
                       xat(n, ci, r * g.stride + kh - g.pad, q * g.stride + kw - g.pad);
          out[((n * g.cout + co) * g.ho + r) * g.wo + q] = acc;
        }
  std::vector<Tensor<T>> parents{x, kernel};
  if (bias.defined()) parents.push_back(bias);
  return Tensor<T>::make_result(
      {g.n, g.cout, g.ho, g.wo}, std::move(out), parents, [g, has_bias = bias.defined()](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        auto& K = *self.parents[1];
        const auto& gy = self.grad;
        for (std::int64_t n = 0; n < g.n; ++n)
          for (std::int64_t co = 0; co < g.cout; ++co)
            for (std::int64_t r = 0; r < g.ho; ++r)
              for (std::int64_t q = 0; q < g.wo; ++q) {
                const T d = gy[((n * g.cout + co) * g.ho + r) * g.wo + q];
                if (has_bias && self.parents[2]->requires_grad) self.parents[2]->ensure_grad()[co] += d;
                for (std::int64_t ci = 0; ci < g.cin; ++ci)
                  for (std::int64_t kh = 0; kh < g.k; ++kh)
                    for (std::int64_t kw = 0; kw < g.k; ++kw) {
                      const std::int64_t rr = r * g.stride + kh - g.pad, qq = q * g.stride + kw - g.pad;
                      if (rr < 0 || rr >= g.h || qq < 0 || qq >= g.w) continue;
                      const std::size_t xi = ((n * g.cin + ci) * g.h + rr) * g.w + qq;
                      const std::size_t wi = ((co * g.cin + ci) * g.k + kh) * g.k + kw;
                      if (K.requires_grad) K.ensure_grad()[wi] += d * X.value[xi];
                      if (X.requires_grad) X.ensure_grad()[xi] += d * K.value[wi];
                    }
              }
      });
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, Conv2dOptions opt) {
  require(x.defined() && x.rank() == 4, "conv2d: input must be [N, C, H, W]");
  require(kernel.defined() && kernel.rank() == 4, "conv2d: kernel must be [Cout, Cin, k, k]");
  require(kernel.dim(2) == kernel.dim(3), "conv2d: kernel must be square, got " + shape_str(kernel.shape()));
  require(kernel.dim(1) == x.dim(1), "conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                                         " input channels but input has shape " + shape_str(x.shape()));
  if (bias.defined())
    require(bias.rank() == 1 && bias.dim(0) == kernel.dim(0),
            "conv2d: bias shape " + shape_str(bias.shape()) + " does not match kernel " + shape_str(kernel.shape()));
  require(opt.stride >= 1 && opt.padding >= 0, "conv2d: invalid stride/padding");

  ConvGeometry<T> g{};
  g.n = x.dim(0), g.cin = x.dim(1), g.h = x.dim(2), g.w = x.dim(3);
  g.cout = kernel.dim(0), g.k = kernel.dim(2), g.pad = opt.padding, g.stride = opt.stride;
  g.hp = g.h + 2 * g.pad, g.wp = g.w + 2 * g.pad;
  require(g.hp >= g.k && g.wp >= g.k, "conv2d: kernel larger than padded input");
  g.ho = (g.hp - g.k) / g.stride + 1, g.wo = (g.wp - g.k) / g.stride + 1;
  if (g.stride != 1) return conv2d_naive(x, kernel, bias, g);

  const int k = static_cast<int>(g.k);
  const std::int64_t cs = g.hp * g.wp + g.k;  // channel stride with slack
  std::vector<Mat<T>> wk(static_cast<std::size_t>(g.k * g.k), Mat<T>(g.cout, g.cin));
  const auto& wv = kernel.values();
  for (std::int64_t co = 0; co < g.cout; ++co)
    for (std::int64_t ci = 0; ci < g.cin; ++ci)
      for (std::int64_t t = 0; t < g.k * g.k; ++t) wk[t](co, ci) = wv[(co * g.cin + ci) * g.k * g.k + t];

  const std::int64_t full_cols = g.ho * g.wp;
  std::vector<T> out(static_cast<std::size_t>(g.n * g.cout * g.ho * g.wo));
  std::vector<T> full(static_cast<std::size_t>(g.cout * full_cols));
  for (std::int64_t n = 0; n < g.n; ++n) {
    const std::vector<T> xp = pad_input(x.values().data() + n * g.cin * g.h * g.w, g, cs);
    shifted_correlate(xp.data(), g.cin, cs, g.wp, k, wk, g.ho, full.data());
    for (std::int64_t co = 0; co < g.cout; ++co) {
      const T b = bias.defined() ? bias.values()[co] : T(0);
      for (std::int64_t r = 0; r < g.ho; ++r) {
        const T* src = full.data() + co * full_cols + r * g.wp;
        T* dst = out.data() + ((n * g.cout + co) * g.ho + r) * g.wo;
        for (std::int64_t q = 0; q < g.wo; ++q) dst[q] = src[q] + b;
      }
    }
  }

  std::vector<Tensor<T>> parents{x, kernel};
  if (bias.defined()) parents.push_back(bias);
  return Tensor<T>::make_result(
      {g.n, g.cout, g.ho, g.wo}, std::move(out), parents,
      [g, k, cs, wk = std::move(wk), has_bias = bias.defined()](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        auto& K = *self.parents[1];
        const auto& gy = self.grad;
        const std::int64_t full_cols = g.ho * g.wp;
        const std::int64_t kk = g.k * g.k;

        if (has_bias && self.parents[2]->requires_grad) {
          auto& db = self.parents[2]->ensure_grad();
          for (std::int64_t n = 0; n < g.n; ++n)
            for (std::int64_t co = 0; co < g.cout; ++co) {
              const T* p = gy.data() + (n * g.cout + co) * g.ho * g.wo;
              T acc = T(0);
              for (std::int64_t i = 0; i < g.ho * g.wo; ++i) acc += p[i];
              db[co] += acc;
            }
        }

        // Output gradient laid out on the padded row pitch, zero in the
        // columns past Wo so they contribute nothing.
        std::vector<T> gfull(static_cast<std::size_t>(g.cout * full_cols));
        for (std::int64_t n = 0; n < g.n; ++n) {
          std::fill(gfull.begin(), gfull.end(), T(0));
          for (std::int64_t co = 0; co < g.cout; ++co)
            for (std::int64_t r = 0; r < g.ho; ++r)
              std::copy_n(gy.data() + ((n * g.cout + co) * g.ho + r) * g.wo, g.wo,
                          gfull.data() + co * full_cols + r * g.wp);

          if (K.requires_grad) {
            const std::vector<T> xp = pad_input(X.value.data() + n * g.cin * g.h * g.w, g, cs);
            const std::int64_t tiles = (full_cols + kTile - 1) / kTile;
            std::vector<Mat<T>> partial(static_cast<std::size_t>(tiles * kk));
            parallel_for(static_cast<std::size_t>(tiles), [&](std::size_t t) {
              const std::int64_t j0 = static_cast<std::int64_t>(t) * kTile;
              const std::int64_t m = std::min(kTile, full_cols - j0);
              ConstStrided<T> gt(gfull.data() + j0, g.cout, m, Eigen::OuterStride<>(full_cols));
              for (std::int64_t o = 0; o < kk; ++o) {
                const std::int64_t off = (o / g.k) * g.wp + (o % g.k);
                ConstStrided<T> xt(xp.data() + j0 + off, g.cin, m, Eigen::OuterStride<>(cs));
                partial[t * kk + o].noalias() = gt * xt.transpose();
              }
            });
            auto& dk = K.ensure_grad();
            for (std::int64_t o = 0; o < kk; ++o) {
              Mat<T> acc = partial[o];
              for (std::int64_t t = 1; t < tiles; ++t) acc += partial[t * kk + o];
              for (std::int64_t co = 0; co < g.cout; ++co)
                for (std::int64_t ci = 0; ci < g.cin; ++ci) dk[(co * g.cin + ci) * kk + o] += acc(co, ci);
            }
          }

          if (X.requires_grad) {
            // dX is the correlation of the (k-1)-padded output gradient with
            // the spatially flipped, transposed kernel.
            const std::int64_t e = g.k - 1;
            const std::int64_t hq = g.ho + 2 * e, wq = g.wo + 2 * e;  // == hp + e, wp + e
            const std::int64_t qs = hq * wq + g.k;
            std::vector<T> gq(static_cast<std::size_t>(g.cout * qs), T(0));
            for (std::int64_t co = 0; co < g.cout; ++co)
              for (std::int64_t r = 0; r < g.ho; ++r)
                std::copy_n(gy.data() + ((n * g.cout + co) * g.ho + r) * g.wo, g.wo,
                            gq.data() + co * qs + (r + e) * wq + e);
            std::vector<Mat<T>> wflip(static_cast<std::size_t>(kk));
            for (std::int64_t o = 0; o < kk; ++o) wflip[o] = wk[kk - 1 - o].transpose();
            const std::int64_t out_rows = hq - g.k + 1;  // == hp
            std::vector<T> dxp(static_cast<std::size_t>(g.cin * out_rows * wq));
            shifted_correlate(gq.data(), g.cout, qs, wq, k, wflip, out_rows, dxp.data());
            auto& dx = X.ensure_grad();
            for (std::int64_t ci = 0; ci < g.cin; ++ci)
              for (std::int64_t r = 0; r < g.h; ++r) {
                const T* src = dxp.data() + ci * out_rows * wq + (r + g.pad) * wq + g.pad;
                T* dst = dx.data() + ((n * g.cin + ci) * g.h + r) * g.w;
                for (std::int64_t q = 0; q < g.w; ++q) dst[q] += src[q];
              }
          }
        }
      });
}

template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& offset, Tensor<T>& running_mean,
                       Tensor<T>& running_var, bool training, double momentum, double eps) {
  require(x.defined() && x.rank() == 4, "batch_norm2d: input must be [N, C, H, W]");
  const std::int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gain, &offset, &running_mean, &running_var})
    require(t->defined() && t->size() == static_cast<std::size_t>(C),
            "batch_norm2d: per-channel tensor does not match " + std::to_string(C) + " channels");
  const std::int64_t count = N * HW;
  if (training) require(count >= 2, "batch_norm2d: training mode needs at least 2 values per channel");

  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  std::vector<T> xhat(xv.size());
  std::vector<T> invstd(static_cast<std::size_t>(C));
  auto rm = running_mean.mutable_data();
  auto rv = running_var.mutable_data();
  parallel_for(static_cast<std::size_t>(C), [&](std::size_t c) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* p = xv.data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) s += p[i];
      }
      mean = s / count;
      double ss = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* p = xv.data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
          const double d = p[i] - mean;
          ss += d * d;
        }
      }
      var = ss / count;
      rm[c] = static_cast<T>((1.0 - momentum) * rm[c] + momentum * mean);
      rv[c] = static_cast<T>((1.0 - momentum) * rv[c] + momentum * var * count / (count - 1));
    } else {
      mean = rm[c];
      var = rv[c];
    }
    const T is = static_cast<T>(1.0 / std::sqrt(var + eps));
    const T m = static_cast<T>(mean);
    invstd[c] = is;
    const T gc = gain.values()[c], oc = offset.values()[c];
    for (std::int64_t n = 0; n < N; ++n) {
      const std::int64_t base = (n * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i) {
        const T xh = (xv[base + i] - m) * is;
        xhat[base + i] = xh;
        out[base + i] = gc * xh + oc;
      }
    }
  });

  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x, gain, offset},
      [N, C, HW, count, training, xhat = std::move(xhat), invstd = std::move(invstd)](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        auto& G = *self.parents[1];
        auto& O = *self.parents[2];
        const auto& gy = self.grad;
        std::vector<T> sum_dy(static_cast<std::size_t>(C)), sum_dy_xhat(static_cast<std::size_t>(C));
        if (X.requires_grad) X.ensure_grad();
        parallel_for(static_cast<std::size_t>(C), [&](std::size_t c) {
          double s1 = 0.0, s2 = 0.0;
          for (std::int64_t n = 0; n < N; ++n) {
            const std::int64_t base = (n * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
              s1 += gy[base + i];
              s2 += static_cast<double>(gy[base + i]) * xhat[base + i];
            }
          }
          sum_dy[c] = static_cast<T>(s1);
          sum_dy_xhat[c] = static_cast<T>(s2);
          if (X.requires_grad) {
            auto& dx = X.grad;
            const T gc = G.value[c];
            const T is = invstd[c];
            for (std::int64_t n = 0; n < N; ++n) {
              const std::int64_t base = (n * C + c) * HW;
              for (std::int64_t i = 0; i < HW; ++i) {
                if (training) {
                  dx[base + i] += gc * is / static_cast<T>(count) *
                                  (static_cast<T>(count) * gy[base + i] - sum_dy[c] - xhat[base + i] * sum_dy_xhat[c]);
                } else {
                  dx[base + i] += gc * is * gy[base + i];
                }
              }
            }
          }
        });
        if (G.requires_grad) {
          auto& dg = G.ensure_grad();
          for (std::int64_t c = 0; c < C; ++c) dg[c] += sum_dy_xhat[c];
        }
        if (O.requires_grad) {
          auto& dof = O.ensure_grad();
          for (std::int64_t c = 0; c < C; ++c) dof[c] += sum_dy[c];
        }
      });
}

namespace {
thread_local ReluMaskRecorder* g_relu_recorder = nullptr;
thread_local std::vector<std::vector<std::uint8_t>>* g_relu_masks = nullptr;
}  // namespace

ReluMaskRecorder::ReluMaskRecorder() : previous_(g_relu_recorder) {
  g_relu_recorder = this;
  g_relu_masks = &masks_;
}

ReluMaskRecorder::~ReluMaskRecorder() {
  g_relu_recorder = previous_;
  g_relu_masks = previous_ ? &previous_->masks_ : nullptr;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (g_relu_masks) {
    std::vector<std::uint8_t> mask(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) mask[i] = xv[i] > T(0);
    g_relu_masks->push_back(std::move(mask));
  }
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
    auto& X = *self.parents[0];
    if (!X.requires_grad) return;
    auto& dx = X.ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (X.value[i] > T(0)) dx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T z = xv[i];
    if (z >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-z));
    } else {
      const T e = std::exp(z);
      out[i] = e / (T(1) + e);
    }
  }
  return Tensor<T>::make_result(x.shape(), out, {x}, [out](detail::Node<T>& self) {
    auto& X = *self.parents[0];
    if (!X.requires_grad) return;
    auto& dx = X.ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * out[i] * (T(1) - out[i]);
  });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.defined() && b.defined() && a.rank() == 4 && b.rank() == 4,
          "concat_channels: inputs must be [N, C, H, W]");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          "concat_channels: cannot stack " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
  const std::int64_t N = a.dim(0), ca = a.dim(1), cb = b.dim(1), HW = a.dim(2) * a.dim(3);
  std::vector<T> out(static_cast<std::size_t>(N * (ca + cb) * HW));
  for (std::int64_t n = 0; n < N; ++n) {
    std::copy_n(a.values().data() + n * ca * HW, ca * HW, out.data() + n * (ca + cb) * HW);
    std::copy_n(b.values().data() + n * cb * HW, cb * HW, out.data() + (n * (ca + cb) + ca) * HW);
  }
  return Tensor<T>::make_result({N, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                                [N, ca, cb, HW](detail::Node<T>& self) {
                                  auto& A = *self.parents[0];
                                  auto& B = *self.parents[1];
                                  for (std::int64_t n = 0; n < N; ++n) {
                                    const T* g = self.grad.data() + n * (ca + cb) * HW;
                                    if (A.requires_grad) {
                                      T* d = A.ensure_grad().data() + n * ca * HW;
                                      for (std::int64_t i = 0; i < ca * HW; ++i) d[i] += g[i];
                                    }
                                    if (B.requires_grad) {
                                      T* d = B.ensure_grad().data() + n * cb * HW;
                                      for (std::int64_t i = 0; i < cb * HW; ++i) d[i] += g[ca * HW + i];
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t end) {
  require(x.defined() && x.rank() == 4, "slice_channels: input must be [N, C, H, W]");
  require(0 <= begin && begin < end && end <= x.dim(1),
          "slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
              shape_str(x.shape()));
  const std::int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3), cs = end - begin;
  std::vector<T> out(static_cast<std::size_t>(N * cs * HW));
  for (std::int64_t n = 0; n < N; ++n)
    std::copy_n(x.values().data() + (n * C + begin) * HW, cs * HW, out.data() + n * cs * HW);
  return Tensor<T>::make_result({N, cs, x.dim(2), x.dim(3)}, std::move(out), {x},
                                [N, C, HW, cs, begin](detail::Node<T>& self) {
                                  auto& X = *self.parents[0];
                                  if (!X.requires_grad) return;
                                  auto& dx = X.ensure_grad();
                                  for (std::int64_t n = 0; n < N; ++n) {
                                    T* d = dx.data() + (n * C + begin) * HW;
                                    const T* g = self.grad.data() + n * cs * HW;
                                    for (std::int64_t i = 0; i < cs * HW; ++i) d[i] += g[i];
                                  }
                                });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& d = p->ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [factor](detail::Node<T>& self) {
    auto& A = *self.parents[0];
    if (!A.requires_grad) return;
    auto& d = A.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.values()) acc += v;
  return Tensor<T>::make_result({}, {static_cast<T>(acc)}, {a}, [](detail::Node<T>& self) {
    auto& A = *self.parents[0];
    if (!A.requires_grad) return;
    auto& d = A.ensure_grad();
    for (auto& v : d) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> dot(const Tensor<T>& a, const std::vector<T>& weights) {
  require(weights.size() == a.size(), "dot: " + std::to_string(weights.size()) + " weights for tensor of shape " +
                                          shape_str(a.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += static_cast<double>(a.values()[i]) * weights[i];
  return Tensor<T>::make_result({}, {static_cast<T>(acc)}, {a}, [weights](detail::Node<T>& self) {
    auto& A = *self.parents[0];
    if (!A.requires_grad) return;
    auto& d = A.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[0] * weights[i];
  });
}

#define MAPFUSION_INSTANTIATE_OPS(T)                                                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions);             \
  template Tensor<T> batch_norm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&, Tensor<T>&, \
                                  bool, double, double);                                                      \
  template Tensor<T> relu(const Tensor<T>&);                                                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                               \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> slice_channels(const Tensor<T>&, std::int64_t, std::int64_t);                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                                              \
  template Tensor<T> sum(const Tensor<T>&);                                                                   \
  template Tensor<T> dot(const Tensor<T>&, const std::vector<T>&);

MAPFUSION_INSTANTIATE_OPS(float)
MAPFUSION_INSTANTIATE_OPS(double)

}  // namespace mapfusion::ad
