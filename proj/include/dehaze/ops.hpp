#pragma once

// Differentiable layer set. Every op reads its inputs from the tape, computes
// the forward value and records a closure that accumulates input gradients.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "dehaze/activation.hpp"
#include "dehaze/autograd.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  std::size_t in_c, in_h, in_w, kh, kw, stride, pad, out_h, out_w;

  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
  std::size_t rows() const { return in_c * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
};

// Unfolds one image (in_c, in_h, in_w) into a (in_c*kh*kw, out_h*out_w) matrix.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const long pad = static_cast<long>(g.pad);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - pad;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = img + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the image.
template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* img) {
  const long pad = static_cast<long>(g.pad);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          T* dst = img + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - pad;
            if (ix >= 0 && ix < static_cast<long>(g.in_w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

}  // namespace detail

// Zero-padded 2D cross-correlation. weight: (outC, inC, kH, kW); bias holds
// outC values in any shape.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t stride, std::size_t padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (stride < 1) throw ParameterError("conv2d stride must be >= 1");
  if (xs.c != ws.c) {
    throw DimensionError("c", "conv2d input has " + std::to_string(xs.c) +
                                  " channels, weight expects " + std::to_string(ws.c));
  }
  if (bias.value().size() != ws.n) {
    throw DimensionError("c", "conv2d bias has " + std::to_string(bias.value().size()) +
                                  " values, expected " + std::to_string(ws.n));
  }
  if (xs.h + 2 * padding < ws.h) throw DimensionError("h", "conv2d kernel exceeds padded height");
  if (xs.w + 2 * padding < ws.w) throw DimensionError("w", "conv2d kernel exceeds padded width");

  const detail::ConvGeometry g{xs.c,   xs.h,    xs.w,
                               ws.h,   ws.w,    stride,
                               padding, (xs.h + 2 * padding - ws.h) / stride + 1,
                               (xs.w + 2 * padding - ws.w) / stride + 1};
  const std::size_t out_c = ws.n;
  Tensor<T> out(Shape{xs.n, out_c, g.out_h, g.out_w});

  const Tensor<T>& X = x.value();
  const Tensor<T>& W = weight.value();
  const Tensor<T>& B = bias.value();
  detail::ConstMatMap<T> wmat(W.data(), out_c, g.rows());
  std::vector<T> col(g.pointwise() ? 0 : g.rows() * g.cols());
  for (std::size_t n = 0; n < xs.n; ++n) {
    const T* img = X.data() + n * xs.c * xs.plane();
    if (!g.pointwise()) detail::im2col(img, g, col.data());
    detail::ConstMatMap<T> cmat(g.pointwise() ? img : col.data(), g.rows(), g.cols());
    detail::MatMap<T> omat(out.data() + n * out_c * g.cols(), out_c, g.cols());
    omat.noalias() = wmat * cmat;
    for (std::size_t o = 0; o < out_c; ++o) omat.row(o).array() += B[o];
  }

  return x.tape->record(std::move(out), {x, weight, bias}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    const Tensor<T>& Xv = t.value(x.id);
    const Tensor<T>& Wv = t.value(weight.id);
    const bool need_x = t.requires_grad(x.id);
    const bool need_w = t.requires_grad(weight.id);
    const bool need_b = t.requires_grad(bias.id);
    detail::ConstMatMap<T> wm(Wv.data(), out_c, g.rows());
    std::vector<T> colbuf(g.pointwise() ? 0 : g.rows() * g.cols());
    std::vector<T> dcol(g.pointwise() ? 0 : g.rows() * g.cols());
    for (std::size_t n = 0; n < xs.n; ++n) {
      detail::ConstMatMap<T> gm(gy.data() + n * out_c * g.cols(), out_c, g.cols());
      const T* img = Xv.data() + n * xs.c * xs.plane();
      if (need_w) {
        if (!g.pointwise()) detail::im2col(img, g, colbuf.data());
        detail::ConstMatMap<T> cm(g.pointwise() ? img : colbuf.data(), g.rows(), g.cols());
        detail::MatMap<T> dw(t.grad(weight.id).data(), out_c, g.rows());
        dw.noalias() += gm * cm.transpose();
      }
      if (need_b) {
        Tensor<T>& db = t.grad(bias.id);
        for (std::size_t o = 0; o < out_c; ++o) {
          double s = 0.0;
          for (std::size_t p = 0; p < g.cols(); ++p) s += gm(o, p);
          db[o] += static_cast<T>(s);
        }
      }
      if (need_x) {
        T* dimg = t.grad(x.id).data() + n * xs.c * xs.plane();
        if (g.pointwise()) {
          detail::MatMap<T> dx(dimg, g.rows(), g.cols());
          dx.noalias() += wm.transpose() * gm;
        } else {
          detail::MatMap<T> dc(dcol.data(), g.rows(), g.cols());
          dc.noalias() = wm.transpose() * gm;
          detail::col2im_add(dcol.data(), g, dimg);
        }
      }
    }
  });
}

// Max pooling with implicit -inf padding. Backward routes each output
// gradient to the first (row-major) maximum of its window.
template <typename T>
Var<T> maxpool2d(Var<T> x, std::size_t k, std::size_t stride, std::size_t padding = 0) {
  const Shape xs = x.shape();
  if (k < 1 || stride < 1) throw ParameterError("maxpool2d kernel and stride must be >= 1");
  if (2 * padding >= k && padding > 0) {
    throw ParameterError("maxpool2d padding must be at most (k-1)/2");
  }
  if (xs.h + 2 * padding < k) throw DimensionError("h", "maxpool window exceeds padded height");
  if (xs.w + 2 * padding < k) throw DimensionError("w", "maxpool window exceeds padded width");
  if (k == stride && (xs.h % stride != 0)) {
    throw DimensionError("h", "height " + std::to_string(xs.h) + " not divisible by stride " +
                                  std::to_string(stride));
  }
  if (k == stride && (xs.w % stride != 0)) {
    throw DimensionError("w", "width " + std::to_string(xs.w) + " not divisible by stride " +
                                  std::to_string(stride));
  }
  const std::size_t oh = (xs.h + 2 * padding - k) / stride + 1;
  const std::size_t ow = (xs.w + 2 * padding - k) / stride + 1;
  Tensor<T> out(Shape{xs.n, xs.c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());

  const Tensor<T>& X = x.value();
  const long pad = static_cast<long>(padding);
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const T* plane = X.data() + nc * xs.plane();
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const long y0 = static_cast<long>(oy * stride) - pad;
      const long y_lo = std::max(y0, 0L);
      const long y_hi = std::min(y0 + static_cast<long>(k), static_cast<long>(xs.h));
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        const long x0 = static_cast<long>(ox * stride) - pad;
        const long x_lo = std::max(x0, 0L);
        const long x_hi = std::min(x0 + static_cast<long>(k), static_cast<long>(xs.w));
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_i = static_cast<std::size_t>(y_lo) * xs.w + static_cast<std::size_t>(x_lo);
        for (long yy = y_lo; yy < y_hi; ++yy) {
          for (long xx = x_lo; xx < x_hi; ++xx) {
            const std::size_t i = static_cast<std::size_t>(yy) * xs.w + static_cast<std::size_t>(xx);
            if (plane[i] > best) {
              best = plane[i];
              best_i = i;
            }
          }
        }
        out[o] = best;
        (*argmax)[o] = nc * xs.plane() + best_i;
      }
    }
  }
  if (x.tape->tracking_branches()) {
    for (std::size_t i : *argmax) x.tape->note_branch(i);
  }

  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[(*argmax)[i]] += gy[i];
  });
}

template <typename T>
Var<T> upsample_nearest2x(Var<T> x) {
  const Shape xs = x.shape();
  Tensor<T> out(Shape{xs.n, xs.c, 2 * xs.h, 2 * xs.w});
  const Tensor<T>& X = x.value();
  for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const T* src = X.data() + nc * xs.plane();
    T* dst = out.data() + nc * 4 * xs.plane();
    for (std::size_t y = 0; y < 2 * xs.h; ++y) {
      for (std::size_t xx = 0; xx < 2 * xs.w; ++xx) {
        dst[y * 2 * xs.w + xx] = src[(y / 2) * xs.w + xx / 2];
      }
    }
  }
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
      const T* src = gy.data() + nc * 4 * xs.plane();
      T* dst = gx.data() + nc * xs.plane();
      for (std::size_t y = 0; y < 2 * xs.h; ++y) {
        for (std::size_t xx = 0; xx < 2 * xs.w; ++xx) {
          dst[(y / 2) * xs.w + xx / 2] += src[y * 2 * xs.w + xx];
        }
      }
    }
  });
}

// Channel concatenation, `a` first.
template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  if (as.n != bs.n) throw DimensionError("n", "concat batch " + as.str() + " vs " + bs.str());
  if (as.h != bs.h) throw DimensionError("h", "concat height " + as.str() + " vs " + bs.str());
  if (as.w != bs.w) throw DimensionError("w", "concat width " + as.str() + " vs " + bs.str());
  const std::size_t pa = as.c * as.plane();
  const std::size_t pb = bs.c * bs.plane();
  Tensor<T> out(Shape{as.n, as.c + bs.c, as.h, as.w});
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t n = 0; n < as.n; ++n) {
    std::copy_n(A.data() + n * pa, pa, out.data() + n * (pa + pb));
    std::copy_n(B.data() + n * pb, pb, out.data() + n * (pa + pb) + pa);
  }
  return a.tape->record(std::move(out), {a, b}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    for (std::size_t n = 0; n < as.n; ++n) {
      const T* src = gy.data() + n * (pa + pb);
      if (t.requires_grad(a.id)) {
        T* da = t.grad(a.id).data() + n * pa;
        for (std::size_t i = 0; i < pa; ++i) da[i] += src[i];
      }
      if (t.requires_grad(b.id)) {
        T* db = t.grad(b.id).data() + n * pb;
        for (std::size_t i = 0; i < pb; ++i) db[i] += src[pa + i];
      }
    }
  });
}

// Channels [begin, begin + count).
template <typename T>
Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t count) {
  const Shape xs = x.shape();
  if (begin + count > xs.c) {
    throw DimensionError("c", "slice [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                                  ") out of " + std::to_string(xs.c) + " channels");
  }
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, count, xs.h, xs.w});
  const Tensor<T>& X = x.value();
  for (std::size_t n = 0; n < xs.n; ++n) {
    std::copy_n(X.data() + (n * xs.c + begin) * plane, count * plane,
                out.data() + n * count * plane);
  }
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    for (std::size_t n = 0; n < xs.n; ++n) {
      const T* src = gy.data() + n * count * plane;
      T* dst = gx.data() + (n * xs.c + begin) * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var<T> activate(Var<T> x, ActivationKind kind) {
  kind.validate();
  if (kind.kind == ActivationKind::identity) return x;
  const Tensor<T>& X = x.value();
  Tensor<T> out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = activate_scalar(kind, X[i]);
  if (x.tape->tracking_branches() &&
      (kind.kind == ActivationKind::relu || kind.kind == ActivationKind::leaky_relu)) {
    for (std::size_t i = 0; i < X.size(); ++i) x.tape->note_branch(X[i] > T(0) ? 2 * i + 1 : 2 * i);
  }
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    const Tensor<T>& Xv = t.value(x.id);
    Tensor<T>& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * activate_derivative(kind, Xv[i]);
  });
}

// Affine map on (n, c, 1, 1) inputs. weight: (out, c, 1, 1).
template <typename T>
Var<T> dense(Var<T> x, Var<T> weight, Var<T> bias) {
  const Shape xs = x.shape();
  if (xs.h != 1) throw DimensionError("h", "dense expects 1x1 spatial input, got " + xs.str());
  if (xs.w != 1) throw DimensionError("w", "dense expects 1x1 spatial input, got " + xs.str());
  const Shape ws = weight.shape();
  if (ws.c * ws.h * ws.w != xs.c) {
    throw DimensionError("c", "dense weight " + ws.str() + " incompatible with input " + xs.str());
  }
  if (bias.value().size() != ws.n) throw DimensionError("c", "dense bias length mismatch");
  const std::size_t out_c = ws.n;
  Tensor<T> out(Shape{xs.n, out_c, 1, 1});
  const Tensor<T>& X = x.value();
  const Tensor<T>& W = weight.value();
  const Tensor<T>& B = bias.value();
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t o = 0; o < out_c; ++o) {
      double s = B[o];
      for (std::size_t c = 0; c < xs.c; ++c) s += double(W[o * xs.c + c]) * X[n * xs.c + c];
      out[n * out_c + o] = static_cast<T>(s);
    }
  }
  return x.tape->record(std::move(out), {x, weight, bias}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    const Tensor<T>& Xv = t.value(x.id);
    const Tensor<T>& Wv = t.value(weight.id);
    for (std::size_t n = 0; n < xs.n; ++n) {
      for (std::size_t o = 0; o < out_c; ++o) {
        const T g = gy[n * out_c + o];
        if (t.requires_grad(bias.id)) t.grad(bias.id)[o] += g;
        if (t.requires_grad(weight.id)) {
          Tensor<T>& gw = t.grad(weight.id);
          for (std::size_t c = 0; c < xs.c; ++c) gw[o * xs.c + c] += g * Xv[n * xs.c + c];
        }
        if (t.requires_grad(x.id)) {
          Tensor<T>& gx = t.grad(x.id);
          for (std::size_t c = 0; c < xs.c; ++c) gx[n * xs.c + c] += g * Wv[o * xs.c + c];
        }
      }
    }
  });
}

template <typename T>
Var<T> global_avg_pool(Var<T> x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, xs.c, 1, 1});
  const Tensor<T>& X = x.value();
  for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += X[nc * plane + i];
    out[nc] = static_cast<T>(s / static_cast<double>(plane));
  }
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    const T inv = T(1) / static_cast<T>(plane);
    for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
      for (std::size_t i = 0; i < plane; ++i) gx[nc * plane + i] += gy[nc] * inv;
    }
  });
}

template <typename T>
Var<T> global_max_pool(Var<T> x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, xs.c, 1, 1});
  auto argmax = std::make_shared<std::vector<std::size_t>>(xs.n * xs.c);
  const Tensor<T>& X = x.value();
  for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
    std::size_t best = nc * plane;
    for (std::size_t i = 1; i < plane; ++i) {
      if (X[nc * plane + i] > X[best]) best = nc * plane + i;
    }
    out[nc] = X[best];
    (*argmax)[nc] = best;
  }
  if (x.tape->tracking_branches()) {
    for (std::size_t i : *argmax) x.tape->note_branch(i);
  }
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    for (std::size_t nc = 0; nc < gy.size(); ++nc) gx[(*argmax)[nc]] += gy[nc];
  });
}

// Per-pixel mean over channels: (n, 1, h, w).
template <typename T>
Var<T> channel_mean(Var<T> x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, 1, xs.h, xs.w});
  const Tensor<T>& X = x.value();
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < xs.c; ++c) s += X[(n * xs.c + c) * plane + i];
      out[n * plane + i] = static_cast<T>(s / static_cast<double>(xs.c));
    }
  }
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    const T inv = T(1) / static_cast<T>(xs.c);
    for (std::size_t n = 0; n < xs.n; ++n) {
      for (std::size_t c = 0; c < xs.c; ++c) {
        for (std::size_t i = 0; i < plane; ++i) gx[(n * xs.c + c) * plane + i] += gy[n * plane + i] * inv;
      }
    }
  });
}

// Per-pixel max over channels: (n, 1, h, w); ties go to the lowest channel.
template <typename T>
Var<T> channel_max(Var<T> x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, 1, xs.h, xs.w});
  auto argmax = std::make_shared<std::vector<std::size_t>>(xs.n * plane);
  const Tensor<T>& X = x.value();
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      std::size_t best = n * xs.c * plane + i;
      for (std::size_t c = 1; c < xs.c; ++c) {
        const std::size_t j = (n * xs.c + c) * plane + i;
        if (X[j] > X[best]) best = j;
      }
      out[n * plane + i] = X[best];
      (*argmax)[n * plane + i] = best;
    }
  }
  if (x.tape->tracking_branches()) {
    for (std::size_t i : *argmax) x.tape->note_branch(i);
  }
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[(*argmax)[i]] += gy[i];
  });
}

// x * gate, where gate is (n, 1, h, w) (spatial) or (n, c, 1, 1) (per channel).
template <typename T>
Var<T> mul_gate(Var<T> x, Var<T> gate) {
  const Shape xs = x.shape();
  const Shape gs = gate.shape();
  const bool spatial = gs.c == 1 && gs.h == xs.h && gs.w == xs.w;
  const bool channel = gs.c == xs.c && gs.h == 1 && gs.w == 1;
  if (gs.n != xs.n) throw DimensionError("n", "gate " + gs.str() + " vs input " + xs.str());
  if (!spatial && !channel) throw DimensionError("c", "gate " + gs.str() + " does not broadcast onto " + xs.str());
  const std::size_t plane = xs.plane();
  auto gate_index = [=](std::size_t n, std::size_t c, std::size_t i) {
    return spatial ? n * plane + i : n * xs.c + c;
  };
  Tensor<T> out(xs);
  const Tensor<T>& X = x.value();
  const Tensor<T>& G = gate.value();
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t j = (n * xs.c + c) * plane + i;
        out[j] = X[j] * G[gate_index(n, c, i)];
      }
    }
  }
  return x.tape->record(std::move(out), {x, gate}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    const Tensor<T>& Xv = t.value(x.id);
    const Tensor<T>& Gv = t.value(gate.id);
    const bool need_x = t.requires_grad(x.id);
    const bool need_g = t.requires_grad(gate.id);
    for (std::size_t n = 0; n < xs.n; ++n) {
      for (std::size_t c = 0; c < xs.c; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t j = (n * xs.c + c) * plane + i;
          const std::size_t k = gate_index(n, c, i);
          if (need_x) t.grad(x.id)[j] += gy[j] * Gv[k];
          if (need_g) t.grad(gate.id)[k] += gy[j] * Xv[j];
        }
      }
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.value());
  out.drop_grad();
  detail::add_into(out, b.value());
  return a.tape->record(std::move(out), {a, b}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    if (t.requires_grad(a.id)) detail::add_into(t.grad(a.id), gy);
    if (t.requires_grad(b.id)) detail::add_into(t.grad(b.id), gy);
  });
}

template <typename T>
Var<T> scale(Var<T> x, double factor) {
  Tensor<T> out(x.value());
  out.drop_grad();
  for (auto& v : out.values()) v = static_cast<T>(v * factor);
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    Tensor<T>& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += static_cast<T>(gy[i] * factor);
  });
}

// Mean of all elements as a (1,1,1,1) scalar.
template <typename T>
Var<T> mean(Var<T> x) {
  const Tensor<T>& X = x.value();
  double s = 0.0;
  for (T v : X.values()) s += v;
  const std::size_t count = X.size();
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(s / static_cast<double>(count)));
  return x.tape->record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    const T g = (*t.grad_if(self))[0] / static_cast<T>(count);
    for (auto& v : t.grad(x.id).values()) v += g;
  });
}

// Elementwise product of two same-shape tensors.
template <typename T>
Var<T> multiply(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "multiply");
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return a.tape->record(std::move(out), {a, b}, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gy = *t.grad_if(self);
    const Tensor<T>& Av = t.value(a.id);
    const Tensor<T>& Bv = t.value(b.id);
    if (t.requires_grad(a.id)) {
      Tensor<T>& ga = t.grad(a.id);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * Bv[i];
    }
    if (t.requires_grad(b.id)) {
      Tensor<T>& gb = t.grad(b.id);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * Av[i];
    }
  });
}

}  // namespace dehaze
