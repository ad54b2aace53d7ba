#include "hmgdyn/nn/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmgdyn/error.hpp"

namespace hmgdyn::nn {

namespace {

// C = alpha * op(A) * op(B) + beta * C, all row-major.
template <typename T>
void gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<Mat> out(c, m, n);
  if (beta == T(0)) {
    out.setZero();
  } else if (beta != T(1)) {
    out *= beta;
  }
  const Eigen::Map<const Mat> am(a, ta ? k : m, ta ? m : k);
  const Eigen::Map<const Mat> bm(b, tb ? n : k, tb ? k : n);
  if (!ta && !tb) {
    out.noalias() += alpha * am * bm;
  } else if (ta && !tb) {
    out.noalias() += alpha * am.transpose() * bm;
  } else if (!ta && tb) {
    out.noalias() += alpha * am * bm.transpose();
  } else {
    out.noalias() += alpha * am.transpose() * bm.transpose();
  }
}

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw Error(ErrorKind::ShapeMismatch, op + ": " + detail);
}

// col[(ci*k*k + ky*k + kx), y*W + x] = img[ci, y+ky-p, x+kx-p] (zero outside)
template <typename T>
void im2col(const T* img, int channels, int h, int w, int k, T* col) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < channels; ++ci) {
    const T* src = img + ci * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * plane;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          T* row = dst + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, T(0));
            continue;
          }
          std::fill(row, row + x_lo, T(0));
          std::copy(src + static_cast<std::size_t>(sy) * w + x_lo + dx, src + static_cast<std::size_t>(sy) * w + x_hi + dx,
                    row + x_lo);
          std::fill(row + x_hi, row + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, T* img) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < channels; ++ci) {
    T* dst = img + ci * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * plane;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * w;
          T* out = dst + static_cast<std::size_t>(sy) * w + dx;
          for (int x = x_lo; x < x_hi; ++x) out[x] += row[x];
        }
      }
    }
  }
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

template <typename T>
Var Graph<T>::push(Tensor<T> value, bool requires_grad, std::function<void()> back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape);
  return n.grad;
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return push(std::move(value), false);
}

template <typename T>
Var Graph<T>::parameter(Parameter<T>& p) {
  Var v = push(p.value, true);
  nodes_[v.id].param = &p;
  return v;
}

template <typename T>
Var Graph<T>::conv2d(Var x, Var kernel, Var bias) {
  const Shape xs = value(x).shape;
  const Shape ks = value(kernel).shape;
  const Shape bs = value(bias).shape;
  if (ks.h != ks.w || ks.h % 2 == 0) shape_error("conv2d", "kernel must be square with odd size, got " + ks.str());
  if (ks.c != xs.c) shape_error("conv2d", "input " + xs.str() + " vs kernel " + ks.str());
  if (bs.size() != static_cast<std::size_t>(ks.n)) shape_error("conv2d", "bias " + bs.str() + " vs kernel " + ks.str());

  const int k = ks.h;
  const int cout = ks.n;
  const int ckk = ks.c * k * k;
  const int hw = xs.h * xs.w;
  Tensor<T> y(Shape{xs.n, cout, xs.h, xs.w});
  const T* wdata = value(kernel).data.data();
  const T* bdata = value(bias).data.data();
  std::vector<T> col(k == 1 ? 0 : static_cast<std::size_t>(ckk) * hw);
  for (int n = 0; n < xs.n; ++n) {
    const T* xin = value(x).plane(n, 0);
    const T* cols = xin;
    if (k != 1) {
      im2col(xin, xs.c, xs.h, xs.w, k, col.data());
      cols = col.data();
    }
    T* yout = y.plane(n, 0);
    for (int co = 0; co < cout; ++co) std::fill(yout + static_cast<std::size_t>(co) * hw, yout + static_cast<std::size_t>(co + 1) * hw, bdata[co]);
    gemm(false, false, cout, hw, ckk, T(1), wdata, cols, T(1), yout);
  }

  const bool rg = needs(x) || needs(kernel) || needs(bias);
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), rg, [this, x, kernel, bias, out, k, cout, ckk, hw, xs]() {
    const Tensor<T>& dy = nodes_[out].grad;
    const T* wdata = value(kernel).data.data();
    std::vector<T> col(k == 1 ? 0 : static_cast<std::size_t>(ckk) * hw);
    std::vector<T> dcol(static_cast<std::size_t>(ckk) * hw);
    for (int n = 0; n < xs.n; ++n) {
      const T* dyn = dy.plane(n, 0);
      if (needs(bias)) {
        T* db = grad_buffer(bias).data.data();
        for (int co = 0; co < cout; ++co) {
          T s = 0;
          const T* row = dyn + static_cast<std::size_t>(co) * hw;
          for (int i = 0; i < hw; ++i) s += row[i];
          db[co] += s;
        }
      }
      if (needs(kernel)) {
        const T* xin = value(x).plane(n, 0);
        const T* cols = xin;
        if (k != 1) {
          im2col(xin, xs.c, xs.h, xs.w, k, col.data());
          cols = col.data();
        }
        gemm(false, true, cout, ckk, hw, T(1), dyn, cols, T(1), grad_buffer(kernel).data.data());
      }
      if (needs(x)) {
        T* dx = grad_buffer(x).plane(n, 0);
        if (k == 1) {
          gemm(true, false, ckk, hw, cout, T(1), wdata, dyn, T(1), dx);
        } else {
          gemm(true, false, ckk, hw, cout, T(1), wdata, dyn, T(0), dcol.data());
          col2im_add(dcol.data(), xs.c, xs.h, xs.w, k, dx);
        }
      }
    }
  });
}

template <typename T>
Var Graph<T>::batch_norm(Var x, Var scale, Var shift, BatchNormStats<T>& stats, Mode mode) {
  const Shape xs = value(x).shape;
  const int C = xs.c;
  if (value(scale).size() != static_cast<std::size_t>(C) || value(shift).size() != static_cast<std::size_t>(C) ||
      stats.mean.size() != static_cast<std::size_t>(C)) {
    shape_error("batch_norm", "channel count mismatch for input " + xs.str());
  }
  if (mode == Mode::Train && xs.n < 2) shape_error("batch_norm", "train mode needs batch >= 2");

  const std::size_t plane = xs.plane();
  const double count = static_cast<double>(xs.n) * plane;
  std::vector<T> mean(C), inv_std(C);
  if (mode == Mode::Train) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int n = 0; n < xs.n; ++n) {
        const T* p = value(x).plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / count;
      double ss = 0.0;
      for (int n = 0; n < xs.n; ++n) {
        const T* p = value(x).plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / count;
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + stats.eps));
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      stats.mean[c] = static_cast<T>(stats.momentum * stats.mean[c] + (1.0 - stats.momentum) * mu);
      stats.var[c] = static_cast<T>(stats.momentum * stats.var[c] + (1.0 - stats.momentum) * unbiased);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = stats.mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(stats.var[c]) + stats.eps));
    }
  }

  Tensor<T> xhat(xs);
  Tensor<T> y(xs);
  const T* g = value(scale).data.data();
  const T* b = value(shift).data.data();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* p = value(x).plane(n, c);
      T* h = xhat.plane(n, c);
      T* o = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        h[i] = (p[i] - mean[c]) * inv_std[c];
        o[i] = g[c] * h[i] + b[c];
      }
    }
  }

  const bool rg = needs(x) || needs(scale) || needs(shift);
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), rg,
              [this, x, scale, shift, out, mode, xs, plane, count, inv_std, xhat = std::move(xhat)]() {
                const Tensor<T>& dy = nodes_[out].grad;
                const int C = xs.c;
                const T* g = value(scale).data.data();
                std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
                for (int n = 0; n < xs.n; ++n) {
                  for (int c = 0; c < C; ++c) {
                    const T* d = dy.plane(n, c);
                    const T* h = xhat.plane(n, c);
                    for (std::size_t i = 0; i < plane; ++i) {
                      sum_dy[c] += d[i];
                      sum_dy_xhat[c] += d[i] * h[i];
                    }
                  }
                }
                if (needs(scale)) {
                  auto& ds = grad_buffer(scale).data;
                  for (int c = 0; c < C; ++c) ds[c] += static_cast<T>(sum_dy_xhat[c]);
                }
                if (needs(shift)) {
                  auto& db = grad_buffer(shift).data;
                  for (int c = 0; c < C; ++c) db[c] += static_cast<T>(sum_dy[c]);
                }
                if (!needs(x)) return;
                Tensor<T>& dx = grad_buffer(x);
                for (int n = 0; n < xs.n; ++n) {
                  for (int c = 0; c < C; ++c) {
                    const T* d = dy.plane(n, c);
                    const T* h = xhat.plane(n, c);
                    T* o = dx.plane(n, c);
                    if (mode == Mode::Train) {
                      const double k = g[c] * inv_std[c] / count;
                      for (std::size_t i = 0; i < plane; ++i) {
                        o[i] += static_cast<T>(k * (count * d[i] - sum_dy[c] - h[i] * sum_dy_xhat[c]));
                      }
                    } else {
                      const T k = g[c] * inv_std[c];
                      for (std::size_t i = 0; i < plane; ++i) o[i] += k * d[i];
                    }
                  }
                }
              });
}

template <typename T>
Var Graph<T>::relu(Var x) {
  Tensor<T> y = value(x);
  for (T& v : y.data) v = v > T(0) ? v : T(0);
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [this, x, out]() {
    const auto& dy = nodes_[out].grad.data;
    const auto& xv = value(x).data;
    auto& dx = grad_buffer(x).data;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (xv[i] > T(0)) dx[i] += dy[i];
    }
  });
}

template <typename T>
Var Graph<T>::sigmoid(Var x) {
  Tensor<T> y = value(x);
  for (T& v : y.data) {
    v = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [this, x, out]() {
    const auto& dy = nodes_[out].grad.data;
    const auto& yv = nodes_[out].value.data;
    auto& dx = grad_buffer(x).data;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * yv[i] * (T(1) - yv[i]);
  });
}

template <typename T>
Var Graph<T>::max_pool2(Var x) {
  const Shape xs = value(x).shape;
  if (xs.h % 2 != 0 || xs.w % 2 != 0) shape_error("max_pool2", "odd spatial size " + xs.str());
  const Shape ys{xs.n, xs.c, xs.h / 2, xs.w / 2};
  Tensor<T> y(ys);
  std::vector<std::uint32_t> argmax(ys.size());
  std::size_t o = 0;
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* p = value(x).plane(n, c);
      const std::size_t base = value(x).offset(n, c, 0, 0);
      for (int yy = 0; yy < ys.h; ++yy) {
        for (int xx = 0; xx < ys.w; ++xx, ++o) {
          std::size_t best = static_cast<std::size_t>(2 * yy) * xs.w + 2 * xx;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t idx = static_cast<std::size_t>(2 * yy + dy) * xs.w + 2 * xx + dx;
              if (p[idx] > p[best]) best = idx;
            }
          }
          y.data[o] = p[best];
          argmax[o] = static_cast<std::uint32_t>(base + best);
        }
      }
    }
  }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [this, x, out, argmax = std::move(argmax)]() {
    const auto& dy = nodes_[out].grad.data;
    auto& dx = grad_buffer(x).data;
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  });
}

template <typename T>
Var Graph<T>::avg_pool_global(Var x) {
  const Shape xs = value(x).shape;
  Tensor<T> y(Shape{xs.n, xs.c, 1, 1});
  const std::size_t plane = xs.plane();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* p = value(x).plane(n, c);
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      y.at(n, c, 0, 0) = static_cast<T>(s / plane);
    }
  }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [this, x, out, xs, plane]() {
    const Tensor<T>& dy = nodes_[out].grad;
    Tensor<T>& dx = grad_buffer(x);
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const T g = dy.at(n, c, 0, 0) / static_cast<T>(plane);
        T* o = dx.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) o[i] += g;
      }
    }
  });
}

template <typename T>
Var Graph<T>::dropout(Var x, double keep_prob, Mode mode, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw Error(ErrorKind::ConfigInvalid, "dropout keep probability must be in (0, 1]");
  }
  if (mode == Mode::Infer || keep_prob == 1.0) return x;
  const T scale = static_cast<T>(1.0 / keep_prob);
  std::vector<T> mask(value(x).size());
  for (T& m : mask) m = rng.bernoulli(keep_prob) ? scale : T(0);
  Tensor<T> y = value(x);
  for (std::size_t i = 0; i < mask.size(); ++i) y.data[i] *= mask[i];
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [this, x, out, mask = std::move(mask)]() {
    const auto& dy = nodes_[out].grad.data;
    auto& dx = grad_buffer(x).data;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * mask[i];
  });
}

namespace {

// Source index pair and weight of the second tap for bilinear 2x upsampling
// with half-pixel centers, clamped at the border.
struct Tap {
  int i0;
  int i1;
  double a;
};

std::vector<Tap> upsample_taps(int in, int out) {
  std::vector<Tap> taps(out);
  for (int o = 0; o < out; ++o) {
    const double s = std::clamp((o + 0.5) / 2.0 - 0.5, 0.0, in - 1.0);
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

template <typename T>
Var Graph<T>::upsample2x(Var x) {
  const Shape xs = value(x).shape;
  const Shape ys{xs.n, xs.c, xs.h * 2, xs.w * 2};
  const auto ty = upsample_taps(xs.h, ys.h);
  const auto tx = upsample_taps(xs.w, ys.w);
  Tensor<T> y(ys);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* p = value(x).plane(n, c);
      T* o = y.plane(n, c);
      for (int yy = 0; yy < ys.h; ++yy) {
        const Tap& a = ty[yy];
        for (int xx = 0; xx < ys.w; ++xx) {
          const Tap& b = tx[xx];
          const double top = (1 - b.a) * p[a.i0 * xs.w + b.i0] + b.a * p[a.i0 * xs.w + b.i1];
          const double bot = (1 - b.a) * p[a.i1 * xs.w + b.i0] + b.a * p[a.i1 * xs.w + b.i1];
          o[yy * ys.w + xx] = static_cast<T>((1 - a.a) * top + a.a * bot);
        }
      }
    }
  }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(x), [this, x, out, xs, ys, ty, tx]() {
    const Tensor<T>& dy = nodes_[out].grad;
    Tensor<T>& dx = grad_buffer(x);
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const T* g = dy.plane(n, c);
        T* o = dx.plane(n, c);
        for (int yy = 0; yy < ys.h; ++yy) {
          const Tap& a = ty[yy];
          for (int xx = 0; xx < ys.w; ++xx) {
            const Tap& b = tx[xx];
            const double v = g[yy * ys.w + xx];
            o[a.i0 * xs.w + b.i0] += static_cast<T>((1 - a.a) * (1 - b.a) * v);
            o[a.i0 * xs.w + b.i1] += static_cast<T>((1 - a.a) * b.a * v);
            o[a.i1 * xs.w + b.i0] += static_cast<T>(a.a * (1 - b.a) * v);
            o[a.i1 * xs.w + b.i1] += static_cast<T>(a.a * b.a * v);
          }
        }
      }
    }
  });
}

template <typename T>
Var Graph<T>::concat_channels(Var a, Var b) {
  const Shape as = value(a).shape;
  const Shape bs = value(b).shape;
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) shape_error("concat_channels", as.str() + " vs " + bs.str());
  Tensor<T> y(Shape{as.n, as.c + bs.c, as.h, as.w});
  const std::size_t na = static_cast<std::size_t>(as.c) * as.plane();
  const std::size_t nb = static_cast<std::size_t>(bs.c) * bs.plane();
  for (int n = 0; n < as.n; ++n) {
    std::copy_n(value(a).plane(n, 0), na, y.plane(n, 0));
    std::copy_n(value(b).plane(n, 0), nb, y.plane(n, 0) + na);
  }
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(a) || needs(b), [this, a, b, out, as, na, nb]() {
    const Tensor<T>& dy = nodes_[out].grad;
    for (int n = 0; n < as.n; ++n) {
      const T* g = dy.plane(n, 0);
      if (needs(a)) {
        T* o = grad_buffer(a).plane(n, 0);
        for (std::size_t i = 0; i < na; ++i) o[i] += g[i];
      }
      if (needs(b)) {
        T* o = grad_buffer(b).plane(n, 0);
        for (std::size_t i = 0; i < nb; ++i) o[i] += g[na + i];
      }
    }
  });
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  if (!(value(a).shape == value(b).shape)) shape_error("add", value(a).shape.str() + " vs " + value(b).shape.str());
  Tensor<T> y = value(a);
  const auto& bv = value(b).data;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += bv[i];
  const int out = static_cast<int>(nodes_.size());
  return push(std::move(y), needs(a) || needs(b), [this, a, b, out]() {
    const Tensor<T>& dy = nodes_[out].grad;
    if (needs(a)) accumulate(grad_buffer(a), dy);
    if (needs(b)) accumulate(grad_buffer(b), dy);
  });
}

template <typename T>
void Graph<T>::backward(std::span<const Seed> seeds) {
  for (const Seed& s : seeds) {
    if (!(s.grad.shape == value(s.var).shape)) {
      shape_error("backward", "seed " + s.grad.shape.str() + " vs value " + value(s.var).shape.str());
    }
    if (!needs(s.var)) continue;
    accumulate(grad_buffer(s.var), s.grad);
  }
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.back) n.back();
    if (n.param) accumulate(n.param->grad, n.grad);
  }
}

template <typename T>
void Graph<T>::backward(Var out, const Tensor<T>& seed) {
  const Seed s{out, seed};
  backward(std::span<const Seed>(&s, 1));
}

template class Graph<float>;
template class Graph<double>;

}  // namespace hmgdyn::nn
