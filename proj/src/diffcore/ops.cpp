#include "facetts/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "facetts/common/errors.hpp"

namespace facetts::dc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ContractViolation(std::string(op) + ": " + what);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_rank(const Tensor& x, std::size_t r, const char* op) {
  require(x.rank() == r, op, "expected rank " + std::to_string(r) + ", got " + shape_str(x.shape()));
}

inline Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <class F, class D>
Tensor unary(const Tensor& x, F f, D deriv) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return detail::make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

std::size_t row_size(const Tensor& x) {
  require(x.rank() >= 1 && x.dim(0) > 0, "row_size", "tensor needs a non-empty leading axis");
  return x.size() / x.dim(0);
}

// Convolution geometry over a [C, H, W] input.
struct ConvGeom {
  std::size_t cin, h, w, kh, kw, sh, sw, ph, pw, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t positions() const { return ho * wo; }
};

void im2col(const double* x, const ConvGeom& g, double* col) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* dst = col + ((c * g.kh + ki) * g.kw + kj) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.sh + ki) - static_cast<long>(g.ph);
          double* row = dst + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(row, row + g.wo, 0.0);
            continue;
          }
          const double* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.sw + kj) - static_cast<long>(g.pw);
            row[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeom& g, double* x) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* src = col + ((c * g.kh + ki) * g.kw + kj) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.sh + ki) - static_cast<long>(g.ph);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* dst = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const double* row = src + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.sw + kj) - static_cast<long>(g.pw);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

Tensor conv_core(const Tensor& x, const Tensor& w, const Tensor& b, const ConvGeom& g, std::size_t cout,
                 Shape out_shape) {
  const std::size_t K = g.patch();
  const std::size_t P = g.positions();
  std::vector<double> col(K * P);
  im2col(x.data().data(), g, col.data());
  std::vector<double> out(cout * P);
  Map(out.data(), cout, P).noalias() = MapC(w.data().data(), cout, K) * MapC(col.data(), K, P);
  if (b.defined()) {
    const auto bias = b.data();
    for (std::size_t o = 0; o < cout; ++o) {
      double* row = out.data() + o * P;
      for (std::size_t p = 0; p < P; ++p) row[p] += bias[o];
    }
  }
  std::vector<Tensor> inputs{x, w};
  const bool has_bias = b.defined();
  if (has_bias) inputs.push_back(b);
  return detail::make_result(std::move(out_shape), std::move(out), std::move(inputs), [g, cout, has_bias](Node& self) {
    const std::size_t K = g.patch();
    const std::size_t P = g.positions();
    Node& xn = parent(self, 0);
    Node& wn = parent(self, 1);
    MapC gout(self.grad.data(), cout, P);
    if (wn.requires_grad) {
      std::vector<double> col(K * P);
      im2col(xn.value.data(), g, col.data());
      Map(wn.grad.data(), cout, K).noalias() += gout * MapC(col.data(), K, P).transpose();
    }
    if (has_bias) {
      Node& bn = parent(self, 2);
      if (bn.requires_grad) {
        // Plain loop: Eigen's vectorized reduction order depends on buffer alignment.
        for (std::size_t o = 0; o < cout; ++o) {
          double acc = 0.0;
          for (std::size_t q = 0; q < P; ++q) acc += self.grad[o * P + q];
          bn.grad[o] += acc;
        }
      }
    }
    if (xn.requires_grad) {
      std::vector<double> dcol(K * P);
      Map(dcol.data(), K, P).noalias() = MapC(wn.value.data(), cout, K).transpose() * gout;
      col2im_add(dcol.data(), g, xn.grad.data());
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double c) {
  return unary(x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor shift(const Tensor& x, double c) {
  return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  require(s.size() == 1, "mul_scalar", "second operand must hold one value");
  const double c = s.data()[0];
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * c;
  return detail::make_result(x.shape(), std::move(out), {x, s}, [](Node& self) {
    Node& px = parent(self, 0);
    Node& ps = parent(self, 1);
    if (px.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i] * ps.value[0];
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * px.value[i];
      ps.grad[0] += acc;
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  const auto in = x.data();
  const double s = std::accumulate(in.begin(), in.end(), 0.0);
  return detail::make_result({}, {s}, {x}, [](Node& self) {
    Node& p = parent(self, 0);
    for (auto& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.size() > 0, "mean", "empty tensor");
  const auto in = x.data();
  const double n = static_cast<double>(in.size());
  const double s = std::accumulate(in.begin(), in.end(), 0.0) / n;
  return detail::make_result({}, {s}, {x}, [n](Node& self) {
    Node& p = parent(self, 0);
    const double g = self.grad[0] / n;
    for (auto& v : p.grad) v += g;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape", shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return detail::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(x.size());
  Map(out.data(), c, r) = MapC(x.data().data(), r, c).transpose();
  return detail::make_result({c, r}, std::move(out), {x}, [r, c](Node& self) {
    Node& p = parent(self, 0);
    Map(p.grad.data(), r, c) += MapC(self.grad.data(), c, r).transpose();
  });
}

Tensor add_channel(const Tensor& x, const Tensor& v) {
  require(x.rank() >= 1 && v.rank() == 1 && v.dim(0) == x.dim(0), "add_channel",
          "shapes " + shape_str(x.shape()) + " and " + shape_str(v.shape()));
  const std::size_t C = x.dim(0), inner = x.size() / C;
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bias = v.data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] += bias[c];
  }
  return detail::make_result(x.shape(), std::move(out), {x, v}, [C, inner](Node& self) {
    Node& px = parent(self, 0);
    Node& pv = parent(self, 1);
    if (px.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pv.requires_grad) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner; ++i) acc += self.grad[c * inner + i];
        pv.grad[c] += acc;
      }
    }
  });
}

Tensor add_row(const Tensor& x, const Tensor& v) {
  require(x.rank() == 2 && v.rank() == 1 && v.dim(0) == x.dim(1), "add_row",
          "shapes " + shape_str(x.shape()) + " and " + shape_str(v.shape()));
  const std::size_t R = x.dim(0), C = x.dim(1);
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bias = v.data();
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] += bias[c];
  }
  return detail::make_result(x.shape(), std::move(out), {x, v}, [R, C](Node& self) {
    Node& px = parent(self, 0);
    Node& pv = parent(self, 1);
    if (px.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pv.requires_grad) {
      for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) pv.grad[c] += self.grad[r * C + c];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  require(a.dim(1) == b.dim(0), "matmul", "inner extents " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  std::vector<double> out(M * N);
  Map(out.data(), M, N).noalias() = MapC(a.data().data(), M, K) * MapC(b.data().data(), K, N);
  return detail::make_result({M, N}, std::move(out), {a, b}, [M, K, N](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    MapC g(self.grad.data(), M, N);
    if (pa.requires_grad) Map(pa.grad.data(), M, K).noalias() += g * MapC(pb.value.data(), K, N).transpose();
    if (pb.requires_grad) Map(pb.grad.data(), K, N).noalias() += MapC(pa.value.data(), M, K).transpose() * g;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  require(x.dim(1) == w.dim(1), "linear", "input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const std::size_t N = x.dim(0), In = x.dim(1), Out = w.dim(0);
  if (b.defined()) require(b.rank() == 1 && b.dim(0) == Out, "linear", "bias shape " + shape_str(b.shape()));
  std::vector<double> out(N * Out);
  Map y(out.data(), N, Out);
  y.noalias() = MapC(x.data().data(), N, In) * MapC(w.data().data(), Out, In).transpose();
  if (b.defined()) {
    const auto bias = b.data();
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t o = 0; o < Out; ++o) out[n * Out + o] += bias[o];
    }
  }
  std::vector<Tensor> inputs{x, w};
  const bool has_bias = b.defined();
  if (has_bias) inputs.push_back(b);
  return detail::make_result({N, Out}, std::move(out), std::move(inputs), [N, In, Out, has_bias](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    MapC g(self.grad.data(), N, Out);
    if (px.requires_grad) Map(px.grad.data(), N, In).noalias() += g * MapC(pw.value.data(), Out, In);
    if (pw.requires_grad) Map(pw.grad.data(), Out, In).noalias() += g.transpose() * MapC(px.value.data(), N, In);
    if (has_bias) {
      Node& pb = parent(self, 2);
      if (pb.requires_grad) {
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t o = 0; o < Out; ++o) pb.grad[o] += self.grad[n * Out + o];
        }
      }
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t pad) {
  require_rank(x, 2, "conv1d");
  require_rank(w, 3, "conv1d");
  require(w.dim(1) == x.dim(0), "conv1d", "channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
  const std::size_t L = x.dim(1), K = w.dim(2);
  require(L + 2 * pad >= K, "conv1d", "input shorter than kernel");
  ConvGeom g{x.dim(0), 1, L, 1, K, 1, 1, 0, pad, 1, L + 2 * pad - K + 1};
  if (b.defined()) require(b.rank() == 1 && b.dim(0) == w.dim(0), "conv1d", "bias shape");
  return conv_core(x, w, b, g, w.dim(0), {w.dim(0), g.wo});
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  require_rank(x, 3, "conv2d");
  require_rank(w, 4, "conv2d");
  require(stride >= 1, "conv2d", "stride must be positive");
  require(w.dim(1) == x.dim(0), "conv2d", "channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
  const std::size_t H = x.dim(1), W = x.dim(2), KH = w.dim(2), KW = w.dim(3);
  require(H + 2 * pad >= KH && W + 2 * pad >= KW, "conv2d", "input smaller than kernel");
  ConvGeom g{x.dim(0), H, W, KH, KW, stride, stride, pad, pad, (H + 2 * pad - KH) / stride + 1,
             (W + 2 * pad - KW) / stride + 1};
  if (b.defined()) require(b.rank() == 1 && b.dim(0) == w.dim(0), "conv2d", "bias shape");
  return conv_core(x, w, b, g, w.dim(0), {w.dim(0), g.ho, g.wo});
}

Tensor avg_pool2d(const Tensor& x, std::size_t ph, std::size_t pw) {
  require_rank(x, 3, "avg_pool2d");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t Ho = H / ph, Wo = W / pw;
  require(Ho > 0 && Wo > 0, "avg_pool2d", "input " + shape_str(x.shape()) + " too small to pool");
  const double inv = 1.0 / static_cast<double>(ph * pw);
  std::vector<double> out(C * Ho * Wo, 0.0);
  const auto in = x.data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < Ho * ph; ++i) {
      const double* src = in.data() + (c * H + i) * W;
      double* dst = out.data() + (c * Ho + i / ph) * Wo;
      for (std::size_t j = 0; j < Wo * pw; ++j) dst[j / pw] += src[j] * inv;
    }
  }
  return detail::make_result({C, Ho, Wo}, std::move(out), {x}, [C, H, W, Ho, Wo, ph, pw, inv](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < Ho * ph; ++i) {
        double* dst = p.grad.data() + (c * H + i) * W;
        const double* g = self.grad.data() + (c * Ho + i / ph) * Wo;
        for (std::size_t j = 0; j < Wo * pw; ++j) dst[j] += g[j / pw] * inv;
      }
    }
  });
}

Tensor upsample_nearest(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "upsample_nearest");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  require(out_h >= H && out_w >= W, "upsample_nearest", "target smaller than input");
  std::vector<std::size_t> rmap(out_h), cmap(out_w);
  for (std::size_t i = 0; i < out_h; ++i) rmap[i] = i * H / out_h;
  for (std::size_t j = 0; j < out_w; ++j) cmap[j] = j * W / out_w;
  std::vector<double> out(C * out_h * out_w);
  const auto in = x.data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const double* src = in.data() + (c * H + rmap[i]) * W;
      double* dst = out.data() + (c * out_h + i) * out_w;
      for (std::size_t j = 0; j < out_w; ++j) dst[j] = src[cmap[j]];
    }
  }
  return detail::make_result({C, out_h, out_w}, std::move(out), {x},
                             [C, H, W, out_h, out_w, rmap, cmap](Node& self) {
                               Node& p = parent(self, 0);
                               for (std::size_t c = 0; c < C; ++c) {
                                 for (std::size_t i = 0; i < out_h; ++i) {
                                   double* dst = p.grad.data() + (c * H + rmap[i]) * W;
                                   const double* g = self.grad.data() + (c * out_h + i) * out_w;
                                   for (std::size_t j = 0; j < out_w; ++j) dst[cmap[j]] += g[j];
                                 }
                               }
                             });
}

Tensor global_avg_pool(const Tensor& x) {
  require(x.rank() >= 2, "global_avg_pool", "needs rank >= 2");
  const std::size_t C = x.dim(0), inner = x.size() / C;
  require(inner > 0, "global_avg_pool", "empty spatial extent");
  const double inv = 1.0 / static_cast<double>(inner);
  std::vector<double> out(C);
  const auto in = x.data();
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += in[c * inner + i];
    out[c] = acc * inv;
  }
  return detail::make_result({C}, std::move(out), {x}, [C, inner, inv](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t c = 0; c < C; ++c) {
      const double g = self.grad[c] * inv;
      for (std::size_t i = 0; i < inner; ++i) p.grad[c * inner + i] += g;
    }
  });
}

Tensor concat0(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat0", "no inputs");
  Shape shape = parts.front().shape();
  require(!shape.empty(), "concat0", "scalar inputs");
  const Shape tail(shape.begin() + 1, shape.end());
  std::size_t rows = 0;
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require(Shape(p.shape().begin() + 1, p.shape().end()) == tail, "concat0",
            "trailing extents differ: " + shape_str(p.shape()));
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    rows += p.dim(0);
  }
  shape[0] = rows;
  return detail::make_result(std::move(shape), std::move(out), parts, [offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[offsets[k] + i];
    }
  });
}

Tensor slice0(const Tensor& x, std::size_t start, std::size_t count) {
  require(x.rank() >= 1 && start + count <= x.dim(0) && count > 0, "slice0",
          "range [" + std::to_string(start) + ", " + std::to_string(start + count) + ") out of " +
              shape_str(x.shape()));
  const std::size_t inner = row_size(x);
  Shape shape = x.shape();
  shape[0] = count;
  std::vector<double> out(x.data().begin() + start * inner, x.data().begin() + (start + count) * inner);
  return detail::make_result(std::move(shape), std::move(out), {x}, [start, inner](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[start * inner + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require(x.rank() >= 1, "gather_rows", "needs rank >= 1");
  require(!index.empty(), "gather_rows", "empty index");
  const std::size_t R = x.dim(0), inner = row_size(x);
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * inner);
  const auto in = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < R, "gather_rows", "row index " + std::to_string(idx[i]) + " out of range");
    std::copy_n(in.begin() + idx[i] * inner, inner, out.begin() + i * inner);
  }
  Shape shape = x.shape();
  shape[0] = idx.size();
  return detail::make_result(std::move(shape), std::move(out), {x}, [idx, inner](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t k = 0; k < inner; ++k) p.grad[idx[i] * inner + k] += self.grad[i * inner + k];
    }
  });
}

Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank(x, 2, "layer_norm_channels");
  const std::size_t C = x.dim(0), L = x.dim(1);
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, "layer_norm_channels", "affine shape");
  const auto in = x.data(), gm = gamma.data(), bt = beta.data();
  std::vector<double> out(C * L), xhat(C * L), inv_std(L);
  for (std::size_t l = 0; l < L; ++l) {
    double m = 0.0;
    for (std::size_t c = 0; c < C; ++c) m += in[c * L + l];
    m /= static_cast<double>(C);
    double v = 0.0;
    for (std::size_t c = 0; c < C; ++c) v += (in[c * L + l] - m) * (in[c * L + l] - m);
    v /= static_cast<double>(C);
    inv_std[l] = 1.0 / std::sqrt(v + eps);
    for (std::size_t c = 0; c < C; ++c) {
      xhat[c * L + l] = (in[c * L + l] - m) * inv_std[l];
      out[c * L + l] = gm[c] * xhat[c * L + l] + bt[c];
    }
  }
  return detail::make_result(x.shape(), std::move(out), {x, gamma, beta},
                             [C, L, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                               Node& px = parent(self, 0);
                               Node& pg = parent(self, 1);
                               Node& pb = parent(self, 2);
                               const auto& g = self.grad;
                               if (pg.requires_grad || pb.requires_grad) {
                                 for (std::size_t c = 0; c < C; ++c) {
                                   double dg = 0.0, db = 0.0;
                                   for (std::size_t l = 0; l < L; ++l) {
                                     dg += g[c * L + l] * xhat[c * L + l];
                                     db += g[c * L + l];
                                   }
                                   if (pg.requires_grad) pg.grad[c] += dg;
                                   if (pb.requires_grad) pb.grad[c] += db;
                                 }
                               }
                               if (!px.requires_grad) return;
                               const double invC = 1.0 / static_cast<double>(C);
                               for (std::size_t l = 0; l < L; ++l) {
                                 double m1 = 0.0, m2 = 0.0;
                                 for (std::size_t c = 0; c < C; ++c) {
                                   const double d = g[c * L + l] * pg.value[c];
                                   m1 += d;
                                   m2 += d * xhat[c * L + l];
                                 }
                                 m1 *= invC;
                                 m2 *= invC;
                                 for (std::size_t c = 0; c < C; ++c) {
                                   const double d = g[c * L + l] * pg.value[c];
                                   px.grad[c * L + l] += inv_std[l] * (d - m1 - xhat[c * L + l] * m2);
                                 }
                               }
                             });
}

Tensor l2_normalize(const Tensor& x) {
  const auto in = x.data();
  double ss = 0.0;
  for (double v : in) ss += v * v;
  const double n = std::sqrt(ss);
  require(n > 0.0 && std::isfinite(n), "l2_normalize", "zero or non-finite norm");
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] / n;
  return detail::make_result(x.shape(), std::move(out), {x}, [n](Node& self) {
    Node& p = parent(self, 0);
    double dot = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.value[i];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += (self.grad[i] - self.value[i] * dot) / n;
  });
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets) {
  require_rank(logits, 2, "cross_entropy_rows");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  require(targets.size() == N, "cross_entropy_rows", "one target per row required");
  const auto z = logits.data();
  std::vector<double> prob(N * K);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    require(tgt[i] < K, "cross_entropy_rows", "target out of range");
    const double* row = z.data() + i * K;
    const double mx = *std::max_element(row, row + K);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(row[k] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t k = 0; k < K; ++k) prob[i * K + k] = std::exp(row[k] - lse);
    loss += lse - row[tgt[i]];
  }
  loss /= static_cast<double>(N);
  return detail::make_result({}, {loss}, {logits}, [N, K, prob = std::move(prob), tgt](Node& self) {
    Node& p = parent(self, 0);
    const double g = self.grad[0] / static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t k = 0; k < K; ++k) {
        p.grad[i * K + k] += g * (prob[i * K + k] - (k == tgt[i] ? 1.0 : 0.0));
      }
    }
  });
}

}  // namespace facetts::dc
