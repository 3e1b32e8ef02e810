#include "voyagecast/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace voyagecast::nn {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void require_width(const Tensor& x, std::size_t width, const std::string& who) {
  require_rank3(x, who.c_str());
  if (x.dim(2) != width) {
    throw std::invalid_argument(who + ": expected " + std::to_string(width) + " features, got " +
                                std::to_string(x.dim(2)));
  }
}

}  // namespace

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& w : t.values()) w = rng.uniform(-a, a);
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
               std::size_t dilation, std::size_t pad_left, std::size_t pad_right)
    : weight(name + ".weight", {out, kernel, in}, true),
      bias(name + ".bias", {out}),
      in_(in),
      out_(out),
      kernel_(kernel),
      stride_(stride),
      dilation_(dilation),
      pad_left_(pad_left),
      pad_right_(pad_right) {
  if (in == 0 || out == 0 || kernel == 0 || stride == 0 || dilation == 0) {
    throw std::invalid_argument("conv1d: sizes, stride and dilation must be positive");
  }
}

Conv1d Conv1d::same(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation) {
  const std::size_t total = dilation * (kernel - 1);
  return Conv1d(std::move(name), in, out, kernel, 1, dilation, total / 2, total - total / 2);
}

std::size_t Conv1d::output_length(std::size_t t) const {
  const std::size_t span = dilation_ * (kernel_ - 1) + 1;
  const std::size_t padded = t + pad_left_ + pad_right_;
  if (padded < span) {
    throw std::invalid_argument("conv1d: kernel span " + std::to_string(span) + " exceeds padded length " +
                                std::to_string(padded));
  }
  return (padded - span) / stride_ + 1;
}

void Conv1d::init(Rng& rng) {
  glorot_uniform(weight.value, kernel_ * in_, kernel_ * out_, rng);
  bias.value.fill(0.0);
}

Tensor Conv1d::forward(const Tensor& x, Mode) {
  require_width(x, in_, weight.name);
  x_ = x;
  const std::size_t nb = x.dim(0), nt = x.dim(1), no = output_length(nt);
  Tensor y({nb, no, out_});
  const double* w = weight.value.data();
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = 0; i < no; ++i) {
      double* yo = &y.at(b, i, 0);
      for (std::size_t m = 0; m < out_; ++m) yo[m] = bias.value[m];
      for (std::size_t j = 0; j < kernel_; ++j) {
        const auto src = static_cast<std::ptrdiff_t>(i * stride_ + j * dilation_) -
                         static_cast<std::ptrdiff_t>(pad_left_);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(nt)) continue;
        const double* xi = &x.at(b, static_cast<std::size_t>(src), 0);
        for (std::size_t m = 0; m < out_; ++m) {
          const double* wm = w + (m * kernel_ + j) * in_;
          double acc = 0.0;
          for (std::size_t n = 0; n < in_; ++n) acc += wm[n] * xi[n];
          yo[m] += acc;
        }
      }
    }
  }
  return y;
}

Tensor Conv1d::backward(const Tensor& dy) {
  const std::size_t nb = x_.dim(0), nt = x_.dim(1), no = dy.dim(1);
  Tensor dx(x_.shape());
  const double* w = weight.value.data();
  double* dw = weight.grad.data();
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = 0; i < no; ++i) {
      const double* g = &dy.at(b, i, 0);
      for (std::size_t m = 0; m < out_; ++m) bias.grad[m] += g[m];
      for (std::size_t j = 0; j < kernel_; ++j) {
        const auto src = static_cast<std::ptrdiff_t>(i * stride_ + j * dilation_) -
                         static_cast<std::ptrdiff_t>(pad_left_);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(nt)) continue;
        const double* xi = &x_.at(b, static_cast<std::size_t>(src), 0);
        double* dxi = &dx.at(b, static_cast<std::size_t>(src), 0);
        for (std::size_t m = 0; m < out_; ++m) {
          const double gm = g[m];
          const double* wm = w + (m * kernel_ + j) * in_;
          double* dwm = dw + (m * kernel_ + j) * in_;
          for (std::size_t n = 0; n < in_; ++n) {
            dwm[n] += gm * xi[n];
            dxi[n] += gm * wm[n];
          }
        }
      }
    }
  }
  return dx;
}

void Conv1d::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ------------------------------------------------------ BatchNormMaxPool

BatchNormMaxPool::BatchNormMaxPool(std::string name, std::size_t channels, std::size_t pool, double eps,
                                   double momentum)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean({channels}, 0.0),
      running_var({channels}, 1.0),
      name_(std::move(name)),
      channels_(channels),
      pool_(pool),
      eps_(eps),
      momentum_(momentum) {
  if (pool == 0) throw std::invalid_argument("batchnorm: pool size must be positive");
  gamma.value.fill(1.0);
}

Tensor BatchNormMaxPool::forward(const Tensor& x, Mode mode) {
  require_width(x, channels_, name_);
  const std::size_t nb = x.dim(0), nt = x.dim(1), nc = channels_;
  if (nt < pool_) throw std::invalid_argument(name_ + ": sequence shorter than the pool window");
  mode_ = mode;
  in_shape_ = x.shape();
  const double count = static_cast<double>(nb * nt);

  std::vector<double> mean(nc, 0.0), var(nc, 0.0);
  if (mode == Mode::Train) {
    for (std::size_t k = 0; k < x.size(); ++k) mean[k % nc] += x[k];
    for (auto& m : mean) m /= count;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double d = x[k] - mean[k % nc];
      var[k % nc] += d * d;
    }
    for (auto& v : var) v /= count;
    for (std::size_t c = 0; c < nc; ++c) {
      running_mean[c] = momentum_ * running_mean[c] + (1.0 - momentum_) * mean[c];
      running_var[c] = momentum_ * running_var[c] + (1.0 - momentum_) * var[c];
    }
  } else {
    mean = running_mean.values();
    var = running_var.values();
  }
  inv_std_.assign(nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + eps_);

  xhat_ = Tensor(x.shape());
  Tensor z(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t c = k % nc;
    xhat_[k] = (x[k] - mean[c]) * inv_std_[c];
    z[k] = gamma.value[c] * xhat_[k] + beta.value[c];
  }

  const std::size_t no = nt - pool_ + 1;
  Tensor y({nb, no, nc});
  argmax_.assign(y.size(), 0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = 0; i < no; ++i) {
      for (std::size_t c = 0; c < nc; ++c) {
        std::size_t best = i;
        for (std::size_t p = i + 1; p < i + pool_; ++p) {
          if (z.at(b, p, c) > z.at(b, best, c)) best = p;
        }
        const std::size_t o = (b * no + i) * nc + c;
        y[o] = z.at(b, best, c);
        argmax_[o] = (b * nt + best) * nc + c;
      }
    }
  }
  return y;
}

Tensor BatchNormMaxPool::backward(const Tensor& dy) {
  const std::size_t nc = channels_;
  Tensor dz(in_shape_);
  for (std::size_t o = 0; o < dy.size(); ++o) dz[argmax_[o]] += dy[o];

  std::vector<double> sum_g(nc, 0.0), sum_gx(nc, 0.0);
  Tensor dxhat(in_shape_);
  for (std::size_t k = 0; k < dz.size(); ++k) {
    const std::size_t c = k % nc;
    gamma.grad[c] += dz[k] * xhat_[k];
    beta.grad[c] += dz[k];
    dxhat[k] = dz[k] * gamma.value[c];
    sum_g[c] += dxhat[k];
    sum_gx[c] += dxhat[k] * xhat_[k];
  }
  Tensor dx(in_shape_);
  if (mode_ == Mode::Train) {
    const double count = static_cast<double>(in_shape_[0] * in_shape_[1]);
    for (std::size_t k = 0; k < dx.size(); ++k) {
      const std::size_t c = k % nc;
      dx[k] = inv_std_[c] * (dxhat[k] - sum_g[c] / count - xhat_[k] * sum_gx[c] / count);
    }
  } else {
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] = dxhat[k] * inv_std_[k % nc];
  }
  return dx;
}

void BatchNormMaxPool::collect(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

void BatchNormMaxPool::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(name_ + ".running_mean", &running_mean);
  out.emplace_back(name_ + ".running_var", &running_var);
}

// --------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  if (mode == Mode::Infer || p_ <= 0.0) {
    mask_ = Tensor();
    return x;
  }
  Rng rng(seed_);
  mask_ = Tensor(x.shape());
  const double keep = 1.0 / (1.0 - p_);
  Tensor y(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    mask_[k] = rng.bernoulli(p_) ? 0.0 : keep;
    y[k] = x[k] * mask_[k];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (mask_.empty()) return dy;
  Tensor dx(dy.shape());
  for (std::size_t k = 0; k < dy.size(); ++k) dx[k] = dy[k] * mask_[k];
  return dx;
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::string name, std::size_t in, std::size_t out, Activation act)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out), act_(act) {}

void Dense::init(Rng& rng) {
  glorot_uniform(weight.value, in_, out_, rng);
  bias.value.fill(0.0);
}

Tensor Dense::forward(const Tensor& x, Mode) {
  require_width(x, in_, weight.name);
  x_ = x;
  const std::size_t rows = x.dim(0) * x.dim(1);
  Tensor y({x.dim(0), x.dim(1), out_});
  const double* w = weight.value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in_;
    double* yr = y.data() + r * out_;
    for (std::size_t o = 0; o < out_; ++o) {
      const double* wo = w + o * in_;
      double acc = bias.value[o];
      for (std::size_t n = 0; n < in_; ++n) acc += wo[n] * xr[n];
      switch (act_) {
        case Activation::Relu: acc = acc > 0.0 ? acc : 0.0; break;
        case Activation::Sigmoid: acc = sigmoid(acc); break;
        case Activation::None: break;
      }
      yr[o] = acc;
    }
  }
  y_ = y;
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  const std::size_t rows = x_.dim(0) * x_.dim(1);
  Tensor dx(x_.shape());
  const double* w = weight.value.data();
  double* dw = weight.grad.data();
  std::vector<double> g(out_);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x_.data() + r * in_;
    const double* yr = y_.data() + r * out_;
    double* dxr = dx.data() + r * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      double d = dy[r * out_ + o];
      switch (act_) {
        case Activation::Relu: d = yr[o] > 0.0 ? d : 0.0; break;
        case Activation::Sigmoid: d *= yr[o] * (1.0 - yr[o]); break;
        case Activation::None: break;
      }
      g[o] = d;
    }
    for (std::size_t o = 0; o < out_; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      bias.grad[o] += go;
      const double* wo = w + o * in_;
      double* dwo = dw + o * in_;
      for (std::size_t n = 0; n < in_; ++n) {
        dwo[n] += go * xr[n];
        dxr[n] += go * wo[n];
      }
    }
  }
  return dx;
}

void Dense::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ------------------------------------------------------------------ Lstm

Lstm::Lstm(std::string name, std::size_t in, std::size_t units, bool reverse)
    : weight(name + ".weight", {4 * units, units + in}, true),
      bias(name + ".bias", {4 * units}),
      in_(in),
      units_(units),
      reverse_(reverse) {}

void Lstm::init(Rng& rng) {
  glorot_uniform(weight.value, units_ + in_, 4 * units_, rng);
  bias.value.fill(0.0);
  for (std::size_t j = units_; j < 2 * units_; ++j) bias.value[j] = 1.0;
}

Tensor Lstm::forward(const Tensor& x, Mode) {
  require_width(x, in_, weight.name);
  x_ = x;
  batch_ = x.dim(0);
  steps_ = x.dim(1);
  const std::size_t r = units_, cols = r + in_;
  gates_.assign(batch_ * steps_ * 4 * r, 0.0);
  cell_.assign(batch_ * steps_ * r, 0.0);
  hidden_.assign(batch_ * steps_ * r, 0.0);
  Tensor y({batch_, steps_, r});
  const double* w = weight.value.data();
  std::vector<double> u(cols), z(4 * r);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t s = 0; s < steps_; ++s) {
      const std::size_t t = reverse_ ? steps_ - 1 - s : s;
      const std::size_t bt = b * steps_ + t;
      if (s == 0) {
        std::fill(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(r), 0.0);
      } else {
        const std::size_t prev = reverse_ ? t + 1 : t - 1;
        std::copy_n(&hidden_[(b * steps_ + prev) * r], r, u.begin());
      }
      std::copy_n(&x.at(b, t, 0), in_, u.begin() + static_cast<std::ptrdiff_t>(r));
      for (std::size_t j = 0; j < 4 * r; ++j) {
        const double* wj = w + j * cols;
        double acc = bias.value[j];
        for (std::size_t n = 0; n < cols; ++n) acc += wj[n] * u[n];
        z[j] = acc;
      }
      double* g = &gates_[bt * 4 * r];
      double* c = &cell_[bt * r];
      double* h = &hidden_[bt * r];
      const double* c_prev = nullptr;
      if (s > 0) c_prev = &cell_[(b * steps_ + (reverse_ ? t + 1 : t - 1)) * r];
      for (std::size_t k = 0; k < r; ++k) {
        const double gi = sigmoid(z[k]);
        const double gf = sigmoid(z[r + k]);
        const double gc = std::tanh(z[2 * r + k]);
        const double go = sigmoid(z[3 * r + k]);
        g[k] = gi;
        g[r + k] = gf;
        g[2 * r + k] = gc;
        g[3 * r + k] = go;
        c[k] = gf * (c_prev ? c_prev[k] : 0.0) + gi * gc;
        h[k] = go * std::tanh(c[k]);
        y.at(b, t, k) = h[k];
      }
    }
  }
  return y;
}

Tensor Lstm::backward(const Tensor& dy) {
  const std::size_t r = units_, cols = r + in_;
  Tensor dx(x_.shape());
  const double* w = weight.value.data();
  double* dw = weight.grad.data();
  std::vector<double> dh_next(r), dc_next(r), dz(4 * r), u(cols), du(cols);
  for (std::size_t b = 0; b < batch_; ++b) {
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);
    for (std::size_t s = steps_; s-- > 0;) {
      const std::size_t t = reverse_ ? steps_ - 1 - s : s;
      const std::size_t bt = b * steps_ + t;
      const bool first = s == 0;
      const std::size_t prev = first ? 0 : (reverse_ ? t + 1 : t - 1);
      const double* g = &gates_[bt * 4 * r];
      const double* c = &cell_[bt * r];
      for (std::size_t k = 0; k < r; ++k) {
        const double dh = dy.at(b, t, k) + dh_next[k];
        const double tc = std::tanh(c[k]);
        const double gi = g[k], gf = g[r + k], gc = g[2 * r + k], go = g[3 * r + k];
        const double dc = dc_next[k] + dh * go * (1.0 - tc * tc);
        const double cp = first ? 0.0 : cell_[(b * steps_ + prev) * r + k];
        dz[k] = dc * gc * gi * (1.0 - gi);
        dz[r + k] = dc * cp * gf * (1.0 - gf);
        dz[2 * r + k] = dc * gi * (1.0 - gc * gc);
        dz[3 * r + k] = dh * tc * go * (1.0 - go);
        dc_next[k] = dc * gf;
      }
      if (first) {
        std::fill(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(r), 0.0);
      } else {
        std::copy_n(&hidden_[(b * steps_ + prev) * r], r, u.begin());
      }
      std::copy_n(&x_.at(b, t, 0), in_, u.begin() + static_cast<std::ptrdiff_t>(r));
      std::fill(du.begin(), du.end(), 0.0);
      for (std::size_t j = 0; j < 4 * r; ++j) {
        const double d = dz[j];
        bias.grad[j] += d;
        const double* wj = w + j * cols;
        double* dwj = dw + j * cols;
        for (std::size_t n = 0; n < cols; ++n) {
          dwj[n] += d * u[n];
          du[n] += d * wj[n];
        }
      }
      std::copy_n(du.begin(), r, dh_next.begin());
      for (std::size_t n = 0; n < in_; ++n) dx.at(b, t, n) += du[r + n];
    }
  }
  return dx;
}

void Lstm::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------- BiLstm

BiLstm::BiLstm(std::string name, std::size_t in, std::size_t units)
    : fwd(name + ".fwd", in, units, false), bwd(name + ".bwd", in, units, true) {}

void BiLstm::init(Rng& rng) {
  fwd.init(rng);
  bwd.init(rng);
}

Tensor BiLstm::forward(const Tensor& x, Mode mode) {
  Tensor a = fwd.forward(x, mode);
  const Tensor b = bwd.forward(x, mode);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

Tensor BiLstm::backward(const Tensor& dy) {
  Tensor a = fwd.backward(dy);
  const Tensor b = bwd.backward(dy);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

void BiLstm::collect(std::vector<Param*>& out) {
  fwd.collect(out);
  bwd.collect(out);
}

// ------------------------------------------------------------- Attention

Attention::Attention(std::string name, std::size_t width, double omega, std::size_t repeat)
    : weight(name + ".weight", {width, width}),
      bias(name + ".bias", {width}),
      width_(width),
      omega_(omega),
      repeat_(repeat) {}

void Attention::init(Rng& rng) {
  glorot_uniform(weight.value, width_, width_, rng);
  bias.value.fill(0.0);
}

Tensor Attention::weights_from_keys(const Tensor& keys, double omega) {
  require_rank3(keys, "attention");
  const std::size_t nb = keys.dim(0), nt = keys.dim(1), nr = keys.dim(2);
  Tensor a(keys.shape());
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t c = 0; c < nr; ++c) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < nt; ++i) {
        const double k = keys.at(b, i, c);
        const double s = k * (k + omega * static_cast<double>(i % nt));
        a.at(b, i, c) = s;
        top = std::max(top, s);
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < nt; ++i) {
        a.at(b, i, c) = std::exp(a.at(b, i, c) - top);
        sum += a.at(b, i, c);
      }
      for (std::size_t i = 0; i < nt; ++i) a.at(b, i, c) /= sum;
    }
  }
  return a;
}

Tensor Attention::forward(const Tensor& x, Mode) {
  require_width(x, width_, weight.name);
  x_ = x;
  const std::size_t nb = x.dim(0), nt = x.dim(1), nr = width_;
  k_ = Tensor(x.shape());
  const double* w = weight.value.data();
  for (std::size_t row = 0; row < nb * nt; ++row) {
    const double* xr = x.data() + row * nr;
    for (std::size_t o = 0; o < nr; ++o) {
      const double* wo = w + o * nr;
      double acc = bias.value[o];
      for (std::size_t n = 0; n < nr; ++n) acc += wo[n] * xr[n];
      k_[row * nr + o] = acc;
    }
  }
  a_ = weights_from_keys(k_, omega_);
  Tensor y({nb, repeat_, nr});
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t c = 0; c < nr; ++c) {
      double ctx = 0.0;
      for (std::size_t i = 0; i < nt; ++i) ctx += a_.at(b, i, c) * x.at(b, i, c);
      for (std::size_t z = 0; z < repeat_; ++z) y.at(b, z, c) = ctx;
    }
  }
  return y;
}

Tensor Attention::backward(const Tensor& dy) {
  const std::size_t nb = x_.dim(0), nt = x_.dim(1), nr = width_;
  Tensor dx(x_.shape());
  Tensor dk(x_.shape());
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t c = 0; c < nr; ++c) {
      double dctx = 0.0;
      for (std::size_t z = 0; z < dy.dim(1); ++z) dctx += dy.at(b, z, c);
      double dot = 0.0;
      for (std::size_t i = 0; i < nt; ++i) dot += a_.at(b, i, c) * dctx * x_.at(b, i, c);
      for (std::size_t i = 0; i < nt; ++i) {
        const double ai = a_.at(b, i, c);
        dx.at(b, i, c) += ai * dctx;
        const double ds = ai * (dctx * x_.at(b, i, c) - dot);
        const double k = k_.at(b, i, c);
        dk.at(b, i, c) = ds * (2.0 * k + omega_ * static_cast<double>(i % nt));
      }
    }
  }
  const double* w = weight.value.data();
  double* dw = weight.grad.data();
  for (std::size_t row = 0; row < nb * nt; ++row) {
    const double* xr = x_.data() + row * nr;
    double* dxr = dx.data() + row * nr;
    for (std::size_t o = 0; o < nr; ++o) {
      const double g = dk[row * nr + o];
      bias.grad[o] += g;
      const double* wo = w + o * nr;
      double* dwo = dw + o * nr;
      for (std::size_t n = 0; n < nr; ++n) {
        dwo[n] += g * xr[n];
        dxr[n] += g * wo[n];
      }
    }
  }
  return dx;
}

void Attention::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ------------------------------------------------------------ RepeatLast

Tensor RepeatLast::forward(const Tensor& x, Mode) {
  require_rank3(x, "repeat_last");
  in_shape_ = x.shape();
  const std::size_t nb = x.dim(0), nt = x.dim(1), nc = x.dim(2);
  Tensor y({nb, repeat_, nc});
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t z = 0; z < repeat_; ++z) {
      for (std::size_t c = 0; c < nc; ++c) y.at(b, z, c) = x.at(b, nt - 1, c);
    }
  }
  return y;
}

Tensor RepeatLast::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  const std::size_t nb = in_shape_[0], nt = in_shape_[1], nc = in_shape_[2];
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t z = 0; z < dy.dim(1); ++z) {
      for (std::size_t c = 0; c < nc; ++c) dx.at(b, nt - 1, c) += dy.at(b, z, c);
    }
  }
  return dx;
}

}  // namespace voyagecast::nn
