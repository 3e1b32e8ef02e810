#pragma once

// Central finite-difference checks against backprop, shared by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "voyagecast/nn/layers.hpp"
#include "voyagecast/nn/model.hpp"
#include "voyagecast/rng.hpp"

namespace gradcheck {

using voyagecast::Rng;
using namespace voyagecast::nn;

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

inline void randomize(Layer& layer, Rng& rng) {
  std::vector<Param*> ps;
  layer.collect(ps);
  for (Param* p : ps) {
    for (auto& v : p->value.values()) v = rng.uniform(-0.8, 0.8);
  }
}

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

/// Largest relative error between backprop and central differences of
/// f = sum(c * y) over every parameter and input element.
inline double layer_gradient_error(Layer& layer, Tensor x, Mode mode, Rng& rng) {
  const Tensor y0 = layer.forward(x, mode);
  const Tensor c = random_tensor(y0.shape(), rng);
  auto objective = [&](const Tensor& in) {
    const Tensor y = layer.forward(in, mode);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += c[k] * y[k];
    return s;
  };
  std::vector<Param*> ps;
  layer.collect(ps);
  for (Param* p : ps) p->grad.fill(0.0);
  layer.forward(x, mode);
  const Tensor dx = layer.backward(c);

  const double eps = 1e-5;
  double worst = 0.0;
  for (Param* p : ps) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double keep = p->value[k];
      p->value[k] = keep + eps;
      const double up = objective(x);
      p->value[k] = keep - eps;
      const double down = objective(x);
      p->value[k] = keep;
      worst = std::max(worst, rel_error(p->grad[k], (up - down) / (2 * eps)));
    }
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + eps;
    const double up = objective(x);
    x[k] = keep - eps;
    const double down = objective(x);
    x[k] = keep;
    worst = std::max(worst, rel_error(dx[k], (up - down) / (2 * eps)));
  }
  return worst;
}

/// Same check for a whole model on the MAE loss plus the L2 penalty, over
/// every parameter. Inputs (3, rows, width), targets (3, output_rows, 2).
inline double model_gradient_error(Model& model, Rng& rng) {
  const auto& cfg = model.config();
  const Tensor x = random_tensor({3, cfg.input_rows, cfg.input_width}, rng);
  const Tensor y = random_tensor({3, cfg.output_rows, 2}, rng, 0.5);
  Tensor target(y.shape());
  for (std::size_t k = 0; k < y.size(); ++k) target[k] = 0.5 + y[k];

  auto objective = [&]() {
    model.set_dropout_stream(3);
    return mae_loss(model.forward(x, Mode::Train), target) + model.penalty(false);
  };
  model.zero_grad();
  model.set_dropout_stream(3);
  Tensor grad;
  mae_loss(model.forward(x, Mode::Train), target, &grad);
  model.penalty(true);
  model.backward(grad);

  const double eps = 1e-6;
  double worst = 0.0;
  for (Param* p : model.params()) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double keep = p->value[k];
      p->value[k] = keep + eps;
      const double up = objective();
      p->value[k] = keep - eps;
      const double down = objective();
      p->value[k] = keep;
      worst = std::max(worst, rel_error(p->grad[k], (up - down) / (2 * eps)));
    }
  }
  return worst;
}

}  // namespace gradcheck
