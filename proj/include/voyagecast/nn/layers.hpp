#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "voyagecast/nn/tensor.hpp"
#include "voyagecast/rng.hpp"

namespace voyagecast::nn {

enum class Mode { Train, Infer };

/// A trainable tensor with its gradient and Adam moments.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  bool l2 = false;  // included in the weight penalty

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape, bool penalized = false)
      : name(std::move(n)), value(shape), grad(shape), m(shape), v(std::move(shape)), l2(penalized) {}
};

/// Fan-balanced uniform init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Every layer caches what its backward pass needs from the latest forward
/// call; backward accumulates into parameter gradients and returns the
/// gradient with respect to the layer input.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect(std::vector<Param*>& out) { (void)out; }
  /// Non-trainable state that still belongs in a checkpoint.
  virtual void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) { (void)out; }
};

/// 1-D convolution over time. Weights are (out, kernel, in); output length is
/// floor((T + pad_left + pad_right - dilation * (kernel - 1) - 1) / stride) + 1.
class Conv1d : public Layer {
 public:
  Conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
         std::size_t dilation, std::size_t pad_left, std::size_t pad_right);

  /// Stride 1 with padding that keeps the sequence length.
  static Conv1d same(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation);

  std::size_t output_length(std::size_t t) const;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  void collect(std::vector<Param*>& out) override;
  void init(Rng& rng);

  Param weight;
  Param bias;

 private:
  std::size_t in_, out_, kernel_, stride_, dilation_, pad_left_, pad_right_;
  Tensor x_;
};

/// Batch normalization per channel followed by max pooling over windows of
/// `pool` consecutive steps at stride 1 (length T - pool + 1). Training uses
/// batch statistics and updates the running estimates as
/// running = momentum * running + (1 - momentum) * batch.
class BatchNormMaxPool : public Layer {
 public:
  BatchNormMaxPool(std::string name, std::size_t channels, std::size_t pool, double eps = 1e-5,
                   double momentum = 0.99);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  void collect(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;

  Param gamma;
  Param beta;
  Tensor running_mean;
  Tensor running_var;

 private:
  std::string name_;
  std::size_t channels_, pool_;
  double eps_, momentum_;
  Mode mode_ = Mode::Infer;
  Tensor xhat_;
  std::vector<double> inv_std_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

/// Inverted dropout. The mask stream is fixed by `reseed`, so repeated
/// forward calls between reseeds use the same mask.
class Dropout : public Layer {
 public:
  explicit Dropout(double p) : p_(p) {}
  void reseed(std::uint64_t seed) { seed_ = seed; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;

 private:
  double p_;
  std::uint64_t seed_ = 0;
  Tensor mask_;
};

/// Position-wise affine map on the last axis, optionally followed by ReLU
/// or the logistic function.
class Dense : public Layer {
 public:
  enum class Activation { None, Relu, Sigmoid };
  Dense(std::string name, std::size_t in, std::size_t out, Activation act);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  void collect(std::vector<Param*>& out) override;
  void init(Rng& rng);

  Param weight;  // (out, in)
  Param bias;

 private:
  std::size_t in_, out_;
  Activation act_;
  Tensor x_, y_;
};

/// LSTM over (batch, time, in) returning every hidden state. Gate rows of
/// the (4r, r + in) weight are ordered input, forget, candidate, output and
/// act on [h_prev, x]. A reversed layer reads the sequence back to front
/// and writes each state at its own time index.
class Lstm : public Layer {
 public:
  Lstm(std::string name, std::size_t in, std::size_t units, bool reverse);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  void collect(std::vector<Param*>& out) override;
  void init(Rng& rng);

  Param weight;
  Param bias;

 private:
  std::size_t in_, units_;
  bool reverse_;
  std::size_t batch_ = 0, steps_ = 0;
  Tensor x_;
  // Per (b, t): activated gates (4r), cell state and hidden state.
  std::vector<double> gates_, cell_, hidden_;
};

/// Forward and reversed LSTMs whose hidden states are summed.
class BiLstm : public Layer {
 public:
  BiLstm(std::string name, std::size_t in, std::size_t units);
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  void collect(std::vector<Param*>& out) override;
  void init(Rng& rng);

  Lstm fwd;
  Lstm bwd;
};

/// Position-aware attention. Keys K = xW + b, scores S = K * (K + omega * i)
/// at step i (elementwise), weights softmax over time per channel, and the
/// context sum_i A[i] * x[i] repeated `repeat` times along time.
class Attention : public Layer {
 public:
  Attention(std::string name, std::size_t width, double omega, std::size_t repeat);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  void collect(std::vector<Param*>& out) override;
  void init(Rng& rng);

  /// Attention weights (batch, time, width) of the latest forward call.
  const Tensor& weights() const { return a_; }

  /// Scores and weights for given keys, without the projection.
  static Tensor weights_from_keys(const Tensor& keys, double omega);

  Param weight;  // (width, width)
  Param bias;

 private:
  std::size_t width_;
  double omega_;
  std::size_t repeat_;
  Tensor x_, k_, a_;
};

/// The last time step repeated `repeat` times.
class RepeatLast : public Layer {
 public:
  explicit RepeatLast(std::size_t repeat) : repeat_(repeat) {}
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::size_t repeat_;
  std::vector<std::size_t> in_shape_;
};

}  // namespace voyagecast::nn
