#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "voyagecast/nn/layers.hpp"

namespace voyagecast::nn {

/// C1 is the full network. C2 drops the dilated branch of every block, C3
/// replaces attention with the last encoder state, C4 does both, and C5 is
/// a unidirectional recurrent encoder-decoder with neither convolutions nor
/// attention.
enum class Ablation { C1, C2, C3, C4, C5 };

std::string_view to_string(Ablation a);
/// Accepts "C1" to "C5" (case-insensitive). Throws std::invalid_argument.
Ablation parse_ablation(std::string_view s);

inline constexpr std::array<Ablation, 5> kAllAblations{Ablation::C1, Ablation::C2, Ablation::C3, Ablation::C4,
                                                       Ablation::C5};

struct ModelConfig {
  Ablation ablation = Ablation::C1;
  std::size_t input_width = 30;
  std::size_t input_rows = 19;
  std::size_t output_rows = 72;
  std::vector<std::size_t> filters{256, 256, 128};
  std::vector<std::size_t> kernels{7, 5, 5};
  std::size_t dilation = 2;
  std::size_t pool = 2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.99;
  double dropout = 0.1;
  std::size_t lstm_units = 128;
  double omega = 0.25;
  std::vector<std::size_t> dense{128, 128, 64};
  double l2 = 0.0005;
  /// Decode ranges of the head: (lat_lo, lat_hi, lon_lo, lon_hi).
  std::array<double, 4> output_ranges{-68.0, 45.0, -58.0, 50.0};
  std::uint64_t seed = 0;

  bool has_convolutions() const { return ablation != Ablation::C5; }
  bool has_dilated_branch() const { return ablation == Ablation::C1 || ablation == Ablation::C3; }
  bool has_attention() const { return ablation == Ablation::C1 || ablation == Ablation::C2; }
  bool bidirectional() const { return ablation != Ablation::C5; }

  /// Sequence length reaching the encoder recurrent layer.
  std::size_t encoder_steps() const;

  /// Throws std::invalid_argument on inconsistent sizes.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Mean absolute error of latitude plus that of longitude over (batch, time,
/// 2) tensors in normalized units. Writes d(loss)/d(pred) when `grad` is set.
double mae_loss(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr);

class Model {
 public:
  explicit Model(ModelConfig cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }

  /// (batch, input_rows, input_width) to normalized (batch, output_rows, 2)
  /// outputs in (0, 1), ordered (lat, lon).
  Tensor forward(const Tensor& x, Mode mode);
  /// Accumulates parameter gradients; returns the input gradient.
  Tensor backward(const Tensor& dy);

  /// Penalty l2 * sum of squares over convolution and recurrent weights;
  /// adds its gradient when `accumulate` is set.
  double penalty(bool accumulate);

  std::vector<Param*> params();
  std::vector<std::pair<std::string, Tensor*>> buffers();
  std::size_t parameter_count();
  void zero_grad();

  /// Selects the dropout mask stream for the next forward calls.
  void set_dropout_stream(std::uint64_t stream);

  /// Normalized (lat, lon) to degrees with the configured decode ranges.
  std::array<double, 2> decode(double u_lat, double u_lon) const;

  std::uint64_t optimizer_step = 0;

 private:
  struct Block {
    Conv1d plain;
    BatchNormMaxPool plain_norm;
    std::optional<Conv1d> dilated;
    std::optional<BatchNormMaxPool> dilated_norm;
  };

  ModelConfig cfg_;
  std::vector<Block> blocks_;
  Dropout dropout_;
  std::unique_ptr<Layer> encoder_;
  Dense encoder_dense_;
  std::unique_ptr<Layer> context_;
  std::unique_ptr<Layer> decoder_;
  std::vector<Dense> dense_;
  Dense head_;
  std::vector<Tensor> block_inputs_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// One Adam update with decoupled weight decay:
/// p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps).
/// Increments model.optimizer_step.
void adam_step(Model& model, const AdamConfig& cfg);

/// Binary checkpoint: magic, config JSON and every parameter, Adam moment
/// and running statistic as raw doubles.
void save_checkpoint(Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path);

}  // namespace voyagecast::nn
