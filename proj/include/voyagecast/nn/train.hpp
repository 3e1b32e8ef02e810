#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "voyagecast/features.hpp"
#include "voyagecast/nn/model.hpp"

namespace voyagecast::nn {

/// Inputs (N, rows, width), normalized targets (N, 72, 2) and per-sample
/// sampling weights.
struct Dataset {
  Tensor inputs;
  Tensor targets;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Targets are mapped to [0, 1] with the window set's decode ranges.
Dataset make_dataset(const features::WindowSet& ws);

/// Rows `idx` of a dataset as a batch.
std::pair<Tensor, Tensor> gather(const Dataset& d, const std::vector<std::size_t>& idx);

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  /// Draws per epoch; 0 means one per training sample.
  std::size_t samples_per_epoch = 0;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Mini-batch training. Each epoch draws samples with replacement in
/// proportion to their weights, stops once `patience` epochs pass without a
/// lower validation loss, and restores the parameters of the best epoch.
/// An empty validation set falls back to the training set. Throws
/// std::runtime_error when the loss stops being finite.
TrainReport train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Mean absolute error loss (no penalty) in inference mode.
double evaluate_loss(Model& model, const Dataset& d, std::size_t batch_size = 64);

/// Normalized predictions (N, output_rows, 2) in inference mode.
Tensor predict(Model& model, const Tensor& inputs, std::size_t batch_size = 64);

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace voyagecast::nn
