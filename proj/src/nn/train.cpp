#include "voyagecast/nn/train.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace voyagecast::nn {

namespace {

struct Snapshot {
  std::vector<Tensor> values;
  std::vector<Tensor> buffers;
};

Snapshot take(Model& m) {
  Snapshot s;
  for (Param* p : m.params()) s.values.push_back(p->value);
  for (auto& [name, t] : m.buffers()) s.buffers.push_back(*t);
  return s;
}

void restore(Model& m, const Snapshot& s) {
  auto ps = m.params();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s.values[i];
  auto bs = m.buffers();
  for (std::size_t i = 0; i < bs.size(); ++i) *bs[i].second = s.buffers[i];
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Dataset make_dataset(const features::WindowSet& ws) {
  const std::size_t n = ws.samples.size(), rows = features::kInputRows, width = ws.width();
  Dataset d;
  d.inputs = Tensor({n, rows, width});
  d.targets = Tensor({n, features::kTargetRows, 2});
  d.weights.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& w = ws.samples[s];
    if (w.input.size() != rows || w.target.size() != features::kTargetRows) {
      throw std::invalid_argument("dataset: sample " + std::to_string(s) + " has the wrong shape");
    }
    for (std::size_t t = 0; t < rows; ++t) {
      if (w.input[t].size() != width) throw std::invalid_argument("dataset: feature row width mismatch");
      for (std::size_t c = 0; c < width; ++c) d.inputs.at(s, t, c) = w.input[t][c];
    }
    for (std::size_t t = 0; t < features::kTargetRows; ++t) {
      d.targets.at(s, t, 0) = ws.normalizer.normalize_lat(w.target[t][0]);
      d.targets.at(s, t, 1) = ws.normalizer.normalize_lon(w.target[t][1]);
    }
    d.weights.push_back(w.weight);
  }
  return d;
}

std::pair<Tensor, Tensor> gather(const Dataset& d, const std::vector<std::size_t>& idx) {
  const std::size_t rows = d.inputs.dim(1), width = d.inputs.dim(2), steps = d.targets.dim(1);
  Tensor x({idx.size(), rows, width}), y({idx.size(), steps, 2});
  const std::size_t xs = rows * width, ys = steps * 2;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(d.inputs.data() + idx[i] * xs, xs, x.data() + i * xs);
    std::copy_n(d.targets.data() + idx[i] * ys, ys, y.data() + i * ys);
  }
  return {std::move(x), std::move(y)};
}

double evaluate_loss(Model& model, const Dataset& d, std::size_t batch_size) {
  if (d.size() == 0) throw std::invalid_argument("evaluate_loss: empty dataset");
  double total = 0.0;
  for (std::size_t start = 0; start < d.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(d.size(), start + batch_size); ++i) idx.push_back(i);
    const auto [x, y] = gather(d, idx);
    total += mae_loss(model.forward(x, Mode::Infer), y) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(d.size());
}

Tensor predict(Model& model, const Tensor& inputs, std::size_t batch_size) {
  require_rank3(inputs, "predict");
  const std::size_t n = inputs.dim(0), xs = inputs.dim(1) * inputs.dim(2);
  const std::size_t steps = model.config().output_rows;
  Tensor out({n, steps, 2});
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t m = std::min(n, start + batch_size) - start;
    Tensor x({m, inputs.dim(1), inputs.dim(2)});
    std::copy_n(inputs.data() + start * xs, m * xs, x.data());
    const Tensor y = model.forward(x, Mode::Infer);
    std::copy_n(y.data(), y.size(), out.data() + start * steps * 2);
  }
  return out;
}

TrainReport train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
  const Dataset& val = val_set.size() ? val_set : train_set;

  std::vector<double> cumulative;
  double acc = 0.0;
  for (double w : train_set.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("train: sample weights must be finite and >= 0");
    acc += w;
    cumulative.push_back(acc);
  }
  if (acc <= 0.0) throw std::invalid_argument("train: sample weights sum to zero");

  const std::size_t draws = cfg.samples_per_epoch ? cfg.samples_per_epoch : train_set.size();
  Rng rng(Rng::derive(cfg.seed, 0x7261696eULL));
  TrainReport report;
  Snapshot best;
  std::size_t since_best = 0;
  std::uint64_t batch_counter = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < draws; start += cfg.batch_size) {
      std::vector<std::size_t> idx;
      for (std::size_t i = start; i < std::min(draws, start + cfg.batch_size); ++i) {
        idx.push_back(rng.weighted_index(cumulative));
      }
      const auto [x, y] = gather(train_set, idx);
      model.zero_grad();
      model.set_dropout_stream(batch_counter++);
      const Tensor pred = model.forward(x, Mode::Train);
      Tensor grad;
      const double loss = mae_loss(pred, y, &grad) + model.penalty(true);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
      }
      model.backward(grad);
      adam_step(model, cfg.adam);
      loss_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), evaluate_loss(model, val), cfg.adam.lr};
    if (!std::isfinite(rec.val_loss)) throw std::runtime_error("validation loss is not finite");
    report.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (report.best_epoch == 0 || rec.val_loss < report.best_val_loss) {
      report.best_epoch = epoch;
      report.best_val_loss = rec.val_loss;
      best = take(model);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  if (report.best_epoch) restore(model, best);
  return report;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_loss) << ',' << num(r.lr) << '\n';
  }
}

}  // namespace voyagecast::nn
