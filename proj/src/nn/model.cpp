#include "voyagecast/nn/model.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace voyagecast::nn {

namespace {

constexpr char kMagic[8] = {'V', 'C', 'M', 'O', 'D', 'E', 'L', '1'};

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::C1: return "C1";
    case Ablation::C2: return "C2";
    case Ablation::C3: return "C3";
    case Ablation::C4: return "C4";
    case Ablation::C5: return "C5";
  }
  return "C1";
}

Ablation parse_ablation(std::string_view s) {
  if (s.size() == 2 && (s[0] == 'C' || s[0] == 'c') && s[1] >= '1' && s[1] <= '5') {
    return kAllAblations[static_cast<std::size_t>(s[1] - '1')];
  }
  throw std::invalid_argument("unknown ablation '" + std::string(s) + "' (expected C1..C5)");
}

// ------------------------------------------------------------ ModelConfig

std::size_t ModelConfig::encoder_steps() const {
  if (!has_convolutions()) return input_rows;
  const std::size_t shrink = filters.size() * (pool - 1);
  return input_rows > shrink ? input_rows - shrink : 0;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (input_width == 0 || input_rows == 0 || output_rows == 0) fail("shapes must be positive");
  if (lstm_units == 0) fail("lstm_units must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  if (l2 < 0.0) fail("l2 must be non-negative");
  if (output_ranges[0] >= output_ranges[1] || output_ranges[2] >= output_ranges[3]) fail("empty output range");
  for (std::size_t d : dense) {
    if (d == 0) fail("dense widths must be positive");
  }
  if (has_convolutions()) {
    if (filters.empty() || filters.size() != kernels.size()) fail("filters and kernels must pair up");
    for (std::size_t i = 0; i < filters.size(); ++i) {
      if (filters[i] == 0 || kernels[i] == 0) fail("filters and kernels must be positive");
    }
    if (dilation == 0 || pool == 0) fail("dilation and pool must be positive");
    if (encoder_steps() == 0) fail("pooling consumes the whole input window");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"ablation", std::string(to_string(ablation))},
          {"input_width", input_width},
          {"input_rows", input_rows},
          {"output_rows", output_rows},
          {"filters", filters},
          {"kernels", kernels},
          {"dilation", dilation},
          {"pool", pool},
          {"bn_eps", bn_eps},
          {"bn_momentum", bn_momentum},
          {"dropout", dropout},
          {"lstm_units", lstm_units},
          {"omega", omega},
          {"dense", dense},
          {"l2", l2},
          {"output_ranges", output_ranges},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("ablation")) c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("input_width", c.input_width);
  get("input_rows", c.input_rows);
  get("output_rows", c.output_rows);
  get("filters", c.filters);
  get("kernels", c.kernels);
  get("dilation", c.dilation);
  get("pool", c.pool);
  get("bn_eps", c.bn_eps);
  get("bn_momentum", c.bn_momentum);
  get("dropout", c.dropout);
  get("lstm_units", c.lstm_units);
  get("omega", c.omega);
  get("dense", c.dense);
  get("l2", c.l2);
  get("output_ranges", c.output_ranges);
  get("seed", c.seed);
  c.validate();
  return c;
}

// --------------------------------------------------------------------- loss

double mae_loss(const Tensor& pred, const Tensor& target, Tensor* grad) {
  if (pred.shape() != target.shape() || pred.rank() != 3 || pred.dim(2) != 2) {
    throw std::invalid_argument("mae_loss: expected matching (batch, time, 2) tensors, got " +
                                shape_string(pred.shape()) + " and " + shape_string(target.shape()));
  }
  const double n = static_cast<double>(pred.dim(0) * pred.dim(1));
  if (grad) *grad = Tensor(pred.shape());
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double e = pred[k] - target[k];
    sum += std::abs(e);
    if (grad) (*grad)[k] = (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) / n;
  }
  return sum / n;
}

// -------------------------------------------------------------------- Model

Model::Model(ModelConfig cfg)
    : cfg_(std::move(cfg)),
      dropout_(cfg_.dropout),
      encoder_dense_("encoder_dense", cfg_.lstm_units, cfg_.lstm_units, Dense::Activation::Relu),
      head_("head", cfg_.dense.empty() ? cfg_.lstm_units : cfg_.dense.back(), 2, Dense::Activation::Sigmoid) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const std::size_t r = cfg_.lstm_units;

  std::size_t width = cfg_.input_width;
  if (cfg_.has_convolutions()) {
    for (std::size_t i = 0; i < cfg_.filters.size(); ++i) {
      const std::string name = "block" + std::to_string(i);
      const std::size_t f = cfg_.filters[i], k = cfg_.kernels[i];
      Block b{Conv1d::same(name + ".plain", width, f, k, 1),
              BatchNormMaxPool(name + ".plain_bn", f, cfg_.pool, cfg_.bn_eps, cfg_.bn_momentum),
              std::nullopt,
              std::nullopt};
      b.plain.init(rng);
      if (cfg_.has_dilated_branch()) {
        b.dilated.emplace(Conv1d::same(name + ".dilated", width, f, k, cfg_.dilation));
        b.dilated->init(rng);
        b.dilated_norm.emplace(name + ".dilated_bn", f, cfg_.pool, cfg_.bn_eps, cfg_.bn_momentum);
      }
      blocks_.push_back(std::move(b));
      width = f;
    }
  }

  if (cfg_.bidirectional()) {
    auto enc = std::make_unique<BiLstm>("encoder", width, r);
    enc->init(rng);
    encoder_ = std::move(enc);
  } else {
    auto enc = std::make_unique<Lstm>("encoder", width, r, false);
    enc->init(rng);
    encoder_ = std::move(enc);
  }
  encoder_dense_.init(rng);

  if (cfg_.has_attention()) {
    auto att = std::make_unique<Attention>("attention", r, cfg_.omega, cfg_.output_rows);
    att->init(rng);
    context_ = std::move(att);
  } else {
    context_ = std::make_unique<RepeatLast>(cfg_.output_rows);
  }

  if (cfg_.bidirectional()) {
    auto dec = std::make_unique<BiLstm>("decoder", r, r);
    dec->init(rng);
    decoder_ = std::move(dec);
  } else {
    auto dec = std::make_unique<Lstm>("decoder", r, r, false);
    dec->init(rng);
    decoder_ = std::move(dec);
  }

  std::size_t in = r;
  for (std::size_t i = 0; i < cfg_.dense.size(); ++i) {
    dense_.emplace_back("dense" + std::to_string(i), in, cfg_.dense[i], Dense::Activation::Relu);
    dense_.back().init(rng);
    in = cfg_.dense[i];
  }
  head_.init(rng);
}

Tensor Model::forward(const Tensor& x, Mode mode) {
  require_rank3(x, "model");
  if (x.dim(1) != cfg_.input_rows || x.dim(2) != cfg_.input_width) {
    throw std::invalid_argument("model: expected input (batch, " + std::to_string(cfg_.input_rows) + ", " +
                                std::to_string(cfg_.input_width) + "), got " + shape_string(x.shape()));
  }
  Tensor h = x;
  for (auto& b : blocks_) {
    Tensor a = b.plain_norm.forward(b.plain.forward(h, mode), mode);
    if (b.dilated) {
      const Tensor d = b.dilated_norm->forward(b.dilated->forward(h, mode), mode);
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += d[k];
    }
    h = std::move(a);
  }
  h = dropout_.forward(h, mode);
  h = encoder_->forward(h, mode);
  h = encoder_dense_.forward(h, mode);
  h = context_->forward(h, mode);
  h = decoder_->forward(h, mode);
  for (auto& d : dense_) h = d.forward(h, mode);
  return head_.forward(h, mode);
}

Tensor Model::backward(const Tensor& dy) {
  Tensor g = head_.backward(dy);
  for (auto it = dense_.rbegin(); it != dense_.rend(); ++it) g = it->backward(g);
  g = decoder_->backward(g);
  g = context_->backward(g);
  g = encoder_dense_.backward(g);
  g = encoder_->backward(g);
  g = dropout_.backward(g);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    Tensor a = it->plain.backward(it->plain_norm.backward(g));
    if (it->dilated) {
      const Tensor d = it->dilated->backward(it->dilated_norm->backward(g));
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += d[k];
    }
    g = std::move(a);
  }
  return g;
}

double Model::penalty(bool accumulate) {
  double sum = 0.0;
  for (Param* p : params()) {
    if (!p->l2) continue;
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double w = p->value[k];
      sum += w * w;
      if (accumulate) p->grad[k] += 2.0 * cfg_.l2 * w;
    }
  }
  return cfg_.l2 * sum;
}

std::vector<Param*> Model::params() {
  std::vector<Param*> out;
  for (auto& b : blocks_) {
    b.plain.collect(out);
    b.plain_norm.collect(out);
    if (b.dilated) {
      b.dilated->collect(out);
      b.dilated_norm->collect(out);
    }
  }
  encoder_->collect(out);
  encoder_dense_.collect(out);
  context_->collect(out);
  decoder_->collect(out);
  for (auto& d : dense_) d.collect(out);
  head_.collect(out);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::buffers() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& b : blocks_) {
    b.plain_norm.collect_buffers(out);
    if (b.dilated_norm) b.dilated_norm->collect_buffers(out);
  }
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (const Param* p : params()) n += p->value.size();
  return n;
}

void Model::zero_grad() {
  for (Param* p : params()) p->grad.fill(0.0);
}

void Model::set_dropout_stream(std::uint64_t stream) { dropout_.reseed(Rng::derive(cfg_.seed, stream)); }

std::array<double, 2> Model::decode(double u_lat, double u_lon) const {
  const auto& r = cfg_.output_ranges;
  return {r[0] + u_lat * (r[1] - r[0]), r[2] + u_lon * (r[3] - r[2])};
}

// --------------------------------------------------------------------- Adam

void adam_step(Model& model, const AdamConfig& cfg) {
  const auto t = static_cast<double>(++model.optimizer_step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double shrink = 1.0 - cfg.lr * cfg.weight_decay;
  for (Param* p : model.params()) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double g = p->grad[k];
      p->m[k] = cfg.beta1 * p->m[k] + (1.0 - cfg.beta1) * g;
      p->v[k] = cfg.beta2 * p->v[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->m[k] / c1;
      const double vhat = p->v[k] / c2;
      p->value[k] = p->value[k] * shrink - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// --------------------------------------------------------------- checkpoint

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (Param* p : model.params()) {
    tensors.emplace_back(p->name, &p->value);
    tensors.emplace_back(p->name + "#m", &p->m);
    tensors.emplace_back(p->name + "#v", &p->v);
  }
  for (auto& [name, t] : model.buffers()) tensors.emplace_back(name, t);

  nlohmann::json header{{"format", "vcmodel.v1"},
                        {"config", model.config().to_json()},
                        {"optimizer_step", model.optimizer_step},
                        {"tensors", tensors.size()}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, t->rank());
    for (std::size_t d : t->shape()) write_u64(out, d);
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const std::uint64_t len = read_u64(in);
  if (len > (1u << 24)) throw std::runtime_error("checkpoint: header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("checkpoint: truncated file");
  const auto header = nlohmann::json::parse(text);
  if (header.value("format", "") != "vcmodel.v1") throw std::runtime_error("checkpoint: unsupported format");

  auto model = std::make_unique<Model>(ModelConfig::from_json(header.at("config")));
  model->optimizer_step = header.at("optimizer_step").get<std::uint64_t>();

  std::map<std::string, Tensor*> slots;
  for (Param* p : model->params()) {
    slots[p->name] = &p->value;
    slots[p->name + "#m"] = &p->m;
    slots[p->name + "#v"] = &p->v;
  }
  for (auto& [name, t] : model->buffers()) slots[name] = t;

  const std::uint64_t count = read_u64(in);
  if (count != slots.size()) throw std::runtime_error("checkpoint: tensor count does not match the config");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t nlen = read_u64(in);
    if (nlen > 4096) throw std::runtime_error("checkpoint: tensor name too long");
    std::string name(nlen, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(nlen))) throw std::runtime_error("checkpoint: truncated file");
    const auto it = slots.find(name);
    if (it == slots.end()) throw std::runtime_error("checkpoint: unexpected tensor " + name);
    const std::uint64_t rank = read_u64(in);
    if (rank > 8) throw std::runtime_error("checkpoint: bad rank for " + name);
    std::vector<std::size_t> shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(read_u64(in));
    Tensor& t = *it->second;
    if (shape != t.shape()) {
      throw std::runtime_error("checkpoint: shape " + shape_string(shape) + " of " + name + " does not match " +
                               shape_string(t.shape()));
    }
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      throw std::runtime_error("checkpoint: truncated file");
    }
    slots.erase(it);
  }
  return model;
}

}  // namespace voyagecast::nn
