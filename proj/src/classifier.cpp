#include "earmotion/classifier.hpp"

#include <cmath>
#include <json.hpp>
#include <numeric>
#include <tuple>

#include "earmotion/binary_io.hpp"
#include "earmotion/metrics.hpp"

namespace earmotion {

void validate(const LstmConfig& c) {
  require(c.input_dim >= 1, "input_dim must be positive");
  require(c.num_layers >= 1, "num_layers must be positive");
  require(c.hidden_size >= 1, "hidden_size must be positive");
  require(c.dropout >= 0 && c.dropout < 1, "dropout must lie in [0, 1)");
  require(c.learning_rate > 0, "learning_rate must be positive");
  require(c.max_epochs >= 1, "max_epochs must be positive");
  require(c.patience >= 1, "patience must be positive");
  require(c.batch_size >= 1, "batch_size must be positive");
}

double lstm_forward(const FeatureMatrix& sequence, const nn::LstmParams<float>& params, const LstmConfig& config,
                    Mode mode, std::uint64_t dropout_seed) {
  if (sequence.cols() != config.input_dim)
    fail(Errc::dimension_mismatch, "sequence has " + std::to_string(sequence.cols()) + " features, model expects " +
                                       std::to_string(config.input_dim));
  if (mode == Mode::train && config.dropout > 0) {
    Rng rng(dropout_seed);
    const auto masks = nn::DropoutMasks<float>::draw(params.shape(), sequence.rows(), config.dropout, rng);
    return nn::forward(sequence.transpose(), params, &masks, nullptr);
  }
  return nn::forward(sequence.transpose(), params, nullptr, nullptr);
}

double bce_loss(double p, int y) { return nn::bce(p, y); }

namespace {

int target(ClipLabel label) { return label == ClipLabel::movement ? 1 : 0; }

class Adam {
 public:
  Adam(const nn::NetShape& shape, double lr)
      : lr_(lr), m_(nn::LstmParams<float>::zeros(shape)), v_(nn::LstmParams<float>::zeros(shape)) {}

  void step(nn::LstmParams<float>& params, nn::LstmParams<float>& grads, float grad_scale) {
    ++t_;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(beta1, t_)));
    const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(beta2, t_)));
    const float lr = static_cast<float>(lr_);
    auto p = params.tensors();
    auto g = grads.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    for (std::size_t k = 0; k < p.size(); ++k) {
      using Arr = Eigen::Map<Eigen::ArrayXf>;
      const auto n = static_cast<Eigen::Index>(p[k].size());
      Arr pk(p[k].data(), n), gk(g[k].data(), n), mk(m[k].data(), n), vk(v[k].data(), n);
      gk *= grad_scale;
      mk = float(beta1) * mk + float(1 - beta1) * gk;
      vk = float(beta2) * vk + float(1 - beta2) * gk.square();
      pk -= lr * (mk * c1) / ((vk * c2).sqrt() + float(eps));
    }
  }

 private:
  double lr_;
  int t_ = 0;
  nn::LstmParams<float> m_, v_;
};

struct SetScore {
  double loss = 0;
  double accuracy = 0;
};

SetScore score(const std::vector<LabeledSequence>& set, const nn::LstmParams<float>& params) {
  SetScore s;
  std::size_t correct = 0;
  for (const auto& item : set) {
    const double p = nn::forward(item.features.transpose(), params,
                                 nullptr, nullptr);
    s.loss += bce_loss(p, target(item.label));
    correct += (p > 0.5) == (item.label == ClipLabel::movement);
  }
  s.loss /= static_cast<double>(set.size());
  s.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return s;
}

}  // namespace

TrainedModel train(const std::vector<LabeledSequence>& train_set, const std::vector<LabeledSequence>& val_set,
                   const LstmConfig& config) {
  validate(config);
  require(!train_set.empty() && !val_set.empty(), "training and validation sets must be non-empty");
  const auto positives = std::count_if(train_set.begin(), train_set.end(),
                                       [](const LabeledSequence& s) { return s.label == ClipLabel::movement; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(train_set.size()))
    fail(Errc::single_class, "training set must contain both classes");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set) {
      if (s.features.cols() != config.input_dim)
        fail(Errc::dimension_mismatch, "sequence " + s.clip_id + " has " + std::to_string(s.features.cols()) +
                                           " features, config expects " + std::to_string(config.input_dim));
      require(s.features.rows() >= 1, "sequence " + s.clip_id + " is empty");
    }

  const nn::NetShape shape = config.shape();
  Rng init_rng(derive_seed(config.seed, "init"));
  Rng order_rng(derive_seed(config.seed, "order"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));

  TrainedModel model;
  model.config = config;
  nn::LstmParams<float> params = nn::init_params<float>(shape, init_rng);
  nn::LstmParams<float> grads = nn::LstmParams<float>::zeros(shape);
  nn::LstmParams<float> best = params;
  Adam adam(shape, config.learning_rate);
  EarlyStopping stopper(config.patience);
  model.initial_train_loss = score(train_set, params).loss;

  std::vector<std::size_t> order(train_set.size());
  nn::ForwardCache<float> cache;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(order);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      grads.set_zero();
      for (std::size_t k = start; k < end; ++k) {
        const auto& item = train_set[order[k]];
        const int y = target(item.label);
        if (config.dropout > 0) {
          const auto masks = nn::DropoutMasks<float>::draw(shape, item.features.rows(), config.dropout, dropout_rng);
          nn::forward(item.features.transpose(), params, &masks, &cache);
          loss_sum += nn::backward(cache, params, &masks, y, grads);
        } else {
          nn::forward(item.features.transpose(), params, nullptr, &cache);
          loss_sum += nn::backward(cache, params, nullptr, y, grads);
        }
        correct += (cache.probability > 0.5f) == (y == 1);
      }
      adam.step(params, grads, 1.0f / static_cast<float>(end - start));
    }
    const SetScore val = score(val_set, params);
    model.history.push_back({epoch, loss_sum / static_cast<double>(order.size()),
                             static_cast<double>(correct) / static_cast<double>(order.size()), val.loss, val.accuracy});
    const bool stop = stopper.update(val.accuracy);
    if (stopper.best_epoch() == epoch) best = params;
    if (stop) break;
  }
  model.params = std::move(best);
  model.best_epoch = stopper.best_epoch();
  return model;
}

Prediction predict(const TrainedModel& model, const FeatureMatrix& sequence) {
  const double p = lstm_forward(sequence, model.params, model.config, Mode::eval);
  return {p, p > 0.5 ? ClipLabel::movement : ClipLabel::background};
}

std::vector<LstmConfig> GridLattice::expand(const LstmConfig& base) const {
  std::vector<LstmConfig> out;
  for (int l : layers)
    for (int h : hidden)
      for (double lr : learning_rates) {
        LstmConfig c = base;
        c.num_layers = l;
        c.hidden_size = h;
        c.learning_rate = lr;
        out.push_back(c);
      }
  return out;
}

GridResult grid_search(const std::vector<LabeledSequence>& train_set, const std::vector<LabeledSequence>& val_set,
                       const LstmConfig& base, const GridLattice& lattice) {
  const auto configs = lattice.expand(base);
  require(!configs.empty(), "grid lattice is empty");
  GridResult result;
  bool have_best = false;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    TrainedModel model = train(train_set, val_set, configs[i]);
    std::vector<ClipLabel> preds, truth;
    for (const auto& s : val_set) {
      preds.push_back(predict(model, s.features).label);
      truth.push_back(s.label);
    }
    const Metrics m = metrics(confusion(preds, truth));
    result.rows.push_back({configs[i], m.accuracy, m.f1, model.best_epoch, static_cast<int>(model.history.size())});

    const auto key = [](const LstmConfig& c) { return std::make_tuple(c.num_layers, c.hidden_size, c.learning_rate); };
    const bool better = !have_best || m.accuracy > result.rows[result.best_index].val_accuracy ||
                        (m.accuracy == result.rows[result.best_index].val_accuracy &&
                         key(configs[i]) < key(configs[result.best_index]));
    if (better) {
      result.best = std::move(model);
      result.best_index = i;
      have_best = true;
    }
  }
  return result;
}

// ---------------------------------------------------------------- model file

namespace {
constexpr std::string_view kModelMagic = "EFLM";
}

std::string encode_model(const TrainedModel& model) {
  validate(model.config);
  detail::ByteWriter out;
  out.bytes(kModelMagic);
  out.u16(kModelFormatVersion);
  const auto& c = model.config;
  out.u32(static_cast<std::uint32_t>(c.input_dim));
  out.u32(static_cast<std::uint32_t>(c.num_layers));
  out.u32(static_cast<std::uint32_t>(c.hidden_size));
  out.f64(c.dropout);
  out.f64(c.learning_rate);
  out.u32(static_cast<std::uint32_t>(c.max_epochs));
  out.u32(static_cast<std::uint32_t>(c.patience));
  out.u32(static_cast<std::uint32_t>(c.batch_size));
  out.u64(c.seed);
  const auto shape = model.params.shape();
  require(shape.input_dim == c.input_dim && shape.hidden == c.hidden_size && shape.layers == c.num_layers,
          "parameters do not match the model config");
  for (auto t : model.params.tensors())
    for (float v : t) out.f32(v);

  nlohmann::ordered_json j;
  j["best_epoch"] = model.best_epoch;
  j["initial_train_loss"] = model.initial_train_loss;
  auto& hist = j["history"] = nlohmann::ordered_json::array();
  for (const auto& e : model.history) {
    hist.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"train_accuracy", e.train_accuracy},
                    {"val_loss", e.val_loss},
                    {"val_accuracy", e.val_accuracy}});
  }
  j["metadata"] = model.metadata;
  const std::string text = j.dump();
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.bytes(text);
  return out.data();
}

TrainedModel decode_model(std::string_view bytes, const std::string& source) {
  detail::ByteReader in(bytes, source);
  if (in.remaining() < kModelMagic.size() || in.bytes(kModelMagic.size()) != kModelMagic)
    fail(Errc::bad_magic, source + " is not a model file");
  const auto version = in.u16();
  if (version != kModelFormatVersion) fail(Errc::unsupported_version, source + ": model version " + std::to_string(version));
  TrainedModel model;
  auto& c = model.config;
  c.input_dim = static_cast<int>(in.u32());
  c.num_layers = static_cast<int>(in.u32());
  c.hidden_size = static_cast<int>(in.u32());
  c.dropout = in.f64();
  c.learning_rate = in.f64();
  c.max_epochs = static_cast<int>(in.u32());
  c.patience = static_cast<int>(in.u32());
  c.batch_size = static_cast<int>(in.u32());
  c.seed = in.u64();
  validate(c);
  model.params = nn::LstmParams<float>::zeros(c.shape());
  in.need(model.params.parameter_count() * 4);
  for (auto t : model.params.tensors())
    for (float& v : t) v = in.f32();
  if (!model.params.all_finite()) fail(Errc::non_finite, source + ": parameters contain NaN or Inf");
  const auto len = in.u32();
  const auto text = in.bytes(len);
  if (in.remaining() != 0) fail(Errc::trailing_data, source + ": bytes after model");
  try {
    const auto j = nlohmann::json::parse(text);
    model.best_epoch = j.at("best_epoch").get<int>();
    model.initial_train_loss = j.at("initial_train_loss").get<double>();
    for (const auto& e : j.at("history")) {
      model.history.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                               e.at("train_accuracy").get<double>(), e.at("val_loss").get<double>(),
                               e.at("val_accuracy").get<double>()});
    }
    model.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::parse, source + ": model history block: " + ex.what());
  }
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path), path.string());
}

}  // namespace earmotion
