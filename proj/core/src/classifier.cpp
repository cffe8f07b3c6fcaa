#include "cetk/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kProbabilityFloor = 1e-12;

void check_input(const MlpClassifier& model, std::span<const double> x) {
  if (x.size() != model.dim_in) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.size()) +
                                                  " dims, model expects " +
                                                  std::to_string(model.dim_in));
  }
}

Probabilities softmax2(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

// Hidden activations after rectifier and (optional) dropout, plus the
// per-unit multiplier that was applied so backprop can reuse it.
struct HiddenPass {
  std::vector<double> pre;
  std::vector<double> act;
  std::vector<double> mask;
};

HiddenPass hidden_pass(const MlpClassifier& m, std::span<const double> x, bool train_mode,
                       Rng* rng) {
  HiddenPass h;
  h.pre.resize(m.dim_hidden);
  h.act.resize(m.dim_hidden);
  h.mask.assign(m.dim_hidden, 1.0);
  const bool drop = train_mode && m.dropout_p > 0.0;
  if (drop && rng == nullptr) {
    throw std::invalid_argument("train-mode dropout requires an rng");
  }
  const double keep_scale = drop ? 1.0 / (1.0 - m.dropout_p) : 1.0;
  for (std::size_t j = 0; j < m.dim_hidden; ++j) {
    double s = m.b1[j];
    const double* row = m.w1.data() + j * m.dim_in;
    for (std::size_t i = 0; i < m.dim_in; ++i) s += row[i] * x[i];
    h.pre[j] = s;
    if (drop) h.mask[j] = rng->uniform() < m.dropout_p ? 0.0 : keep_scale;
    h.act[j] = std::max(0.0, s) * h.mask[j];
  }
  return h;
}

Probabilities output_pass(const MlpClassifier& m, const std::vector<double>& hidden) {
  double z[2];
  for (std::size_t c = 0; c < 2; ++c) {
    double s = m.b2[c];
    const double* row = m.w2.data() + c * m.dim_hidden;
    for (std::size_t j = 0; j < m.dim_hidden; ++j) s += row[j] * hidden[j];
    z[c] = s;
  }
  return softmax2(z[0], z[1]);
}

std::vector<double> matrix_from_json(const ojson& rows, std::size_t n_rows, std::size_t n_cols,
                                     const char* name) {
  if (!rows.is_array() || rows.size() != n_rows) {
    throw Error(ErrorCode::SchemaError, std::string(name) + " has wrong row count");
  }
  std::vector<double> out;
  out.reserve(n_rows * n_cols);
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != n_cols) {
      throw Error(ErrorCode::SchemaError, std::string(name) + " has wrong column count");
    }
    for (const auto& v : row) out.push_back(v.get<double>());
  }
  return out;
}

ojson matrix_to_json(const std::vector<double>& flat, std::size_t n_rows, std::size_t n_cols) {
  ojson rows = ojson::array();
  for (std::size_t r = 0; r < n_rows; ++r) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < n_cols; ++c) row.push_back(flat[r * n_cols + c]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> vector_from_json(const ojson& arr, std::size_t n, const char* name) {
  if (!arr.is_array() || arr.size() != n) {
    throw Error(ErrorCode::SchemaError, std::string(name) + " has wrong length");
  }
  std::vector<double> out;
  for (const auto& v : arr) out.push_back(v.get<double>());
  return out;
}

double mean_loss(const MlpClassifier& model, std::span<const LabeledVector> data,
                 std::span<const std::size_t> idx) {
  double total = 0.0;
  for (std::size_t i : idx) {
    total += weighted_ce_loss(forward(model, data[i].x), data[i].label, model.class_weights);
  }
  return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
}

}  // namespace

MlpClassifier MlpClassifier::zeros(std::size_t dim_in, std::size_t dim_hidden) {
  MlpClassifier m;
  m.dim_in = dim_in;
  m.dim_hidden = dim_hidden;
  m.w1.assign(dim_hidden * dim_in, 0.0);
  m.b1.assign(dim_hidden, 0.0);
  m.w2.assign(2 * dim_hidden, 0.0);
  m.b2.assign(2, 0.0);
  return m;
}

MlpClassifier MlpClassifier::initialized(std::size_t dim_in, std::size_t dim_hidden,
                                         std::uint64_t seed) {
  MlpClassifier m = zeros(dim_in, dim_hidden);
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(dim_in));
  for (double& w : m.w1) w = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / static_cast<double>(dim_hidden + 2));
  for (double& w : m.w2) w = rng.uniform(-a2, a2);
  return m;
}

std::size_t MlpClassifier::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

std::vector<double> MlpClassifier::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  out.insert(out.end(), w1.begin(), w1.end());
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), w2.begin(), w2.end());
  out.insert(out.end(), b2.begin(), b2.end());
  return out;
}

void MlpClassifier::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::DimensionMismatch, "parameter vector has wrong length");
  }
  auto it = flat.begin();
  for (auto* part : {&w1, &b1, &w2, &b2}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(part->size()), part->begin());
    it += static_cast<std::ptrdiff_t>(part->size());
  }
}

Probabilities forward(const MlpClassifier& model, std::span<const double> x, bool train_mode,
                      Rng* rng) {
  check_input(model, x);
  const HiddenPass h = hidden_pass(model, x, train_mode, rng);
  return output_pass(model, h.act);
}

double weighted_ce_loss(const Probabilities& probs, int label, const ClassWeights& weights) {
  const auto k = static_cast<std::size_t>(label);
  return weights.at(k) * -std::log(std::max(probs.at(k), kProbabilityFloor));
}

ClassWeights compute_class_weights(std::array<std::size_t, 2> counts) {
  if (counts[0] == 0 || counts[1] == 0) {
    throw Error(ErrorCode::EmptyClass, "both classes need at least one example");
  }
  const double total = static_cast<double>(counts[0] + counts[1]);
  return {total / (2.0 * static_cast<double>(counts[0])),
          total / (2.0 * static_cast<double>(counts[1]))};
}

double accumulate_gradient(const MlpClassifier& m, std::span<const double> x, int label,
                           std::span<double> grad, bool train_mode, Rng* rng) {
  check_input(m, x);
  if (grad.size() != m.parameter_count()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient buffer has wrong length");
  }
  const HiddenPass h = hidden_pass(m, x, train_mode, rng);
  const Probabilities p = output_pass(m, h.act);
  const auto y = static_cast<std::size_t>(label);
  const double w = m.class_weights.at(y);

  const std::size_t D = m.dim_in;
  const std::size_t H = m.dim_hidden;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + H * D;
  double* g_w2 = g_b1 + H;
  double* g_b2 = g_w2 + 2 * H;

  double dz[2];
  for (std::size_t c = 0; c < 2; ++c) dz[c] = w * (p[c] - (c == y ? 1.0 : 0.0));

  for (std::size_t c = 0; c < 2; ++c) {
    g_b2[c] += dz[c];
    for (std::size_t j = 0; j < H; ++j) g_w2[c * H + j] += dz[c] * h.act[j];
  }
  for (std::size_t j = 0; j < H; ++j) {
    if (h.pre[j] <= 0.0 || h.mask[j] == 0.0) continue;
    const double dh = (dz[0] * m.w2[j] + dz[1] * m.w2[H + j]) * h.mask[j];
    g_b1[j] += dh;
    double* row = g_w1 + j * D;
    for (std::size_t i = 0; i < D; ++i) row[i] += dh * x[i];
  }
  return weighted_ce_loss(p, label, m.class_weights);
}

DatasetSplit stratified_split(std::span<const int> labels, double test_fraction,
                              double validation_fraction, std::uint64_t seed) {
  DatasetSplit split;
  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n = idx.size();
    const auto n_test =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    const auto rest = n - n_test;
    const auto n_val =
        static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(rest)));
    split.test.insert(split.test.end(), idx.begin(), idx.begin() + n_test);
    split.validation.insert(split.validation.end(), idx.begin() + n_test,
                            idx.begin() + n_test + n_val);
    split.train.insert(split.train.end(), idx.begin() + n_test + n_val, idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

TrainResult train_classifier(std::span<const LabeledVector> dataset, const TrainConfig& config) {
  if (dataset.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least two labeled examples");
  }
  std::array<std::size_t, 2> counts = {0, 0};
  std::vector<int> labels;
  labels.reserve(dataset.size());
  const std::size_t dim = dataset.front().x.size();
  for (const auto& ex : dataset) {
    if (ex.label != 0 && ex.label != 1) {
      throw Error(ErrorCode::UnknownLabel, "label " + std::to_string(ex.label));
    }
    if (ex.x.size() != dim) throw Error(ErrorCode::DimensionMismatch, "ragged dataset");
    ++counts[static_cast<std::size_t>(ex.label)];
    labels.push_back(ex.label);
  }
  const ClassWeights weights = compute_class_weights(counts);

  const DatasetSplit split =
      stratified_split(labels, config.test_fraction, config.validation_fraction, config.seed);
  if (split.train.empty()) throw Error(ErrorCode::InsufficientData, "empty training split");

  const std::size_t hidden = config.dim_hidden == 0 ? dim : config.dim_hidden;
  MlpClassifier model = MlpClassifier::initialized(dim, hidden, config.seed ^ 0x9E3779B97F4A7C15ULL);
  model.dropout_p = config.dropout_p;
  model.class_weights = config.use_class_weights ? weights : ClassWeights{1.0, 1.0};

  TrainHistory history;
  history.n_train = split.train.size();
  history.n_validation = split.validation.size();
  history.n_test = split.test.size();
  history.class_weights = model.class_weights;

  const std::size_t n_params = model.parameter_count();
  std::vector<double> params = model.flatten();
  std::vector<double> m1(n_params, 0.0);
  std::vector<double> m2(n_params, 0.0);
  std::vector<double> grad(n_params, 0.0);

  const std::size_t batch = std::max<std::size_t>(1, config.batch_size_train);
  const std::size_t batches_per_epoch = (split.train.size() + batch - 1) / batch;
  const double total_steps = static_cast<double>(batches_per_epoch * config.epochs);

  Rng order_rng(config.seed + 1);
  Rng dropout_rng(config.seed + 2);
  std::vector<std::size_t> order = split.train;

  // Early stopping watches validation loss, or training loss when the
  // validation split is empty.
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = params;
  std::size_t since_best = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    double lr = config.learning_rate;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(lo + batch, order.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& ex = dataset[order[k]];
        epoch_loss += accumulate_gradient(model, ex.x, ex.label, grad, true, &dropout_rng);
      }
      const double inv = 1.0 / static_cast<double>(hi - lo);
      lr = config.learning_rate * (1.0 - static_cast<double>(step) / total_steps);
      ++step;
      const double t = static_cast<double>(step);
      const double c1 = 1.0 - std::pow(config.adam_beta1, t);
      const double c2 = 1.0 - std::pow(config.adam_beta2, t);
      for (std::size_t i = 0; i < n_params; ++i) {
        const double g = grad[i] * inv;
        m1[i] = config.adam_beta1 * m1[i] + (1.0 - config.adam_beta1) * g;
        m2[i] = config.adam_beta2 * m2[i] + (1.0 - config.adam_beta2) * g * g;
        params[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + config.adaptive_eps);
      }
      model.assign(params);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.learning_rate = lr;
    double monitored = mean_loss(model, dataset, split.train);
    if (!split.validation.empty()) {
      rec.validation_loss = mean_loss(model, dataset, split.validation);
      monitored = *rec.validation_loss;
    }
    history.epochs.push_back(rec);

    if (monitored < best_loss) {
      best_loss = monitored;
      best_params = params;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stopping_patience) {
      history.stopped_early = epoch < config.epochs;
      break;
    }
  }

  model.assign(best_params);
  if (!split.test.empty()) {
    std::vector<LabeledVector> test;
    for (std::size_t i : split.test) test.push_back(dataset[i]);
    history.test_matrix = evaluate_classifier(model, test);
  }
  return {std::move(model), std::move(history)};
}

CausalPrediction predict_causal(const MlpClassifier& model, std::span<const double> x) {
  const Probabilities p = forward(model, x);
  if (p[1] > p[0]) return {CausalLabel::Causal, p[1]};
  return {CausalLabel::NonCausal, p[0]};
}

ConfusionMatrix evaluate_classifier(const MlpClassifier& model,
                                    std::span<const LabeledVector> data) {
  ConfusionMatrix m({"non_causal", "causal"});
  for (const auto& ex : data) {
    const auto pred = static_cast<std::size_t>(predict_causal(model, ex.x).label);
    m.add(static_cast<std::size_t>(ex.label), pred);
  }
  return m;
}

std::string classifier_to_json(const MlpClassifier& model) {
  ojson obj;
  obj["schema_version"] = 1;
  obj["kind"] = "mlp-classifier";
  obj["dim_in"] = model.dim_in;
  obj["dim_hidden"] = model.dim_hidden;
  obj["dropout_p"] = model.dropout_p;
  obj["class_weights"] = {model.class_weights[0], model.class_weights[1]};
  obj["W1"] = matrix_to_json(model.w1, model.dim_hidden, model.dim_in);
  obj["b1"] = model.b1;
  obj["W2"] = matrix_to_json(model.w2, 2, model.dim_hidden);
  obj["b2"] = model.b2;
  return obj.dump();
}

MlpClassifier classifier_from_json(std::string_view text) {
  try {
    const ojson obj = ojson::parse(text);
    if (obj.at("schema_version").get<int>() != 1 ||
        obj.at("kind").get<std::string>() != "mlp-classifier") {
      throw Error(ErrorCode::SchemaError, "not a version-1 mlp-classifier file");
    }
    MlpClassifier m;
    m.dim_in = obj.at("dim_in").get<std::size_t>();
    m.dim_hidden = obj.at("dim_hidden").get<std::size_t>();
    m.dropout_p = obj.at("dropout_p").get<double>();
    const auto cw = vector_from_json(obj.at("class_weights"), 2, "class_weights");
    m.class_weights = {cw[0], cw[1]};
    m.w1 = matrix_from_json(obj.at("W1"), m.dim_hidden, m.dim_in, "W1");
    m.b1 = vector_from_json(obj.at("b1"), m.dim_hidden, "b1");
    m.w2 = matrix_from_json(obj.at("W2"), 2, m.dim_hidden, "W2");
    m.b2 = vector_from_json(obj.at("b2"), 2, "b2");
    for (double v : m.flatten()) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "classifier weight");
    }
    if (!(m.dropout_p >= 0.0 && m.dropout_p < 1.0)) {
      throw Error(ErrorCode::SchemaError, "dropout_p must be in [0, 1)");
    }
    return m;
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

}  // namespace cetk
