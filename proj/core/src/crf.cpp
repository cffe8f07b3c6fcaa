#include "cetk/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::size_t K = kNumTags;

double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

void check_sequence(const CrfModel& model, const SequenceFeatures& feats) {
  if (feats.length == 0) throw Error(ErrorCode::LengthMismatch, "empty sequence");
  if (feats.width != model.width()) {
    throw Error(ErrorCode::LengthMismatch, "feature width " + std::to_string(feats.width) +
                                               " vs model width " +
                                               std::to_string(model.width()));
  }
  if (feats.values.size() != feats.length * feats.width) {
    throw Error(ErrorCode::LengthMismatch, "feature matrix size");
  }
}

void check_tags(const SequenceFeatures& feats, std::span<const IOTag> tags) {
  if (tags.size() != feats.length) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(tags.size()) + " tags for " +
                                               std::to_string(feats.length) + " positions");
  }
}

// T x K table of emission scores.
std::vector<double> emission_table(const CrfModel& model, const SequenceFeatures& feats) {
  std::vector<double> em(feats.length * K);
  for (std::size_t t = 0; t < feats.length; ++t) {
    for (std::size_t y = 0; y < K; ++y) em[t * K + y] = emission_score(model, feats, t, y);
  }
  return em;
}

struct ForwardBackward {
  std::vector<double> alpha;  // T x K
  std::vector<double> beta;   // T x K
  std::vector<double> em;     // T x K
  double log_z = 0.0;
};

ForwardBackward forward_backward(const CrfModel& model, const SequenceFeatures& feats,
                                 bool with_beta) {
  const std::size_t T = feats.length;
  ForwardBackward fb;
  fb.em = emission_table(model, feats);
  fb.alpha.assign(T * K, 0.0);
  for (std::size_t y = 0; y < K; ++y) fb.alpha[y] = model.start()[y] + fb.em[y];
  double buf[K];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < K; ++y) {
      for (std::size_t j = 0; j < K; ++j) {
        buf[j] = fb.alpha[(t - 1) * K + j] + model.transition(j, y);
      }
      fb.alpha[t * K + y] = fb.em[t * K + y] + log_sum_exp(buf, K);
    }
  }
  for (std::size_t y = 0; y < K; ++y) buf[y] = fb.alpha[(T - 1) * K + y] + model.end()[y];
  fb.log_z = log_sum_exp(buf, K);

  if (with_beta) {
    fb.beta.assign(T * K, 0.0);
    for (std::size_t y = 0; y < K; ++y) fb.beta[(T - 1) * K + y] = model.end()[y];
    for (std::size_t t = T - 1; t-- > 0;) {
      for (std::size_t y = 0; y < K; ++y) {
        for (std::size_t k = 0; k < K; ++k) {
          buf[k] = model.transition(y, k) + fb.em[(t + 1) * K + k] + fb.beta[(t + 1) * K + k];
        }
        fb.beta[t * K + y] = log_sum_exp(buf, K);
      }
    }
  }
  return fb;
}

// Adds expected-minus-empirical feature counts for one sequence into grad;
// returns log Z - score(gold).
double sequence_gradient(const CrfModel& model, const TrainingSequence& seq,
                         std::span<double> grad) {
  const SequenceFeatures& feats = seq.features;
  check_sequence(model, feats);
  check_tags(feats, seq.tags);
  const Marginals marg = marginals(model, feats);
  const std::size_t T = feats.length;
  const std::size_t F = model.width();
  double* g_em = grad.data();
  double* g_tr = g_em + K * F;
  double* g_start = g_tr + K * K;
  double* g_end = g_start + K;

  for (std::size_t t = 0; t < T; ++t) {
    const auto x = feats.row(t);
    const std::size_t gold = tag_index(seq.tags[t]);
    for (std::size_t y = 0; y < K; ++y) {
      const double w = marg.node[t][y] - (y == gold ? 1.0 : 0.0);
      if (w == 0.0) continue;
      double* row = g_em + y * F;
      for (std::size_t f = 0; f < F; ++f) row[f] += w * x[f];
    }
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t e = 0; e < K * K; ++e) g_tr[e] += marg.edge[t][e];
    g_tr[tag_index(seq.tags[t]) * K + tag_index(seq.tags[t + 1])] -= 1.0;
  }
  for (std::size_t y = 0; y < K; ++y) {
    g_start[y] += marg.node[0][y];
    g_end[y] += marg.node[T - 1][y];
  }
  g_start[tag_index(seq.tags.front())] -= 1.0;
  g_end[tag_index(seq.tags.back())] -= 1.0;

  return marg.log_z - score_sequence(model, feats, seq.tags);
}

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

ojson rows_to_json(const std::vector<double>& flat, std::size_t n_rows, std::size_t n_cols) {
  ojson rows = ojson::array();
  for (std::size_t r = 0; r < n_rows; ++r) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < n_cols; ++c) row.push_back(flat[r * n_cols + c]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void rows_from_json(const ojson& rows, std::size_t n_rows, std::size_t n_cols, const char* name,
                    std::vector<double>& out) {
  if (!rows.is_array() || rows.size() != n_rows) {
    throw Error(ErrorCode::SchemaError, std::string(name) + " has wrong row count");
  }
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != n_cols) {
      throw Error(ErrorCode::SchemaError, std::string(name) + " has wrong column count");
    }
    for (const auto& v : row) out.push_back(v.get<double>());
  }
}

// Sequences per gradient work unit. Fixed so the reduction order (and hence
// the floating-point result) does not depend on the thread count.
constexpr std::size_t kGradientChunk = 32;

}  // namespace

TokenFeatures token_features(std::string_view token, const EmbeddingTable& table) {
  TokenFeatures f;
  f.dense = lookup(table, token).vector;
  const std::string lower = ascii_lower(token);
  bool has_letter = false;
  for (char c : token) {
    const auto u = static_cast<unsigned char>(c);
    if ((u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80) has_letter = true;
  }
  f.is_lower = has_letter && lower == token;
  f.is_digit = !token.empty() && std::all_of(token.begin(), token.end(), is_ascii_digit);
  f.word_length = utf8_length(token);
  return f;
}

std::vector<TokenFeatures> extract_features(const Sentence& sentence,
                                            const EmbeddingTable& table) {
  if (sentence.tokens.empty()) {
    throw Error(ErrorCode::EmptySentence, "sentence '" + sentence.id + "' has no tokens");
  }
  std::vector<TokenFeatures> out;
  out.reserve(sentence.tokens.size());
  for (const Token& t : sentence.tokens) out.push_back(token_features(t.text, table));
  return out;
}

SequenceFeatures feature_matrix(std::span<const TokenFeatures> tokens, std::size_t window) {
  SequenceFeatures sf;
  sf.length = tokens.size();
  const std::size_t dim = tokens.empty() ? 0 : tokens.front().dense.size();
  sf.width = feature_width(dim, window);
  sf.values.assign(sf.length * sf.width, 0.0);
  const auto T = static_cast<std::ptrdiff_t>(sf.length);
  const auto w = static_cast<std::ptrdiff_t>(window);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    double* row = sf.values.data() + static_cast<std::size_t>(t) * sf.width;
    std::size_t col = 0;
    for (std::ptrdiff_t o = -w; o <= w; ++o, col += dim) {
      const std::ptrdiff_t s = t + o;
      if (s < 0 || s >= T) continue;
      const auto& dense = tokens[static_cast<std::size_t>(s)].dense;
      if (dense.size() != dim) throw Error(ErrorCode::DimensionMismatch, "ragged token vectors");
      std::copy(dense.begin(), dense.end(), row + col);
    }
    const auto& tok = tokens[static_cast<std::size_t>(t)];
    row[col] = tok.is_lower ? 1.0 : 0.0;
    row[col + 1] = tok.is_digit ? 1.0 : 0.0;
    row[col + 2] = std::min(static_cast<double>(tok.word_length) / kWordLengthScale, 1.0);
  }
  return sf;
}

CrfModel::CrfModel(std::size_t dim_dense, std::size_t window)
    : dim_dense_(dim_dense), window_(window), emission_(K * feature_width(dim_dense, window), 0.0) {}

std::size_t CrfModel::parameter_count() const { return emission_.size() + K * K + 2 * K; }

std::vector<double> CrfModel::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  out.insert(out.end(), emission_.begin(), emission_.end());
  out.insert(out.end(), transition_.begin(), transition_.end());
  out.insert(out.end(), start_.begin(), start_.end());
  out.insert(out.end(), end_.begin(), end_.end());
  return out;
}

void CrfModel::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::LengthMismatch, "parameter vector has wrong length");
  }
  auto it = flat.begin();
  auto take = [&](auto& dst) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  take(emission_);
  take(transition_);
  take(start_);
  take(end_);
}

double emission_score(const CrfModel& model, const SequenceFeatures& feats, std::size_t t,
                      std::size_t tag) {
  const auto x = feats.row(t);
  double s = 0.0;
  for (std::size_t f = 0; f < x.size(); ++f) s += model.emission(tag, f) * x[f];
  return s;
}

double score_sequence(const CrfModel& model, const SequenceFeatures& feats,
                      std::span<const IOTag> tags) {
  check_sequence(model, feats);
  check_tags(feats, tags);
  double s = model.start()[tag_index(tags.front())];
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += emission_score(model, feats, t, tag_index(tags[t]));
    if (t + 1 < tags.size()) s += model.transition(tag_index(tags[t]), tag_index(tags[t + 1]));
  }
  return s + model.end()[tag_index(tags.back())];
}

double log_partition(const CrfModel& model, const SequenceFeatures& feats) {
  check_sequence(model, feats);
  return forward_backward(model, feats, false).log_z;
}

Marginals marginals(const CrfModel& model, const SequenceFeatures& feats) {
  check_sequence(model, feats);
  const ForwardBackward fb = forward_backward(model, feats, true);
  const std::size_t T = feats.length;
  Marginals m;
  m.log_z = fb.log_z;
  m.node.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t y = 0; y < K; ++y) {
      m.node[t][y] = std::exp(fb.alpha[t * K + y] + fb.beta[t * K + y] - fb.log_z);
    }
  }
  m.edge.resize(T > 0 ? T - 1 : 0);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        m.edge[t][j * K + k] =
            std::exp(fb.alpha[t * K + j] + model.transition(j, k) + fb.em[(t + 1) * K + k] +
                     fb.beta[(t + 1) * K + k] - fb.log_z);
      }
    }
  }
  return m;
}

std::vector<IOTag> viterbi(const CrfModel& model, const SequenceFeatures& feats) {
  check_sequence(model, feats);
  const std::size_t T = feats.length;
  const std::vector<double> em = emission_table(model, feats);
  std::vector<double> delta(T * K);
  std::vector<std::size_t> back(T * K, 0);
  for (std::size_t y = 0; y < K; ++y) delta[y] = model.start()[y] + em[y];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < K; ++y) {
      std::size_t best = 0;
      double best_score = delta[(t - 1) * K] + model.transition(0, y);
      for (std::size_t j = 1; j < K; ++j) {
        const double s = delta[(t - 1) * K + j] + model.transition(j, y);
        if (s > best_score) {
          best_score = s;
          best = j;
        }
      }
      delta[t * K + y] = best_score + em[t * K + y];
      back[t * K + y] = best;
    }
  }
  std::size_t last = 0;
  double best_final = delta[(T - 1) * K] + model.end()[0];
  for (std::size_t y = 1; y < K; ++y) {
    const double s = delta[(T - 1) * K + y] + model.end()[y];
    if (s > best_final) {
      best_final = s;
      last = y;
    }
  }
  std::vector<IOTag> tags(T);
  tags[T - 1] = tag_from_index(last);
  for (std::size_t t = T - 1; t > 0; --t) {
    last = back[t * K + last];
    tags[t - 1] = tag_from_index(last);
  }
  return tags;
}

NllResult nll_and_grad(const CrfModel& model, std::span<const TrainingSequence> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "no sequences");
  const std::size_t P = model.parameter_count();
  const std::size_t n_chunks = (batch.size() + kGradientChunk - 1) / kGradientChunk;

  std::vector<std::vector<double>> chunk_grads(n_chunks, std::vector<double>(P, 0.0));
  std::vector<double> chunk_nll(n_chunks, 0.0);
  std::vector<std::exception_ptr> chunk_errors(n_chunks);

  auto run_chunk = [&](std::size_t c) {
    try {
      const std::size_t lo = c * kGradientChunk;
      const std::size_t hi = std::min(lo + kGradientChunk, batch.size());
      for (std::size_t i = lo; i < hi; ++i) {
        chunk_nll[c] += sequence_gradient(model, batch[i], chunk_grads[c]);
      }
    } catch (...) {
      chunk_errors[c] = std::current_exception();
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(n_chunks, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t c = w; c < n_chunks; c += workers) run_chunk(c);
      });
    }
    for (auto& th : threads) th.join();
  }
  for (const auto& e : chunk_errors) {
    if (e) std::rethrow_exception(e);
  }

  NllResult out;
  out.gradient.assign(P, 0.0);
  double nll = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    nll += chunk_nll[c];
    for (std::size_t i = 0; i < P; ++i) out.gradient[i] += chunk_grads[c][i];
  }
  const std::vector<double> w = model.flatten();
  double l1 = 0.0;
  double l2 = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    l1 += std::abs(w[i]);
    l2 += w[i] * w[i];
    out.gradient[i] += model.reg_l2 * w[i];
  }
  out.smooth_loss = nll + 0.5 * model.reg_l2 * l2;
  out.loss = out.smooth_loss + model.reg_l1 * l1;
  return out;
}

CrfTrainResult train_crf(std::span<const TrainingSequence> data, std::size_t dim_dense,
                         const CrfTrainConfig& config) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no training sequences");
  CrfModel model(dim_dense, config.window);
  model.reg_l1 = config.c1;
  model.reg_l2 = config.c2;

  CrfModel scratch = model;
  auto objective = [&](std::span<const double> x, std::span<double> grad) {
    scratch.assign(x);
    scratch.reg_l1 = 0.0;
    const NllResult r = nll_and_grad(scratch, data);
    std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return r.smooth_loss;
  };

  LbfgsConfig opt;
  opt.memory = config.memory;
  opt.max_iterations = config.max_iterations;
  opt.tolerance = config.tolerance;
  opt.l1 = config.c1;
  LbfgsResult result = minimize_lbfgs(objective, model.flatten(), opt);
  model.assign(result.x);
  return {std::move(model), std::move(result)};
}

TrainingSequence make_training_sequence(const TaggedSentence& tagged,
                                        const EmbeddingTable& table, std::size_t window) {
  TrainingSequence seq;
  seq.features = feature_matrix(extract_features(tagged.sentence, table), window);
  seq.tags = tagged.tags;
  check_tags(seq.features, seq.tags);
  return seq;
}

CrfTrainResult train_crf(std::span<const TaggedSentence> data, const EmbeddingTable& table,
                         const CrfTrainConfig& config) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no tagged sentences");
  std::vector<TrainingSequence> seqs;
  seqs.reserve(data.size());
  for (const auto& tagged : data) seqs.push_back(make_training_sequence(tagged, table, config.window));
  return train_crf(seqs, table.dim(), config);
}

std::vector<IOTag> predict_tags(const CrfModel& model, const Sentence& sentence,
                                const EmbeddingTable& table) {
  return viterbi(model, feature_matrix(extract_features(sentence, table), model.window()));
}

std::vector<Span> predict_spans(const CrfModel& model, const Sentence& sentence,
                                const EmbeddingTable& table) {
  const auto tags = predict_tags(model, sentence, table);
  return decode_io(tags);
}

std::string crf_to_json(const CrfModel& model) {
  const std::vector<double> flat = model.flatten();
  const std::size_t F = model.width();
  std::vector<double> emission(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(K * F));
  std::vector<double> transition(flat.begin() + static_cast<std::ptrdiff_t>(K * F),
                                 flat.begin() + static_cast<std::ptrdiff_t>(K * F + K * K));
  ojson obj;
  obj["schema_version"] = 1;
  obj["kind"] = "linear-chain-crf";
  obj["labels"] = tag_names(kAllTags);
  obj["dim_dense"] = model.dim_dense();
  obj["window"] = model.window();
  obj["emission_weights"] = rows_to_json(emission, K, F);
  obj["transition_weights"] = rows_to_json(transition, K, K);
  obj["start_weights"] = model.start();
  obj["end_weights"] = model.end();
  obj["reg_l1"] = model.reg_l1;
  obj["reg_l2"] = model.reg_l2;
  return obj.dump();
}

CrfModel crf_from_json(std::string_view text) {
  try {
    const ojson obj = ojson::parse(text);
    if (obj.at("schema_version").get<int>() != 1 ||
        obj.at("kind").get<std::string>() != "linear-chain-crf") {
      throw Error(ErrorCode::SchemaError, "not a version-1 linear-chain-crf file");
    }
    if (obj.at("labels").get<std::vector<std::string>>() != tag_names(kAllTags)) {
      throw Error(ErrorCode::SchemaError, "labels must be [\"I-C\",\"I-E\",\"O\"]");
    }
    const auto dim = obj.at("dim_dense").get<std::size_t>();
    const auto window = obj.value("window", std::size_t{0});
    CrfModel model(dim, window);
    std::vector<double> flat;
    rows_from_json(obj.at("emission_weights"), K, model.width(), "emission_weights", flat);
    rows_from_json(obj.at("transition_weights"), K, K, "transition_weights", flat);
    for (const char* key : {"start_weights", "end_weights"}) {
      const auto v = obj.at(key).get<std::vector<double>>();
      if (v.size() != K) throw Error(ErrorCode::SchemaError, std::string(key) + " length");
      flat.insert(flat.end(), v.begin(), v.end());
    }
    for (double v : flat) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "crf weight");
    }
    model.assign(flat);
    model.reg_l1 = obj.at("reg_l1").get<double>();
    model.reg_l2 = obj.at("reg_l2").get<double>();
    return model;
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

}  // namespace cetk
