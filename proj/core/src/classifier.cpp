#include "drbl/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "drbl/inference.hpp"
#include "drbl/ops.hpp"

namespace drbl {
namespace {

template <typename T>
Tensor<T> uniform_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> uniform(-k, k);
  std::vector<T> v(rows * cols);
  for (auto& x : v) x = static_cast<T>(uniform(rng));
  return Tensor<T>::from({rows, cols}, std::move(v), true);
}

Mask length_mask(std::size_t rows, std::size_t length) {
  if (length >= rows) return {};
  Mask m(rows, 0);
  std::fill_n(m.begin(), length, 1);
  return m;
}

std::size_t resolve_length(std::size_t length, std::size_t rows) {
  return length == kFullLength ? rows : length;
}

}  // namespace

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, std::size_t vocabulary_size,
                                    std::optional<EmbeddingTable<T>> embeddings,
                                    std::size_t unknown_index) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ModelParams p;
  p.config = config;
  const std::size_t r = config.embedding_dim;
  const std::size_t d = config.hidden_dim;
  if (embeddings) {
    if (embeddings->matrix.rows() != vocabulary_size || embeddings->dim() != r) {
      throw ConfigError("embedding table " + shape_string(embeddings->matrix.shape()) +
                        " does not match vocabulary size and r = " + std::to_string(r));
    }
    p.embeddings = std::move(*embeddings);
    p.embeddings.matrix.set_requires_grad(config.train_embeddings);
  } else {
    std::normal_distribution<double> normal(0.0, 0.01);
    std::vector<T> values(vocabulary_size * r);
    for (auto& v : values) v = static_cast<T>(normal(rng));
    p.embeddings.matrix =
        Tensor<T>::from({vocabulary_size, r}, std::move(values), config.train_embeddings);
    p.embeddings.frozen_rows = {unknown_index};
  }
  p.embeddings.trainable = config.train_embeddings;
  p.encoder = LstmParams<T>::init(r, d, rng);
  p.projection = ProjectionParams<T>::init(config.enrichment_terms().blocks() * 2 * d, d,
                                           config.projection_activation, rng);
  p.inference = LstmParams<T>::init(d, d, rng);
  const std::size_t in = 2 * config.pooled_dim();
  if (config.ablations.hidden_mlp) {
    const std::size_t dh = config.mlp_hidden();
    p.mlp.hidden_weights = uniform_matrix<T>(in, dh, rng);
    p.mlp.hidden_bias = Tensor<T>::zeros({1, dh}, true);
    p.mlp.output_weights = uniform_matrix<T>(dh, kNumLabels, rng);
  } else {
    p.mlp.output_weights = uniform_matrix<T>(in, kNumLabels, rng);
  }
  p.mlp.output_bias = Tensor<T>::zeros({1, kNumLabels}, true);
  return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, const Vocabulary& vocab,
                                    std::optional<EmbeddingTable<T>> embeddings) {
  return init(config, vocab.size(), std::move(embeddings), vocab.unknown());
}

template <typename T>
std::vector<Parameter<T>> ModelParams<T>::parameters() const {
  std::vector<Parameter<T>> out;
  if (embeddings.trainable) out.push_back({"embedding", embeddings.matrix, embeddings.frozen_rows});
  for (auto& p : encoder.parameters("encoder")) out.push_back(std::move(p));
  for (auto& p : projection.parameters("projection")) out.push_back(std::move(p));
  for (auto& p : inference.parameters("inference")) out.push_back(std::move(p));
  if (mlp.has_hidden()) {
    out.push_back({"mlp.hidden.W", mlp.hidden_weights, {}});
    out.push_back({"mlp.hidden.b", mlp.hidden_bias, {}});
  }
  out.push_back({"mlp.out.W", mlp.output_weights, {}});
  out.push_back({"mlp.out.b", mlp.output_bias, {}});
  return out;
}

template <typename T>
std::vector<Parameter<T>> ModelParams<T>::tensors() const {
  auto out = parameters();
  if (!embeddings.trainable) {
    out.insert(out.begin(), Parameter<T>{"embedding", embeddings.matrix, embeddings.frozen_rows});
  }
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams out = *this;
  auto copy_lstm = [](LstmParams<T>& l) {
    for (auto* dir : {&l.forward, &l.backward}) {
      dir->input_weights = dir->input_weights.clone();
      dir->recurrent_weights = dir->recurrent_weights.clone();
      dir->bias = dir->bias.clone();
    }
  };
  auto copy = [](Tensor<T>& t) {
    if (t.defined()) t = t.clone();
  };
  copy(out.embeddings.matrix);
  copy_lstm(out.encoder);
  copy(out.projection.weights);
  copy(out.projection.bias);
  copy_lstm(out.inference);
  copy(out.mlp.hidden_weights);
  copy(out.mlp.hidden_bias);
  copy(out.mlp.output_weights);
  copy(out.mlp.output_bias);
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.size();
  return n;
}

std::size_t parameter_count(const ModelConfig& config, std::size_t vocabulary_size) {
  const std::size_t r = config.embedding_dim, d = config.hidden_dim;
  auto lstm = [d](std::size_t in) { return 2 * (in * 4 * d + d * 4 * d + 4 * d); };
  std::size_t n = config.train_embeddings ? vocabulary_size * r : 0;
  n += lstm(r);
  n += config.enrichment_terms().blocks() * 2 * d * d + d;
  n += lstm(d);
  const std::size_t in = 2 * config.pooled_dim();
  if (config.ablations.hidden_mlp) {
    const std::size_t dh = config.mlp_hidden();
    n += in * dh + dh + dh * kNumLabels + kNumLabels;
  } else {
    n += in * kNumLabels + kNumLabels;
  }
  return n;
}

PairInput PairInput::from(const SentencePair& pair, const Vocabulary& vocab) {
  PairInput in;
  in.premise = vocab.encode(pair.premise);
  in.hypothesis = vocab.encode(pair.hypothesis);
  return in;
}

PairInput PairInput::padded(std::size_t extra_premise, std::size_t extra_hypothesis,
                            std::size_t pad_index) const {
  PairInput out = *this;
  out.premise_length = resolve_length(premise_length, premise.size());
  out.hypothesis_length = resolve_length(hypothesis_length, hypothesis.size());
  out.premise.insert(out.premise.end(), extra_premise, pad_index);
  out.hypothesis.insert(out.hypothesis.end(), extra_hypothesis, pad_index);
  return out;
}

Prediction Prediction::from_probs(std::span<const double> probs) {
  if (probs.size() != kNumLabels) throw ShapeError("prediction needs 3 probabilities");
  Prediction p;
  std::copy(probs.begin(), probs.end(), p.probs.begin());
  const auto best = std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin();
  p.label = static_cast<Label>(best);
  return p;
}

template <typename T>
Tensor<T> mlp(Tape<T>& tape, const Tensor<T>& premise_pooled, const Tensor<T>& hypothesis_pooled,
              const MlpParams<T>& params, double dropout_rate, std::mt19937_64* rng,
              bool training) {
  if (training && dropout_rate > 0.0 && !rng) throw ContractError("mlp: dropout needs a generator");
  Tensor<T> x = concat(tape, {premise_pooled, hypothesis_pooled}, 1);
  const std::size_t expected =
      params.has_hidden() ? params.hidden_weights.rows() : params.output_weights.rows();
  if (x.rows() != 1 || x.cols() != expected) {
    throw ShapeError("mlp: input " + shape_string(x.shape()) + " does not match width " +
                     std::to_string(expected));
  }
  if (training && dropout_rate > 0.0) x = dropout(tape, x, dropout_rate, *rng, training);
  if (params.has_hidden()) {
    x = tanh(tape, add_row(tape, matmul(tape, x, params.hidden_weights), params.hidden_bias));
    if (training && dropout_rate > 0.0) x = dropout(tape, x, dropout_rate, *rng, training);
  }
  const Tensor<T> logits = add_row(tape, matmul(tape, x, params.output_weights), params.output_bias);
  return softmax_rows(tape, logits);
}

template <typename T>
ForwardResult<T> forward(Tape<T>& tape, const ModelParams<T>& params, const PairInput& pair,
                         bool training, std::mt19937_64* rng) {
  const ModelConfig& config = params.config;
  const Ablations& ab = config.ablations;
  if (pair.premise.empty() || pair.hypothesis.empty()) {
    throw ContractError("forward: premise and hypothesis must be non-empty");
  }
  const std::size_t n = pair.premise.size(), m = pair.hypothesis.size();
  const std::size_t n_len = resolve_length(pair.premise_length, n);
  const std::size_t m_len = resolve_length(pair.hypothesis_length, m);
  if (n_len == 0 || m_len == 0 || n_len > n || m_len > m) {
    throw ContractError("forward: invalid sentence lengths");
  }
  const Mask premise_mask = length_mask(n, n_len);
  const Mask hypothesis_mask = length_mask(m, m_len);
  const double rate = training ? config.dropout_rate : 0.0;
  if (rate > 0.0 && !rng) throw ContractError("forward: training with dropout needs a generator");

  const Tensor<T> u = params.embeddings.embed(tape, pair.premise);
  const Tensor<T> v = params.embeddings.embed(tape, pair.hypothesis);

  const auto encoded =
      multi_round_encode(tape, u, v, params.encoder, config.effective_rounds(), n_len, m_len);

  ForwardResult<T> out;
  out.energy = energy(tape, encoded.premise, encoded.hypothesis);
  out.alignment = align(tape, out.energy, encoded.premise, encoded.hypothesis,
                        std::span<const std::uint8_t>(premise_mask),
                        std::span<const std::uint8_t>(hypothesis_mask));
  const EnrichmentTerms terms = config.enrichment_terms();
  const Tensor<T> p = enrich_project(tape, encoded.premise, out.alignment.premise_attended,
                                     params.projection, terms, rate, rng, training);
  const Tensor<T> q = enrich_project(tape, encoded.hypothesis, out.alignment.hypothesis_attended,
                                     params.projection, terms, rate, rng, training);

  Tensor<T> p_tilde, q_tilde;
  if (ab.dep_infer) {
    const auto readings = dependent_inference(tape, p, q, params.inference, n_len, m_len);
    if (ab.inference_pooling) {
      p_tilde = dual_max_pool(tape, readings.premise_independent, readings.premise_dependent);
      q_tilde = dual_max_pool(tape, readings.hypothesis_independent, readings.hypothesis_dependent);
    } else {
      p_tilde = readings.premise_dependent;
      q_tilde = readings.hypothesis_dependent;
    }
  } else {
    const auto zero = RnnState<T>::zero(config.hidden_dim);
    p_tilde = bilstm(tape, p, zero, params.inference, n_len).hiddens;
    q_tilde = bilstm(tape, q, zero, params.inference, m_len).hiddens;
  }

  const Tensor<T> U = pool_fixed(tape, p_tilde, std::span<const std::uint8_t>(premise_mask),
                                 ab.max_pool, ab.avg_pool);
  const Tensor<T> V = pool_fixed(tape, q_tilde, std::span<const std::uint8_t>(hypothesis_mask),
                                 ab.max_pool, ab.avg_pool);
  out.probs = mlp(tape, U, V, params.mlp, rate, rng, training);

  std::array<double, kNumLabels> probs{};
  for (std::size_t k = 0; k < kNumLabels; ++k) probs[k] = static_cast<double>(out.probs.values()[k]);
  out.prediction = Prediction::from_probs(probs);
  return out;
}

template <typename T>
Tensor<T> loss(Tape<T>& tape, const Tensor<T>& probs, Label gold) {
  const auto index = label_index(gold);
  if (index >= kNumLabels) throw ContractError("loss: invalid gold label " + std::to_string(index));
  return negative_log_likelihood(tape, probs, index, T(1e-12));
}

#define DRBL_INSTANTIATE_CLASSIFIER(T)                                                             \
  template struct ModelParams<T>;                                                                  \
  template Tensor<T> mlp(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const MlpParams<T>&,        \
                         double, std::mt19937_64*, bool);                                          \
  template ForwardResult<T> forward(Tape<T>&, const ModelParams<T>&, const PairInput&, bool,       \
                                    std::mt19937_64*);                                             \
  template Tensor<T> loss(Tape<T>&, const Tensor<T>&, Label);

DRBL_INSTANTIATE_CLASSIFIER(float)
DRBL_INSTANTIATE_CLASSIFIER(double)

}  // namespace drbl
