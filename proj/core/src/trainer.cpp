#include "drbl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "drbl/ops.hpp"

namespace drbl {
namespace {

// Runs fn(i) for i in [0, n) on up to `threads` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

bool is_frozen(const std::vector<std::size_t>& frozen, std::size_t row) {
  return std::find(frozen.begin(), frozen.end(), row) != frozen.end();
}

}  // namespace

template <typename T>
AdamState<T> AdamState<T>::init(std::span<const Parameter<T>> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.names.push_back(p.name);
    s.first_moment.emplace_back(p.tensor.size(), T(0));
    s.second_moment.emplace_back(p.tensor.size(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(std::span<const Parameter<T>> params, AdamState<T>& state) {
  if (params.size() != state.names.size()) {
    throw ContractError("adam_step: optimizer state tracks " + std::to_string(state.names.size()) +
                        " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (p.name != state.names[k] || state.first_moment[k].size() != p.tensor.size()) {
      throw ContractError("adam_step: parameter '" + p.name + "' does not match optimizer state");
    }
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + p.name + "'");
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T> tensor = params[k].tensor;
    const auto grad = tensor.grad();
    auto values = tensor.mutable_values();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const std::size_t width = tensor.rank() == 2 ? tensor.cols() : tensor.size();
    const auto& frozen = params[k].frozen_rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!frozen.empty() && is_frozen(frozen, i / width)) continue;
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      values[i] = static_cast<T>(values[i] - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

template <typename T>
double clip_gradients(std::span<const Parameter<T>> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (const auto& p : params) {
      Tensor<T> t = p.tensor;
      for (auto& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

std::vector<Example> make_examples(std::span<const SentencePair> pairs, const Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.id, PairInput::from(p, vocab), p.label});
  return out;
}

template <typename T>
double batch_gradients(const ModelParams<T>& params, std::span<const Example> batch,
                       std::span<const std::uint64_t> dropout_seeds, std::size_t threads,
                       std::size_t* correct) {
  if (batch.empty()) throw ContractError("batch_gradients: empty batch");
  if (dropout_seeds.size() != batch.size()) {
    throw ContractError("batch_gradients: one dropout seed per example required");
  }
  const T inv = T(1) / static_cast<T>(batch.size());
  std::vector<std::unique_ptr<Tape<T>>> tapes(batch.size());
  std::vector<double> losses(batch.size());
  std::vector<std::uint8_t> hits(batch.size());
  auto run = [&](std::size_t i) {
    auto tape = std::make_unique<Tape<T>>();
    std::mt19937_64 rng(dropout_seeds[i]);
    const auto result = forward(*tape, params, batch[i].input, true, &rng);
    const Tensor<T> l = loss(*tape, result.probs, batch[i].gold);
    losses[i] = static_cast<double>(l.item());
    hits[i] = result.prediction.label == batch[i].gold;
    tape->backward_local(scale(*tape, l, inv));
    tapes[i] = std::move(tape);
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      run(i);
      tapes[i]->flush_leaf_grads();
      tapes[i].reset();
    }
  } else {
    parallel_for(batch.size(), threads, run);
    for (auto& tape : tapes) {
      tape->flush_leaf_grads();
      tape.reset();
    }
  }
  if (correct) *correct = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(batch.size());
}

template <typename T>
Evaluation evaluate(const ModelParams<T>& params, std::span<const Example> examples,
                    std::size_t threads) {
  Evaluation ev;
  ev.predictions.resize(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    Tape<T> tape;
    ev.predictions[i] = forward(tape, params, examples[i].input, false).prediction;
  });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) hits += ev.predictions[i].label == examples[i].gold;
  ev.accuracy = examples.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(examples.size());
  return ev;
}

double accuracy(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) {
    throw ContractError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

template <typename T>
TrainResult<T> train(ModelParams<T> params, std::span<const Example> train_set,
                     std::span<const Example> dev_set, const TrainOptions& options) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (dev_set.empty()) throw ConfigError("development set is empty");
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  if (options.max_epochs == 0) throw ConfigError("epoch budget must be positive");

  const auto parameters = params.parameters();
  TrainResult<T> result;
  result.adam = AdamState<T>::init(parameters, options.adam);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t since_best = 0;

  std::vector<Example> batch;
  std::vector<std::uint64_t> seeds;
  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      batch.clear();
      seeds.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_set[order[i]]);
        seeds.push_back(rng());
      }
      for (const auto& p : parameters) {
        Tensor<T> t = p.tensor;
        t.zero_grad();
      }
      std::size_t batch_correct = 0;
      const double mean = batch_gradients(params, batch, seeds, options.threads, &batch_correct);
      loss_sum += mean * static_cast<double>(batch.size());
      correct += batch_correct;
      if (options.clip_norm > 0.0) clip_gradients<T>(parameters, options.clip_norm);
      adam_step<T>(parameters, result.adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_accuracy = options.clean_train_accuracy
                             ? evaluate(params, train_set, options.threads).accuracy
                             : static_cast<double>(correct) / static_cast<double>(train_set.size());
    rec.dev_accuracy = evaluate(params, dev_set, options.threads).accuracy;
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (rec.dev_accuracy > result.best_dev_accuracy) {
      result.best_dev_accuracy = rec.dev_accuracy;
      result.best_epoch = epoch;
      result.best = params.clone();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (rec.train_accuracy >= options.stop_at_train_accuracy) break;
    if (options.patience > 0 && since_best >= options.patience) break;
  }
  for (const auto& p : parameters) {
    Tensor<T> t = p.tensor;
    t.mutable_grad().clear();
  }
  result.last = std::move(params);
  return result;
}

void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,train_acc,dev_acc,mean_loss\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_accuracy << ',' << r.dev_accuracy << ',' << r.mean_loss << '\n';
  }
}

std::vector<EpochRecord> read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<EpochRecord> out;
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    EpochRecord r;
    if (!(ss >> r.epoch >> r.train_accuracy >> r.dev_accuracy >> r.mean_loss)) {
      throw ParseError("malformed history row", line_no);
    }
    out.push_back(r);
  }
  return out;
}

#define DRBL_INSTANTIATE_TRAINER(T)                                                              \
  template struct AdamState<T>;                                                                  \
  template void adam_step(std::span<const Parameter<T>>, AdamState<T>&);                         \
  template double clip_gradients(std::span<const Parameter<T>>, double);                         \
  template double batch_gradients(const ModelParams<T>&, std::span<const Example>,               \
                                  std::span<const std::uint64_t>, std::size_t, std::size_t*);    \
  template TrainResult<T> train(ModelParams<T>, std::span<const Example>,                        \
                                std::span<const Example>, const TrainOptions&);                  \
  template Evaluation evaluate(const ModelParams<T>&, std::span<const Example>, std::size_t);

DRBL_INSTANTIATE_TRAINER(float)
DRBL_INSTANTIATE_TRAINER(double)

}  // namespace drbl
