#include "drbl/diagnostics.hpp"

#include <algorithm>
#include <set>

#include "drbl/errors.hpp"

namespace drbl {

PairInput random_pair(std::size_t vocabulary_size, std::size_t max_tokens, std::mt19937_64& rng) {
  if (vocabulary_size == 0) throw ConfigError("random_pair: empty vocabulary");
  if (max_tokens < 3) throw ConfigError("random_pair: sentences need at least 3 tokens");
  std::uniform_int_distribution<std::size_t> length(3, max_tokens);
  std::uniform_int_distribution<std::size_t> token(0, vocabulary_size - 1);
  PairInput in;
  in.premise.resize(length(rng));
  in.hypothesis.resize(length(rng));
  for (auto& t : in.premise) t = token(rng);
  for (auto& t : in.hypothesis) t = token(rng);
  return in;
}

GradCheckReport model_grad_check(ModelConfig config, std::size_t max_tokens, std::uint64_t seed,
                                 const GradCheckOptions& options) {
  config.dropout_rate = 0.0;
  config.seed = seed;
  constexpr std::size_t kVocabulary = 24;
  constexpr std::size_t kUnknown = kVocabulary - 1;
  // Larger than the default init so gates and projections leave their
  // near-linear regime.
  auto params = ModelParams<double>::init(config, kVocabulary, std::nullopt, kUnknown);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  {
    std::normal_distribution<double> normal(0.0, 0.5);
    for (auto& v : params.embeddings.matrix.mutable_values()) v = normal(rng);
  }
  const PairInput pair = random_pair(kUnknown, max_tokens, rng);
  const Label gold = static_cast<Label>(std::uniform_int_distribution<std::size_t>(0, 2)(rng));

  std::map<std::string, std::vector<std::size_t>> coords;
  std::set<std::size_t> rows(pair.premise.begin(), pair.premise.end());
  rows.insert(pair.hypothesis.begin(), pair.hypothesis.end());
  const std::size_t r = config.embedding_dim;
  auto& emb = coords["embedding"];
  for (auto row : rows) {
    for (std::size_t j = 0; j < r; ++j) emb.push_back(row * r + j);
  }

  auto loss_fn = [&](Tape<double>& tape) {
    const auto result = forward(tape, params, pair, false);
    return loss(tape, result.probs, gold);
  };
  return grad_check(loss_fn, params.parameters(), options, coords);
}

}  // namespace drbl
