#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "drbl/classifier.hpp"
#include "drbl/data_prep.hpp"
#include "drbl/diagnostics.hpp"
#include "drbl/errors.hpp"
#include "drbl/inference.hpp"
#include "drbl/ops.hpp"
#include "drbl/trainer.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace drbl;
using Td = Tensor<double>;

namespace {

ModelConfig tiny(std::uint64_t seed = 1) {
  ModelConfig c;
  c.embedding_dim = 6;
  c.hidden_dim = 4;
  c.dropout_rate = 0.0;
  c.seed = seed;
  return c;
}

// One premise with an entailed, a neutral and a contradicting hypothesis.
std::vector<SentencePair> one_premise_three_labels() {
  const std::string p = "A senior is waiting at the window of a restaurant that serves sandwiches.";
  return {make_pair(p, "A person waits to be served his food.", Label::entailment, "e"),
          make_pair(p, "A man is looking to order a grilled cheese sandwich.", Label::neutral, "n"),
          make_pair(p, "A man is waiting in line for the bus.", Label::contradiction, "c")};
}

void expect_distribution(const Prediction& p) {
  double s = 0;
  for (double x : p.probs) {
    EXPECT_TRUE(std::isfinite(x));
    EXPECT_GE(x, 0.0);
    s += x;
  }
  EXPECT_NEAR(s, 1.0, 1e-6);
}

PairInput random_input(std::size_t vocab, std::mt19937_64& rng) {
  return random_pair(vocab, 7, rng);
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveUniform) {
  MlpParams<double> p{Td::zeros({8, 3}), Td::zeros({1, 3}), Td::zeros({3, 3}), Td::zeros({1, 3})};
  Tape<double> tape;
  const auto probs = mlp(tape, Td::row({1, 2, 3, 4}), Td::row({-1, 0, 5, 2}), p);
  for (double x : probs.values()) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
}

TEST(Mlp, RandomInputsGiveDistributions) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    MlpParams<double> p{oracle::to_tensor(oracle::random_mat(8, 5, rng, 3.0)),
                        oracle::to_tensor(oracle::random_mat(1, 5, rng)),
                        oracle::to_tensor(oracle::random_mat(5, 3, rng, 3.0)),
                        oracle::to_tensor(oracle::random_mat(1, 3, rng))};
    Tape<double> tape;
    const auto probs = mlp(tape, oracle::to_tensor(oracle::random_mat(1, 4, rng, 10.0)),
                           oracle::to_tensor(oracle::random_mat(1, 4, rng, 10.0)), p);
    EXPECT_NEAR(std::accumulate(probs.values().begin(), probs.values().end(), 0.0), 1.0, 1e-6);
  }
}

TEST(Mlp, MatchesDirectFormula) {
  std::mt19937_64 rng(3);
  const auto wh = oracle::random_mat(4, 3, rng), bh = oracle::random_mat(1, 3, rng);
  const auto wo = oracle::random_mat(3, 3, rng), bo = oracle::random_mat(1, 3, rng);
  const auto u = oracle::random_mat(1, 2, rng), v = oracle::random_mat(1, 2, rng);
  MlpParams<double> p{oracle::to_tensor(wh), oracle::to_tensor(bh), oracle::to_tensor(wo),
                      oracle::to_tensor(bo)};
  Tape<double> tape;
  const auto got = oracle::to_mat(mlp(tape, oracle::to_tensor(u), oracle::to_tensor(v), p))[0];
  const oracle::Vec x{u[0][0], u[0][1], v[0][0], v[0][1]};
  oracle::Vec h(3), z(3);
  for (std::size_t j = 0; j < 3; ++j) {
    double a = bh[0][j];
    for (std::size_t i = 0; i < 4; ++i) a += x[i] * wh[i][j];
    h[j] = std::tanh(a);
  }
  double norm = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    z[k] = bo[0][k];
    for (std::size_t j = 0; j < 3; ++j) z[k] += h[j] * wo[j][k];
    z[k] = std::exp(z[k]);
    norm += z[k];
  }
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[k], z[k] / norm, 1e-12);
}

TEST(Config, HiddenMlpOffDropsExactlyTheHiddenLayer) {
  ModelConfig full = tiny();
  ModelConfig no_hidden = full;
  no_hidden.ablations.hidden_mlp = false;
  const std::size_t vocab = 30;
  const std::size_t in = 2 * full.pooled_dim(), dh = full.mlp_hidden();
  // Output layer goes from dh×3 to in×3 once the hidden layer is gone.
  EXPECT_EQ(parameter_count(full, vocab) - parameter_count(no_hidden, vocab),
            in * dh + dh + dh * 3 - in * 3);
  const auto a = ModelParams<double>::init(full, vocab);
  const auto b = ModelParams<double>::init(no_hidden, vocab);
  EXPECT_EQ(a.parameter_count() - b.parameter_count(),
            a.mlp.hidden_weights.size() + a.mlp.hidden_bias.size() + a.mlp.output_weights.size() -
                b.mlp.output_weights.size());
  EXPECT_FALSE(b.mlp.has_hidden());
}

TEST(Config, ParameterCountIsAFunctionOfTheConfig) {
  for (const auto& named : ablation_configurations()) {
    ModelConfig c = tiny();
    c.ablations = named.ablations;
    for (std::uint64_t seed : {1u, 2u}) {
      c.seed = seed;
      EXPECT_EQ(ModelParams<float>::init(c, 17).parameter_count(), parameter_count(c, 17)) << named.name;
    }
  }
}

TEST(Config, PooledWidthAtDefaultSizeIs1800) {
  const ModelConfig c;
  EXPECT_EQ(c.hidden_dim, 450u);
  EXPECT_EQ(c.embedding_dim, 300u);
  EXPECT_DOUBLE_EQ(c.dropout_rate, 0.4);
  EXPECT_EQ(c.pooled_dim(), 1800u);
}

TEST(Config, TextRoundTrip) {
  ModelConfig c = tiny(9);
  c.projection_activation = Activation::tanh;
  c.dependent_reading_rounds = 3;
  c.ablations.avg_pool = false;
  c.train_embeddings = false;
  EXPECT_EQ(ModelConfig::from_text(c.to_text()), c);
  EXPECT_FALSE(c.set("no_such_key", "1"));
  EXPECT_THROW(c.set("hidden_dim", "abc"), ConfigError);
}

TEST(Config, TenAblationsEachDifferFromBaseline) {
  const auto all = ablation_configurations();
  ASSERT_EQ(all.size(), 11u);
  EXPECT_EQ(all[0].ablations, Ablations{});
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_FALSE(all[i].ablations == Ablations{});
}

TEST(Config, RejectsInvalidSettings) {
  ModelConfig c = tiny();
  c.dependent_reading_rounds = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.ablations.max_pool = false;
  c.ablations.avg_pool = false;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Forward, IdenticalSentencesGiveAValidDistribution) {
  const auto params = ModelParams<double>::init(tiny(), 20);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    auto in = random_input(20, rng);
    in.hypothesis = in.premise;
    in.hypothesis_length = in.premise_length;
    Tape<double> tape;
    expect_distribution(forward(tape, params, in).prediction);
  }
}

TEST(Forward, SwappingSentencesChangesTheOutput) {
  const auto params = ModelParams<double>::init(tiny(), 20);
  std::mt19937_64 rng(5);
  double largest = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_input(20, rng);
    PairInput swapped{in.hypothesis, in.premise, in.hypothesis_length, in.premise_length};
    Tape<double> tape;
    const auto a = forward(tape, params, in).prediction;
    const auto b = forward(tape, params, swapped).prediction;
    for (std::size_t k = 0; k < 3; ++k) largest = std::max(largest, std::abs(a.probs[k] - b.probs[k]));
  }
  EXPECT_GT(largest, 1e-9);
}

TEST(Forward, PaddingLeavesProbabilitiesUnchanged) {
  const auto params = ModelParams<double>::init(tiny(), 20);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_input(20, rng);
    Tape<double> tape;
    const auto a = forward(tape, params, in).prediction;
    const auto b = forward(tape, params, in.padded(1 + trial % 3, trial % 4, 19)).prediction;
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a.probs[k], b.probs[k], 1e-6);
  }
}

TEST(Forward, IsDeterministicWithoutTraining) {
  ModelConfig c = tiny();
  c.dropout_rate = 0.4;
  const auto params = ModelParams<float>::init(c, 20);
  std::mt19937_64 rng(7);
  const auto in = random_input(20, rng);
  Tape<float> t1, t2;
  EXPECT_EQ(forward(t1, params, in).prediction.probs, forward(t2, params, in).prediction.probs);
}

TEST(Forward, EmptySentenceIsRejected) {
  const auto params = ModelParams<double>::init(tiny(), 20);
  Tape<double> tape;
  EXPECT_THROW(forward(tape, params, PairInput{{}, {1, 2}}), ContractError);
}

TEST(Forward, DependentInferenceOffReadsFromZeroState) {
  ModelConfig c = tiny();
  c.ablations.dep_infer = false;
  const auto params = ModelParams<double>::init(c, 20);
  std::mt19937_64 rng(8);
  const auto in = random_input(20, rng);
  Tape<double> tape;
  const auto got = forward(tape, params, in).prediction;

  // Recompose the pipeline by hand with p̃ = p̄.
  const auto u = params.embeddings.embed(tape, in.premise);
  const auto v = params.embeddings.embed(tape, in.hypothesis);
  const auto enc = multi_round_encode(tape, u, v, params.encoder, 2);
  const auto e = energy(tape, enc.premise, enc.hypothesis);
  const auto a = align(tape, e, enc.premise, enc.hypothesis);
  const auto p = enrich_project(tape, enc.premise, a.premise_attended, params.projection);
  const auto q = enrich_project(tape, enc.hypothesis, a.hypothesis_attended, params.projection);
  const auto r = dependent_inference(tape, p, q, params.inference);
  const auto probs = mlp(tape, pool_fixed(tape, r.premise_independent),
                         pool_fixed(tape, r.hypothesis_independent), params.mlp);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got.probs[k], probs.values()[k], 1e-12);
}

TEST(Forward, InferencePoolingOffUsesTheDependentReading) {
  ModelConfig c = tiny();
  c.ablations.inference_pooling = false;
  const auto params = ModelParams<double>::init(c, 20);
  std::mt19937_64 rng(9);
  const auto in = random_input(20, rng);
  Tape<double> tape;
  const auto got = forward(tape, params, in).prediction;

  const auto u = params.embeddings.embed(tape, in.premise);
  const auto v = params.embeddings.embed(tape, in.hypothesis);
  const auto enc = multi_round_encode(tape, u, v, params.encoder, 2);
  const auto e = energy(tape, enc.premise, enc.hypothesis);
  const auto a = align(tape, e, enc.premise, enc.hypothesis);
  const auto p = enrich_project(tape, enc.premise, a.premise_attended, params.projection);
  const auto q = enrich_project(tape, enc.hypothesis, a.hypothesis_attended, params.projection);
  const auto r = dependent_inference(tape, p, q, params.inference);
  const auto probs = mlp(tape, pool_fixed(tape, r.premise_dependent),
                         pool_fixed(tape, r.hypothesis_dependent), params.mlp);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got.probs[k], probs.values()[k], 1e-12);
}

TEST(Forward, DependentEncodingOffUsesIndependentReadings) {
  ModelConfig c = tiny();
  c.ablations.dep_enc = false;
  EXPECT_EQ(c.effective_rounds(), 1);
  c.dependent_reading_rounds = 3;
  EXPECT_EQ(c.effective_rounds(), 1);
}

TEST(Forward, EveryAblationChangesTheModel) {
  std::mt19937_64 rng(10);
  const auto in = random_input(20, rng);
  const auto base = ModelParams<double>::init(tiny(), 20);
  Tape<double> tape;
  const auto reference = forward(tape, base, in).prediction;
  for (const auto& named : ablation_configurations()) {
    if (named.ablations == Ablations{}) continue;
    ModelConfig c = tiny();
    c.ablations = named.ablations;
    const auto params = ModelParams<double>::init(c, 20);
    const auto pred = forward(tape, params, in).prediction;
    expect_distribution(pred);
    double diff = 0;
    for (std::size_t k = 0; k < 3; ++k) diff = std::max(diff, std::abs(pred.probs[k] - reference.probs[k]));
    EXPECT_TRUE(diff > 1e-12 || params.parameter_count() != base.parameter_count()) << named.name;
  }
}

TEST(Loss, CertainGoldIsZeroUniformIsLn3) {
  Tape<double> tape;
  EXPECT_DOUBLE_EQ(loss(tape, Td::row({0, 0, 1}), Label::contradiction).item(), 0.0);
  EXPECT_NEAR(loss(tape, Td::row({1. / 3, 1. / 3, 1. / 3}), Label::neutral).item(), 1.0986, 1e-4);
}

TEST(Loss, BatchMeanMatchesPerExampleMean) {
  const auto params = ModelParams<double>::init(tiny(), 20);
  std::mt19937_64 rng(11);
  std::vector<Example> batch;
  for (int i = 0; i < 6; ++i) batch.push_back({"x", random_input(20, rng), kAllLabels[i % 3]});
  double oracle_sum = 0;
  for (const auto& ex : batch) {
    Tape<double> tape;
    oracle_sum += loss(tape, forward(tape, params, ex.input).probs, ex.gold).item();
  }
  const std::vector<std::uint64_t> seeds(6, 0);
  for (auto& p : params.parameters()) p.tensor.zero_grad();
  const double mean = batch_gradients(params, batch, seeds, 1);
  EXPECT_NEAR(mean, oracle_sum / 6.0, 1e-12);
}

TEST(Forward, ThreeLabelPremiseAfterTrainingIsValid) {
  const auto pairs = one_premise_three_labels();
  const auto vocab = Vocabulary::build(pairs);
  ModelConfig c = tiny();
  c.dropout_rate = 0.1;
  const auto examples = make_examples(pairs, vocab);
  TrainOptions opt;
  opt.max_epochs = 3;
  opt.batch_size = 3;
  opt.patience = 0;
  const auto result = train(ModelParams<float>::init(c, vocab), examples, examples, opt);
  Tape<float> tape;
  expect_distribution(forward(tape, result.best, examples[0].input).prediction);
  EXPECT_EQ(PairInput::from(pairs[0], vocab).premise.size(), pairs[0].premise.size());
}

TEST(GradCheck, FullTinyModel) {
  ModelConfig c;
  c.embedding_dim = 8;
  c.hidden_dim = 12;
  const auto report = model_grad_check(c, 7, 1);
  EXPECT_LT(report.max_rel_error, 1e-4);
  for (const auto& [name, checked] : report.checked_by_tensor) EXPECT_GT(checked, 0u) << name;
}
