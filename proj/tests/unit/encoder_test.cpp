#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "drbl/encoder.hpp"
#include "drbl/errors.hpp"
#include "drbl/grad_check.hpp"
#include "drbl/ops.hpp"
#include "oracles.hpp"

using namespace drbl;
using Td = Tensor<double>;

namespace {

struct Fixture {
  LstmParams<double> params;
  oracle::Direction fwd, bwd;
};

Fixture make_params(std::size_t in, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  Fixture f{LstmParams<double>::init(in, d, rng), {}, {}};
  if (scale != 1.0) {
    for (auto& p : f.params.parameters("x"))
      for (auto& v : p.tensor.mutable_values()) v *= scale;
  }
  f.fwd = oracle::direction_of(f.params.forward);
  f.bwd = oracle::direction_of(f.params.backward);
  return f;
}

oracle::Cell cell_of(const CellState<double>& s) {
  return {oracle::to_mat(s.hidden)[0], oracle::to_mat(s.memory)[0]};
}

CellState<double> state_of(const oracle::Cell& c) {
  return {Td::from({1, c.h.size()}, c.h), Td::from({1, c.c.size()}, c.c)};
}

oracle::Cell random_cell(std::size_t d, std::mt19937_64& rng) {
  const auto m = oracle::random_mat(2, d, rng);
  return {m[0], m[1]};
}

}  // namespace

TEST(LstmCell, ZeroWeightsHalveTheMemory) {
  LstmDirection<double> p{Td::zeros({3, 8}), Td::zeros({2, 8}), Td::zeros({1, 8})};
  Tape<double> tape;
  const auto zero = lstm_cell(tape, Td::row({1, 2, 3}), CellState<double>::zero(2), p);
  EXPECT_EQ(oracle::to_mat(zero.hidden)[0], (std::vector<double>{0, 0}));
  EXPECT_EQ(oracle::to_mat(zero.memory)[0], (std::vector<double>{0, 0}));

  const CellState<double> s{Td::row({0.3, -0.2}), Td::row({1.0, -4.0})};
  const auto next = lstm_cell(tape, Td::row({1, 2, 3}), s, p);
  EXPECT_DOUBLE_EQ(next.memory(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(next.memory(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(next.hidden(0, 0), 0.5 * std::tanh(0.5));
}

TEST(LstmCell, MatchesScalarStep) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = make_params(3, 4, 100 + trial);
    const auto x = oracle::random_mat(1, 3, rng);
    const auto s = random_cell(4, rng);
    Tape<double> tape;
    const auto got = lstm_cell(tape, oracle::to_tensor(x), state_of(s), f.params.forward);
    const auto want = oracle::lstm_step(x[0], s, f.fwd);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.hidden), {want.h}), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.memory), {want.c}), 1e-12);
  }
}

TEST(LstmCell, ThreeChainedCellsPassGradientCheck) {
  auto f = make_params(3, 4, 7);
  std::mt19937_64 rng(3);
  const auto xs = oracle::random_mat(3, 3, rng);
  const auto r = oracle::to_tensor(oracle::random_mat(1, 4, rng));
  Td x0 = oracle::to_tensor(oracle::random_mat(1, 3, rng), true);
  auto loss = [&](Tape<double>& t) {
    CellState<double> s = CellState<double>::zero(4);
    for (std::size_t k = 0; k < 3; ++k) {
      const Td x = k == 0 ? x0 : oracle::to_tensor({xs[k]});
      s = lstm_cell(t, x, s, f.params.forward);
    }
    return sum(t, mul(t, add(t, s.hidden, s.memory), r));
  };
  auto params = f.params.parameters("enc");
  params.resize(3);
  params.push_back({"x0", x0, {}});
  GradCheckOptions opt;
  opt.samples_per_tensor = 30;
  const auto report = grad_check(loss, params, opt);
  EXPECT_LT(report.max_rel_error, 1e-4);
  EXPECT_EQ(report.kinks, 0u);
}

TEST(LstmCell, SaturatedInputsStayFinite) {
  LstmDirection<double> p{Td::filled({2, 8}, 50.0), Td::filled({2, 8}, -50.0), Td::zeros({1, 8})};
  Tape<double> tape;
  const CellState<double> s{Td::row({1, -1}), Td::row({3, -3})};
  for (double x : {100.0, -100.0}) {
    const auto out = lstm_cell(tape, Td::row({x, x}), s, p);
    for (double v : out.hidden.values()) EXPECT_TRUE(std::isfinite(v));
    for (double v : out.memory.values()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(LstmCell, NonFiniteStateIsANumericError) {
  auto f = make_params(2, 2, 1);
  Tape<double> tape;
  const CellState<double> s{Td::row({std::numeric_limits<double>::quiet_NaN(), 0}), Td::row({0, 0})};
  EXPECT_THROW(lstm_cell(tape, Td::row({1, 1}), s, f.params.forward), NumericError);
}

TEST(BiLstm, SingleStepIsOneCellEachWay) {
  auto f = make_params(3, 2, 4);
  std::mt19937_64 rng(4);
  const auto x = oracle::random_mat(1, 3, rng);
  Tape<double> tape;
  const auto out = bilstm(tape, oracle::to_tensor(x), RnnState<double>::zero(2), f.params);
  const auto fw = lstm_cell(tape, oracle::to_tensor(x), CellState<double>::zero(2), f.params.forward);
  const auto bw = lstm_cell(tape, oracle::to_tensor(x), CellState<double>::zero(2), f.params.backward);
  EXPECT_EQ(out.hiddens(0, 0), fw.hidden(0, 0));
  EXPECT_EQ(out.hiddens(0, 1), fw.hidden(0, 1));
  EXPECT_EQ(out.hiddens(0, 2), bw.hidden(0, 0));
  EXPECT_EQ(out.hiddens(0, 3), bw.hidden(0, 1));
}

TEST(BiLstm, MatchesUnrolledOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t steps = 1 + trial % 6, d = 3;
    auto f = make_params(4, d, 200 + trial);
    const auto x = oracle::random_mat(steps, 4, rng);
    const auto s0f = random_cell(d, rng), s0b = random_cell(d, rng);
    Tape<double> tape;
    const auto got = bilstm(tape, oracle::to_tensor(x), {state_of(s0f), state_of(s0b)}, f.params);
    const auto want = oracle::bilstm(x, s0f, s0b, f.fwd, f.bwd, steps);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.hiddens), want.hiddens), 1e-12);
    EXPECT_LE(oracle::max_abs_diff({cell_of(got.final.forward).c}, {want.fwd_final.c}), 1e-12);
    EXPECT_LE(oracle::max_abs_diff({cell_of(got.final.backward).h}, {want.bwd_final.h}), 1e-12);
  }
}

TEST(BiLstm, PaddingIsSkipped) {
  auto f = make_params(2, 3, 6);
  std::mt19937_64 rng(6);
  const auto x = oracle::random_mat(5, 2, rng);
  Tape<double> tape;
  const auto got = bilstm(tape, oracle::to_tensor(x), RnnState<double>::zero(3), f.params, 3);
  const auto want =
      oracle::bilstm(x, oracle::zero_cell(3), oracle::zero_cell(3), f.fwd, f.bwd, 3);
  EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.hiddens), want.hiddens), 1e-12);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(got.hiddens(4, j), 0.0);
}

TEST(BiLstm, IndependentReadingIgnoresOtherSentence) {
  auto f = make_params(2, 3, 8);
  std::mt19937_64 rng(8);
  const auto u = oracle::to_tensor(oracle::random_mat(4, 2, rng));
  Tape<double> tape;
  const auto a = dependent_encode(tape, u, oracle::to_tensor(oracle::random_mat(3, 2, rng)), f.params);
  const auto b = dependent_encode(tape, u, oracle::to_tensor(oracle::random_mat(6, 2, rng)), f.params);
  EXPECT_EQ(oracle::to_mat(a.premise_independent), oracle::to_mat(b.premise_independent));
  const auto zero = bilstm(tape, u, RnnState<double>::zero(3), f.params);
  EXPECT_EQ(oracle::to_mat(a.premise_independent), oracle::to_mat(zero.hiddens));
}

TEST(DependentEncode, InjectedStateChangesTheReading) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto f = make_params(3, 4, 300 + trial);
    Tape<double> tape;
    const auto r = dependent_encode(tape, oracle::to_tensor(oracle::random_mat(4, 3, rng)),
                                    oracle::to_tensor(oracle::random_mat(5, 3, rng)), f.params);
    EXPECT_GT(oracle::max_abs_diff(oracle::to_mat(r.premise_dependent),
                                   oracle::to_mat(r.premise_independent)),
              1e-9);
    EXPECT_GT(oracle::max_abs_diff(oracle::to_mat(r.hypothesis_dependent),
                                   oracle::to_mat(r.hypothesis_independent)),
              1e-9);
  }
}

TEST(DependentEncode, AllPassesReadTheSameTensors) {
  auto f = make_params(2, 2, 10);
  for (auto& p : f.params.parameters("enc")) p.tensor.set_requires_grad(true);
  std::mt19937_64 rng(10);
  const auto u = oracle::to_tensor(oracle::random_mat(3, 2, rng));
  const auto v = oracle::to_tensor(oracle::random_mat(2, 2, rng));
  Tape<double> tape;
  const auto r = dependent_encode(tape, u, v, f.params);
  std::set<const void*> leaves;
  for (const auto& p : f.params.parameters("enc")) leaves.insert(p.tensor.id());
  EXPECT_EQ(leaves.size(), 6u);
  // û alone depends on the v pass through the injected state, so its
  // gradient reaches every shared tensor.
  tape.backward(sum(tape, r.premise_dependent));
  for (const auto& p : f.params.parameters("enc")) EXPECT_FALSE(p.tensor.grad().empty()) << p.name;
}

TEST(DependentEncode, MatchesHandThreadedPasses) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = make_params(3, 2, 400 + trial);
    const auto u = oracle::random_mat(2 + trial % 4, 3, rng);
    const auto v = oracle::random_mat(1 + trial % 5, 3, rng);
    const auto z = oracle::zero_cell(2);
    const auto sv = oracle::bilstm(v, z, z, f.fwd, f.bwd, v.size());
    const auto u_hat = oracle::bilstm(u, sv.fwd_final, sv.bwd_final, f.fwd, f.bwd, u.size());
    const auto su = oracle::bilstm(u, z, z, f.fwd, f.bwd, u.size());
    const auto v_hat = oracle::bilstm(v, su.fwd_final, su.bwd_final, f.fwd, f.bwd, v.size());
    Tape<double> tape;
    const auto got =
        dependent_encode(tape, oracle::to_tensor(u), oracle::to_tensor(v), f.params);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.premise_dependent), u_hat.hiddens), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.hypothesis_dependent), v_hat.hiddens), 1e-12);
  }
}

TEST(MultiRound, OneRoundIsZeroStateReading) {
  auto f = make_params(3, 2, 12);
  std::mt19937_64 rng(12);
  const auto u = oracle::to_tensor(oracle::random_mat(4, 3, rng));
  const auto v = oracle::to_tensor(oracle::random_mat(3, 3, rng));
  Tape<double> tape;
  const auto got = multi_round_encode(tape, u, v, f.params, 1);
  EXPECT_EQ(oracle::to_mat(got.premise),
            oracle::to_mat(bilstm(tape, u, RnnState<double>::zero(2), f.params).hiddens));
  EXPECT_EQ(oracle::to_mat(got.hypothesis),
            oracle::to_mat(bilstm(tape, v, RnnState<double>::zero(2), f.params).hiddens));
}

TEST(MultiRound, TwoRoundsIsDependentEncode) {
  auto f = make_params(3, 2, 13);
  std::mt19937_64 rng(13);
  const auto u = oracle::to_tensor(oracle::random_mat(4, 3, rng));
  const auto v = oracle::to_tensor(oracle::random_mat(3, 3, rng));
  Tape<double> tape;
  const auto got = multi_round_encode(tape, u, v, f.params, 2);
  const auto ref = dependent_encode(tape, u, v, f.params);
  EXPECT_EQ(oracle::to_mat(got.premise), oracle::to_mat(ref.premise_dependent));
  EXPECT_EQ(oracle::to_mat(got.hypothesis), oracle::to_mat(ref.hypothesis_dependent));
}

TEST(MultiRound, ThreeRoundsMatchesFourPassOracle) {
  auto f = make_params(3, 2, 14);
  std::mt19937_64 rng(14);
  const auto u = oracle::random_mat(3, 3, rng);
  const auto v = oracle::random_mat(4, 3, rng);
  const auto z = oracle::zero_cell(2);
  auto read = [&](const oracle::Mat& x, const oracle::BiResult& from) {
    return oracle::bilstm(x, from.fwd_final, from.bwd_final, f.fwd, f.bwd, x.size());
  };
  const auto v0 = oracle::bilstm(v, z, z, f.fwd, f.bwd, v.size());
  const auto u_hat = read(u, read(v, read(u, v0)));
  const auto u0 = oracle::bilstm(u, z, z, f.fwd, f.bwd, u.size());
  const auto v_hat = read(v, read(u, read(v, u0)));
  Tape<double> tape;
  const auto got = multi_round_encode(tape, oracle::to_tensor(u), oracle::to_tensor(v), f.params, 3);
  EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.premise), u_hat.hiddens), 1e-12);
  EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.hypothesis), v_hat.hiddens), 1e-12);
}

TEST(MultiRound, RejectsUnknownRoundCount) {
  auto f = make_params(1, 1, 1);
  Tape<double> tape;
  EXPECT_THROW(multi_round_encode(tape, Td::zeros({1, 1}), Td::zeros({1, 1}), f.params, 4),
               ConfigError);
}

TEST(DependentEncode, PassesGradientCheck) {
  auto f = make_params(3, 2, 15);
  std::mt19937_64 rng(15);
  const auto u = oracle::to_tensor(oracle::random_mat(3, 3, rng));
  const auto v = oracle::to_tensor(oracle::random_mat(2, 3, rng));
  const auto ru = oracle::to_tensor(oracle::random_mat(3, 4, rng));
  const auto rv = oracle::to_tensor(oracle::random_mat(2, 4, rng));
  auto loss = [&](Tape<double>& t) {
    const auto r = dependent_encode(t, u, v, f.params);
    return add(t, sum(t, mul(t, r.premise_dependent, ru)), sum(t, mul(t, r.hypothesis_dependent, rv)));
  };
  GradCheckOptions opt;
  opt.samples_per_tensor = 12;
  const auto report = grad_check(loss, f.params.parameters("enc"), opt);
  EXPECT_LT(report.max_rel_error, 1e-4);
}
