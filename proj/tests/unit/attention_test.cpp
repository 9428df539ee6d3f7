#include <gtest/gtest.h>

#include <numeric>

#include "drbl/attention.hpp"
#include "drbl/errors.hpp"
#include "drbl/grad_check.hpp"
#include "drbl/ops.hpp"
#include "oracles.hpp"

using namespace drbl;
using Td = Tensor<double>;

namespace {

std::vector<int> random_mask(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(0.6);
  std::vector<int> m(n);
  for (auto& x : m) x = keep(rng);
  m[rng() % n] = 1;
  return m;
}

std::vector<std::uint8_t> bytes(const std::vector<int>& m) { return {m.begin(), m.end()}; }

}  // namespace

TEST(Energy, ScaledRowGivesScaledSquaredNorm) {
  Tape<double> tape;
  const Td v = Td::matrix({{1, 2, 0, -1}, {0.5, 0.5, 3, 1}});
  const Td u = Td::matrix({{-0.75, -0.75, -4.5, -1.5}});
  const Td e = energy(tape, u, v);
  EXPECT_DOUBLE_EQ(e(0, 1), -1.5 * (0.25 + 0.25 + 9 + 1));
}

TEST(Energy, OrthogonalRowsGiveZero) {
  Tape<double> tape;
  const Td e = energy(tape, Td::matrix({{1, 0, 1, 0}}), Td::matrix({{0, 2, 0, -3}}));
  EXPECT_EQ(e(0, 0), 0.0);
}

TEST(Energy, MatchesTripleLoop) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = oracle::random_mat(1 + trial % 5, 6, rng);
    const auto v = oracle::random_mat(1 + trial % 7, 6, rng);
    oracle::Mat vt(6, oracle::Vec(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t k = 0; k < 6; ++k) vt[k][i] = v[i][k];
    Tape<double> tape;
    const auto got = oracle::to_mat(energy(tape, oracle::to_tensor(u), oracle::to_tensor(v)));
    EXPECT_LE(oracle::max_abs_diff(got, oracle::matmul(u, vt)), 1e-12);
  }
}

TEST(Energy, WidthMismatchIsAShapeError) {
  Tape<double> tape;
  EXPECT_THROW(energy(tape, Td::zeros({2, 4}), Td::zeros({2, 6})), ShapeError);
}

TEST(Align, UniformEnergyAveragesRealRows) {
  std::mt19937_64 rng(2);
  const auto u = oracle::random_mat(3, 4, rng);
  const auto v = oracle::random_mat(4, 4, rng);
  const std::vector<std::uint8_t> hm{1, 0, 1, 1};
  Tape<double> tape;
  const auto a = align(tape, Td::zeros({3, 4}), oracle::to_tensor(u), oracle::to_tensor(v), {},
                       std::span<const std::uint8_t>(hm));
  for (std::size_t k = 0; k < 4; ++k) {
    const double mean = (v[0][k] + v[2][k] + v[3][k]) / 3.0;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.premise_attended(i, k), mean, 1e-12);
  }
}

TEST(Align, DominantEntrySelectsThatRow) {
  std::mt19937_64 rng(3);
  const auto u = oracle::random_mat(2, 3, rng);
  const auto v = oracle::random_mat(3, 3, rng);
  auto e = Td::zeros({2, 3});
  e.at(0, 2) = 80.0;
  e.at(1, 0) = 80.0;
  Tape<double> tape;
  const auto a = align(tape, e, oracle::to_tensor(u), oracle::to_tensor(v));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(a.premise_attended(0, k), v[2][k], 1e-12);
    EXPECT_NEAR(a.premise_attended(1, k), v[0][k], 1e-12);
  }
}

TEST(Align, MatchesDoubleLoop) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = trial == 0 ? 3 : 1 + rng() % 6, m = trial == 0 ? 2 : 1 + rng() % 6;
    const auto u = oracle::random_mat(n, 4, rng);
    const auto v = oracle::random_mat(m, 4, rng);
    const auto e = oracle::random_mat(n, m, rng, 3.0);
    const auto pm = trial < 5 ? std::vector<int>(n, 1) : random_mask(n, rng);
    const auto hm = trial < 5 ? std::vector<int>(m, 1) : random_mask(m, rng);
    const auto pb = bytes(pm), hb = bytes(hm);
    Tape<double> tape;
    const auto got = align(tape, oracle::to_tensor(e), oracle::to_tensor(u), oracle::to_tensor(v),
                           std::span<const std::uint8_t>(pb), std::span<const std::uint8_t>(hb));
    const auto want = oracle::align(e, u, v, pm, hm);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.premise_attended), want.premise_attended), 1e-10);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.hypothesis_attended), want.hypothesis_attended),
              1e-10);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.premise_weights), want.premise_weights), 1e-10);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(got.hypothesis_weights), want.hypothesis_weights),
              1e-10);
  }
}

TEST(Align, WeightsAreRowStochastic) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 8, m = 1 + rng() % 8;
    const auto pb = bytes(random_mask(n, rng)), hb = bytes(random_mask(m, rng));
    Tape<double> tape;
    const auto a = align(tape, oracle::to_tensor(oracle::random_mat(n, m, rng, 20.0)),
                         oracle::to_tensor(oracle::random_mat(n, 3, rng)),
                         oracle::to_tensor(oracle::random_mat(m, 3, rng)),
                         std::span<const std::uint8_t>(pb), std::span<const std::uint8_t>(hb));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < m; ++j) s += a.premise_weights(i, j);
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += a.hypothesis_weights(j, i);
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Align, PermutingHypothesisPermutesEnergyColumns) {
  std::mt19937_64 rng(6);
  const auto u = oracle::random_mat(3, 4, rng);
  auto v = oracle::random_mat(4, 4, rng);
  Tape<double> tape;
  const auto e1 = energy(tape, oracle::to_tensor(u), oracle::to_tensor(v));
  const auto a1 = align(tape, e1, oracle::to_tensor(u), oracle::to_tensor(v));
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  oracle::Mat pv;
  for (auto p : perm) pv.push_back(v[p]);
  const auto e2 = energy(tape, oracle::to_tensor(u), oracle::to_tensor(pv));
  const auto a2 = align(tape, e2, oracle::to_tensor(u), oracle::to_tensor(pv));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(e2(i, j), e1(i, perm[j]));
  EXPECT_LE(oracle::max_abs_diff(oracle::to_mat(a1.premise_attended),
                                 oracle::to_mat(a2.premise_attended)),
            1e-12);
}

TEST(Enrich, EqualInputsGiveZeroDifferenceAndSquares) {
  Tape<double> tape;
  const Td x = Td::matrix({{1, -2}, {0.5, 3}});
  const auto out = enrich(tape, x, x);
  ASSERT_EQ(out.cols(), 8u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_EQ(out(i, 4 + k), 0.0);
      EXPECT_EQ(out(i, 6 + k), x(i, k) * x(i, k));
    }
  }
}

TEST(Enrich, AblationsShrinkTheWidth) {
  Tape<double> tape;
  const Td x = Td::zeros({3, 6});
  EXPECT_EQ(enrich(tape, x, x, {true, true}).cols(), 24u);
  EXPECT_EQ(enrich(tape, x, x, {false, true}).cols(), 18u);
  EXPECT_EQ(enrich(tape, x, x, {true, false}).cols(), 18u);
  EXPECT_EQ(enrich(tape, x, x, {false, false}).cols(), 12u);
  std::mt19937_64 rng(1);
  const auto p = ProjectionParams<double>::init(EnrichmentTerms{false, false}.blocks() * 6, 3,
                                                Activation::relu, rng);
  EXPECT_EQ(p.weights.rows(), 12u);
  EXPECT_EQ(enrich_project(tape, x, x, p, {false, false}).cols(), 3u);
}

TEST(Enrich, ZeroWeightsGiveActivatedBias) {
  std::mt19937_64 rng(7);
  for (Activation act : {Activation::relu, Activation::tanh}) {
    ProjectionParams<double> p{Td::zeros({8, 3}), Td::row({-0.5, 0.25, 2.0}), act};
    Tape<double> tape;
    const auto out = enrich_project(tape, oracle::to_tensor(oracle::random_mat(4, 2, rng)),
                                    oracle::to_tensor(oracle::random_mat(4, 2, rng)), p);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double b = p.bias(0, k);
        EXPECT_DOUBLE_EQ(out(i, k), act == Activation::relu ? std::max(b, 0.0) : std::tanh(b));
      }
    }
  }
}

TEST(Enrich, PassesGradientCheck) {
  std::mt19937_64 rng(8);
  for (Activation act : {Activation::relu, Activation::tanh}) {
    auto p = ProjectionParams<double>::init(16, 3, act, rng);
    Td x = oracle::to_tensor(oracle::random_mat(3, 4, rng), true);
    Td y = oracle::to_tensor(oracle::random_mat(3, 4, rng), true);
    const auto r = oracle::to_tensor(oracle::random_mat(3, 3, rng));
    auto loss = [&](Tape<double>& t) { return sum(t, mul(t, enrich_project(t, x, y, p), r)); };
    GradCheckOptions opt;
    opt.samples_per_tensor = 12;
    const auto report =
        grad_check(loss, {{"W", p.weights, {}}, {"b", p.bias, {}}, {"x", x, {}}, {"y", y, {}}}, opt);
    EXPECT_LT(report.max_rel_error, 1e-4);
    for (const auto& [name, checked] : report.checked_by_tensor) EXPECT_GT(checked, 0u) << name;
  }
}

TEST(Enrich, DropoutOnlyWhenTraining) {
  std::mt19937_64 rng(9);
  auto p = ProjectionParams<double>::init(8, 3, Activation::tanh, rng);
  const auto x = oracle::to_tensor(oracle::random_mat(5, 2, rng));
  Tape<double> tape;
  std::mt19937_64 drop(1);
  const auto clean = oracle::to_mat(enrich_project(tape, x, x, p));
  EXPECT_EQ(oracle::to_mat(enrich_project(tape, x, x, p, {}, 0.5, &drop, false)), clean);
  EXPECT_GT(oracle::max_abs_diff(oracle::to_mat(enrich_project(tape, x, x, p, {}, 0.5, &drop, true)),
                                 clean),
            1e-6);
}
