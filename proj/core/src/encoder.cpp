#include "drbl/encoder.hpp"

#include <cmath>

#include "drbl/ops.hpp"

namespace drbl {
namespace {

template <typename T>
LstmDirection<T> init_direction(std::size_t in, std::size_t d, std::mt19937_64& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> uniform(-k, k);
  auto draw = [&](std::size_t n) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(uniform(rng));
    return v;
  };
  LstmDirection<T> dir;
  dir.input_weights = Tensor<T>::from({in, 4 * d}, draw(in * 4 * d), true);
  dir.recurrent_weights = Tensor<T>::from({d, 4 * d}, draw(d * 4 * d), true);
  std::vector<T> bias(4 * d, T(0));
  for (std::size_t j = d; j < 2 * d; ++j) bias[j] = T(1);
  dir.bias = Tensor<T>::from({1, 4 * d}, std::move(bias), true);
  return dir;
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string("lstm_cell: non-finite ") + what);
  }
}

// Gate pre-activations are given as one 1×4d row.
template <typename T>
CellState<T> cell_from_gates(Tape<T>& tape, const Tensor<T>& gates, const CellState<T>& state,
                             std::size_t d) {
  const Tensor<T> in_gate = sigmoid(tape, slice(tape, gates, 1, 0, d));
  const Tensor<T> forget_gate = sigmoid(tape, slice(tape, gates, 1, d, 2 * d));
  const Tensor<T> candidate = tanh(tape, slice(tape, gates, 1, 2 * d, 3 * d));
  const Tensor<T> out_gate = sigmoid(tape, slice(tape, gates, 1, 3 * d, 4 * d));
  CellState<T> next;
  next.memory = add(tape, mul(tape, forget_gate, state.memory), mul(tape, in_gate, candidate));
  next.hidden = mul(tape, out_gate, tanh(tape, next.memory));
  require_finite(next.memory, "memory cell");
  require_finite(next.hidden, "hidden state");
  return next;
}

template <typename T>
std::vector<CellState<T>> run_direction(Tape<T>& tape, const Tensor<T>& projected,
                                        const CellState<T>& init, const LstmDirection<T>& dir,
                                        std::size_t length, bool reverse) {
  const std::size_t d = dir.hidden_dim();
  std::vector<CellState<T>> states(length);
  CellState<T> state = init;
  for (std::size_t step = 0; step < length; ++step) {
    const std::size_t t = reverse ? length - 1 - step : step;
    const Tensor<T> gates =
        add(tape, slice(tape, projected, 0, t, t + 1), matmul(tape, state.hidden, dir.recurrent_weights));
    state = cell_from_gates(tape, gates, state, d);
    states[t] = state;
  }
  return states;
}

template <typename T>
void check_state(const CellState<T>& s, std::size_t d) {
  if (!s.hidden.defined() || !s.memory.defined() || s.hidden.shape() != Shape{1, d} ||
      s.memory.shape() != Shape{1, d}) {
    throw ShapeError("initial state does not match hidden size " + std::to_string(d));
  }
}

}  // namespace

template <typename T>
LstmParams<T> LstmParams<T>::init(std::size_t input_dim, std::size_t hidden_dim,
                                  std::mt19937_64& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("LSTM dimensions must be positive");
  LstmParams p;
  p.forward = init_direction<T>(input_dim, hidden_dim, rng);
  p.backward = init_direction<T>(input_dim, hidden_dim, rng);
  return p;
}

template <typename T>
std::vector<Parameter<T>> LstmParams<T>::parameters(const std::string& prefix) const {
  return {
      {prefix + ".fwd.W", forward.input_weights, {}},
      {prefix + ".fwd.R", forward.recurrent_weights, {}},
      {prefix + ".fwd.b", forward.bias, {}},
      {prefix + ".bwd.W", backward.input_weights, {}},
      {prefix + ".bwd.R", backward.recurrent_weights, {}},
      {prefix + ".bwd.b", backward.bias, {}},
  };
}

template <typename T>
CellState<T> CellState<T>::zero(std::size_t hidden_dim) {
  return {Tensor<T>::zeros({1, hidden_dim}), Tensor<T>::zeros({1, hidden_dim})};
}

template <typename T>
RnnState<T> RnnState<T>::zero(std::size_t hidden_dim) {
  return {CellState<T>::zero(hidden_dim), CellState<T>::zero(hidden_dim)};
}

template <typename T>
CellState<T> lstm_cell(Tape<T>& tape, const Tensor<T>& input, const CellState<T>& state,
                       const LstmDirection<T>& params) {
  const std::size_t d = params.hidden_dim();
  check_state(state, d);
  if (input.rank() != 2 || input.rows() != 1 || input.cols() != params.input_dim()) {
    throw ShapeError("lstm_cell: input " + shape_string(input.shape()) + " does not match input size " +
                     std::to_string(params.input_dim()));
  }
  const Tensor<T> gates =
      add(tape, add_row(tape, matmul(tape, input, params.input_weights), params.bias),
          matmul(tape, state.hidden, params.recurrent_weights));
  return cell_from_gates(tape, gates, state, d);
}

template <typename T>
BiLstmOutput<T> bilstm(Tape<T>& tape, const Tensor<T>& sequence, const RnnState<T>& init,
                       const LstmParams<T>& params, std::size_t length) {
  if (sequence.rank() != 2) throw ShapeError("bilstm: sequence must be a matrix");
  const std::size_t rows = sequence.rows();
  if (length == kFullLength) length = rows;
  if (length == 0 || length > rows) {
    throw ContractError("bilstm: sequence length " + std::to_string(length) + " invalid for " +
                        std::to_string(rows) + " rows");
  }
  if (sequence.cols() != params.input_dim()) {
    throw ShapeError("bilstm: input width " + std::to_string(sequence.cols()) +
                     " does not match " + std::to_string(params.input_dim()));
  }
  const std::size_t d = params.hidden_dim();
  check_state(init.forward, d);
  check_state(init.backward, d);

  const Tensor<T> real = length == rows ? sequence : slice(tape, sequence, 0, 0, length);
  const Tensor<T> fwd_proj =
      add_row(tape, matmul(tape, real, params.forward.input_weights), params.forward.bias);
  const Tensor<T> bwd_proj =
      add_row(tape, matmul(tape, real, params.backward.input_weights), params.backward.bias);
  const auto fwd = run_direction(tape, fwd_proj, init.forward, params.forward, length, false);
  const auto bwd = run_direction(tape, bwd_proj, init.backward, params.backward, length, true);

  std::vector<Tensor<T>> rows_out;
  rows_out.reserve(length + 1);
  for (std::size_t t = 0; t < length; ++t) {
    rows_out.push_back(concat(tape, {fwd[t].hidden, bwd[t].hidden}, 1));
  }
  if (length < rows) rows_out.push_back(Tensor<T>::zeros({rows - length, 2 * d}));

  BiLstmOutput<T> out;
  out.hiddens = concat(tape, std::span<const Tensor<T>>(rows_out), 0);
  out.final = {fwd[length - 1], bwd[0]};
  return out;
}

template <typename T>
DependentReading<T> dependent_encode(Tape<T>& tape, const Tensor<T>& premise,
                                     const Tensor<T>& hypothesis, const LstmParams<T>& params,
                                     std::size_t premise_length, std::size_t hypothesis_length) {
  const auto zero = RnnState<T>::zero(params.hidden_dim());
  auto hyp_indep = bilstm(tape, hypothesis, zero, params, hypothesis_length);
  auto prem_dep = bilstm(tape, premise, hyp_indep.final, params, premise_length);
  auto prem_indep = bilstm(tape, premise, zero, params, premise_length);
  auto hyp_dep = bilstm(tape, hypothesis, prem_indep.final, params, hypothesis_length);
  DependentReading<T> out;
  out.premise_dependent = prem_dep.hiddens;
  out.hypothesis_dependent = hyp_dep.hiddens;
  out.premise_independent = prem_indep.hiddens;
  out.hypothesis_independent = hyp_indep.hiddens;
  out.premise_state = prem_indep.final;
  out.hypothesis_state = hyp_indep.final;
  return out;
}

template <typename T>
EncodedPair<T> multi_round_encode(Tape<T>& tape, const Tensor<T>& premise,
                                  const Tensor<T>& hypothesis, const LstmParams<T>& params,
                                  int rounds, std::size_t premise_length,
                                  std::size_t hypothesis_length) {
  const auto zero = RnnState<T>::zero(params.hidden_dim());
  switch (rounds) {
    case 1:
      return {bilstm(tape, premise, zero, params, premise_length).hiddens,
              bilstm(tape, hypothesis, zero, params, hypothesis_length).hiddens};
    case 2: {
      auto r = dependent_encode(tape, premise, hypothesis, params, premise_length, hypothesis_length);
      return {r.premise_dependent, r.hypothesis_dependent};
    }
    case 3: {
      // premise side: v -> u -> v, then read u
      auto s_v = bilstm(tape, hypothesis, zero, params, hypothesis_length).final;
      auto s_vu = bilstm(tape, premise, s_v, params, premise_length).final;
      auto s_vuv = bilstm(tape, hypothesis, s_vu, params, hypothesis_length).final;
      auto u_hat = bilstm(tape, premise, s_vuv, params, premise_length).hiddens;
      // hypothesis side: u -> v -> u, then read v
      auto s_u = bilstm(tape, premise, zero, params, premise_length).final;
      auto s_uv = bilstm(tape, hypothesis, s_u, params, hypothesis_length).final;
      auto s_uvu = bilstm(tape, premise, s_uv, params, premise_length).final;
      auto v_hat = bilstm(tape, hypothesis, s_uvu, params, hypothesis_length).hiddens;
      return {u_hat, v_hat};
    }
    default:
      throw ConfigError("dependent reading rounds must be 1, 2 or 3, got " + std::to_string(rounds));
  }
}

#define DRBL_INSTANTIATE_ENCODER(T)                                                              \
  template struct LstmParams<T>;                                                                 \
  template struct CellState<T>;                                                                  \
  template struct RnnState<T>;                                                                   \
  template CellState<T> lstm_cell(Tape<T>&, const Tensor<T>&, const CellState<T>&,               \
                                  const LstmDirection<T>&);                                      \
  template BiLstmOutput<T> bilstm(Tape<T>&, const Tensor<T>&, const RnnState<T>&,                \
                                  const LstmParams<T>&, std::size_t);                            \
  template DependentReading<T> dependent_encode(Tape<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                                const LstmParams<T>&, std::size_t, std::size_t); \
  template EncodedPair<T> multi_round_encode(Tape<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                             const LstmParams<T>&, int, std::size_t, std::size_t);

DRBL_INSTANTIATE_ENCODER(float)
DRBL_INSTANTIATE_ENCODER(double)

}  // namespace drbl
