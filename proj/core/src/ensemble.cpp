#include "drbl/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "drbl/errors.hpp"

namespace drbl {
namespace {

std::size_t argmax(const Distribution& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// Accuracy of the weighted combination given integer weight units.
class UnitEvaluator {
 public:
  UnitEvaluator(std::span<const MemberOutput> members, std::span<const Label> gold)
      : members_(members), gold_(gold) {}

  std::size_t correct(const std::vector<int>& units) const {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold_.size(); ++i) {
      Distribution acc{};
      for (std::size_t k = 0; k < members_.size(); ++k) {
        if (units[k] == 0) continue;
        for (std::size_t c = 0; c < kNumLabels; ++c) acc[c] += units[k] * members_[k].probs[i][c];
      }
      hits += argmax(acc) == label_index(gold_[i]);
    }
    return hits;
  }

 private:
  std::span<const MemberOutput> members_;
  std::span<const Label> gold_;
};

long long square_norm(const std::vector<int>& units) {
  long long s = 0;
  for (int u : units) s += static_cast<long long>(u) * u;
  return s;
}

// (correct, -norm) ordering: more correct wins, then more uniform.
bool better(std::size_t correct_a, const std::vector<int>& a, std::size_t correct_b,
            const std::vector<int>& b) {
  if (correct_a != correct_b) return correct_a > correct_b;
  return square_norm(a) < square_norm(b);
}

std::vector<int> quantize(std::span<const double> weights, int total) {
  std::vector<int> units(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double scaled = std::max(0.0, weights[k]) * total;
    units[k] = static_cast<int>(std::floor(scaled + 1e-9));
    assigned += units[k];
    remainders.push_back({scaled - units[k], k});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++units[remainders[i % remainders.size()].second];
  // Rounding noise only: take back from the largest weights.
  for (; assigned > total; --assigned) --*std::max_element(units.begin(), units.end());
  return units;
}

void check_weights(std::span<const double> weights, std::size_t members) {
  if (weights.size() != members) {
    throw ConfigError(std::to_string(weights.size()) + " weights for " + std::to_string(members) +
                      " members");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("ensemble weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("ensemble weights must sum to 1");
}

}  // namespace

void check_coverage(std::span<const MemberOutput> members, std::size_t gold_count) {
  if (members.empty()) throw ConfigError("an ensemble needs at least one member");
  const auto& ref = members.front();
  for (const auto& m : members) {
    if (m.probs.size() != ref.probs.size() || m.pair_ids != ref.pair_ids) {
      throw DataError("member '" + m.id + "' does not cover the same pairs as '" + ref.id + "'");
    }
    if (!m.pair_ids.empty() && m.pair_ids.size() != m.probs.size()) {
      throw DataError("member '" + m.id + "' has mismatched ids and distributions");
    }
  }
  if (gold_count && gold_count != ref.probs.size()) {
    throw DataError("members cover " + std::to_string(ref.probs.size()) + " pairs, gold has " +
                    std::to_string(gold_count));
  }
}

std::vector<Distribution> weighted_average(std::span<const MemberOutput> members,
                                           std::span<const double> weights) {
  check_coverage(members);
  check_weights(weights, members.size());
  std::vector<Distribution> out(members.front().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < members.size(); ++k) {
      for (std::size_t c = 0; c < kNumLabels; ++c) out[i][c] += weights[k] * members[k].probs[i][c];
    }
  }
  return out;
}

std::vector<Distribution> average(std::span<const MemberOutput> members) {
  if (members.empty()) throw ConfigError("an ensemble needs at least one member");
  const std::vector<double> w(members.size(), 1.0 / static_cast<double>(members.size()));
  return weighted_average(members, w);
}

std::vector<Label> majority_vote(std::span<const MemberOutput> members) {
  check_coverage(members);
  std::vector<Label> out(members.front().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::array<std::size_t, kNumLabels> votes{};
    Distribution mean{};
    for (const auto& m : members) {
      ++votes[argmax(m.probs[i])];
      for (std::size_t c = 0; c < kNumLabels; ++c) mean[c] += m.probs[i][c];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumLabels; ++c) {
      if (votes[c] > votes[best] || (votes[c] == votes[best] && mean[c] > mean[best])) best = c;
    }
    out[i] = static_cast<Label>(best);
  }
  return out;
}

std::vector<Label> argmax_labels(std::span<const Distribution> probs) {
  std::vector<Label> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(static_cast<Label>(argmax(p)));
  return out;
}

double accuracy_of(std::span<const Distribution> probs, std::span<const Label> gold) {
  if (probs.size() != gold.size()) throw ContractError("accuracy_of: size mismatch");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += argmax(probs[i]) == label_index(gold[i]);
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

WeightSearch learn_weights(std::span<const MemberOutput> members, std::span<const Label> gold,
                           double step, std::span<const double> warm_start) {
  check_coverage(members, gold.size());
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("weight grid step must lie in (0, 1]");
  const int total = static_cast<int>(std::lround(1.0 / step));
  if (std::abs(total * step - 1.0) > 1e-9) throw ConfigError("weight grid step must divide 1");
  const std::size_t K = members.size();
  const UnitEvaluator eval(members, gold);

  std::vector<int> best(K, 0);
  best[0] = total;
  std::size_t best_correct = eval.correct(best);
  for (std::size_t k = 1; k < K; ++k) {
    std::vector<int> vertex(K, 0);
    vertex[k] = total;
    const auto c = eval.correct(vertex);
    if (c > best_correct) {
      best = vertex;
      best_correct = c;
    }
  }
  if (!warm_start.empty()) {
    check_weights(warm_start, K);
    auto units = quantize(warm_start, total);
    const auto c = eval.correct(units);
    if (better(c, units, best_correct, best)) {
      best = std::move(units);
      best_correct = c;
    }
  }

  for (bool improved = true; improved;) {
    improved = false;
    std::vector<int> move_best = best;
    std::size_t move_correct = best_correct;
    for (std::size_t from = 0; from < K; ++from) {
      for (std::size_t to = 0; to < K; ++to) {
        if (from == to) continue;
        for (int amount = 1; amount <= best[from]; ++amount) {
          std::vector<int> cand = best;
          cand[from] -= amount;
          cand[to] += amount;
          const auto c = eval.correct(cand);
          if (better(c, cand, move_correct, move_best)) {
            move_best = std::move(cand);
            move_correct = c;
          }
        }
      }
    }
    if (move_best != best) {
      best = std::move(move_best);
      best_correct = move_correct;
      improved = true;
    }
  }

  WeightSearch out;
  for (int u : best) out.weights.push_back(static_cast<double>(u) / total);
  out.accuracy = gold.empty() ? 0.0 : static_cast<double>(best_correct) / static_cast<double>(gold.size());
  return out;
}

std::vector<double> accuracy_weights(std::span<const MemberOutput> members,
                                     std::span<const Label> gold) {
  check_coverage(members, gold.size());
  std::vector<double> w;
  for (const auto& m : members) w.push_back(accuracy_of(m.probs, gold));
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x = sum > 0.0 ? x / sum : 1.0 / static_cast<double>(members.size());
  return w;
}

Selection greedy_select(std::span<const MemberOutput> dev, std::span<const Label> dev_gold,
                        std::size_t max_size, std::span<const MemberOutput> test,
                        std::span<const Label> test_gold, double step) {
  check_coverage(dev, dev_gold.size());
  if (max_size == 0 || max_size > dev.size()) {
    throw ConfigError("ensemble size " + std::to_string(max_size) + " outside 1.." +
                      std::to_string(dev.size()));
  }
  const bool with_test = !test.empty();
  if (with_test) {
    if (test.size() != dev.size()) throw DataError("dev and test member lists differ in length");
    check_coverage(test, test_gold.size());
  }

  auto subset = [](std::span<const MemberOutput> pool, const std::vector<std::size_t>& idx) {
    std::vector<MemberOutput> out;
    for (auto i : idx) out.push_back(pool[i]);
    return out;
  };

  Selection sel;
  std::vector<std::size_t> chosen;
  std::vector<double> weights;
  for (std::size_t n = 1; n <= max_size; ++n) {
    std::optional<SelectionStep> best;
    for (std::size_t c = 0; c < dev.size(); ++c) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
      auto idx = chosen;
      idx.push_back(c);
      std::vector<double> warm = weights;
      if (!warm.empty()) warm.push_back(0.0);
      const auto members = subset(dev, idx);
      const auto found = learn_weights(members, dev_gold, step, warm);
      if (!best || found.accuracy > best->dev_accuracy) {
        best = SelectionStep{n, idx, found.weights, found.accuracy, std::nullopt};
      }
    }
    if (with_test) {
      const auto members = subset(test, best->members);
      best->test_accuracy = accuracy_of(weighted_average(members, best->weights), test_gold);
    }
    chosen = best->members;
    weights = best->weights;
    sel.steps.push_back(std::move(*best));
  }
  sel.best_size = 1;
  for (const auto& s : sel.steps) {
    if (s.dev_accuracy > sel.steps[sel.best_size - 1].dev_accuracy) sel.best_size = s.size;
  }
  return sel;
}

void write_predictions(const std::filesystem::path& path, std::span<const std::string> pair_ids,
                       std::span<const Distribution> probs) {
  if (pair_ids.size() != probs.size()) throw ContractError("write_predictions: size mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "pair_id,p_entailment,p_neutral,p_contradiction\n";
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out << pair_ids[i] << ',' << probs[i][0] << ',' << probs[i][1] << ',' << probs[i][2] << '\n';
  }
}

MemberOutput read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  MemberOutput m;
  m.id = path.stem().string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty prediction file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "pair_id,p_entailment,p_neutral,p_contradiction") {
    throw ParseError("unexpected prediction header '" + line + "'", 1);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (auto comma = rest.find(','); comma != std::string_view::npos; comma = rest.find(',')) {
      cols.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    cols.push_back(rest);
    if (cols.size() != 4) throw ParseError("expected 4 columns", line_no);
    Distribution d{};
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      const auto f = cols[c + 1];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), d[c]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError("malformed probability '" + std::string(f) + "'", line_no);
      }
    }
    m.pair_ids.emplace_back(cols[0]);
    m.probs.push_back(d);
  }
  return m;
}

}  // namespace drbl
