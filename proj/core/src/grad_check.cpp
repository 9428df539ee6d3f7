#include "drbl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace drbl {
namespace {

struct Evaluation {
  double value;
  std::uint64_t branches;
};

Evaluation evaluate(const std::function<Tensor<double>(Tape<double>&)>& loss_fn,
                    const std::string& context) {
  Tape<double> tape;
  const double value = loss_fn(tape).item();
  if (!std::isfinite(value)) throw NumericError("grad_check: non-finite loss while perturbing " + context);
  return {value, tape.branch_signature()};
}

}  // namespace

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
}

GradCheckReport grad_check(const std::function<Tensor<double>(Tape<double>&)>& loss_fn,
                           std::vector<Parameter<double>> params, const GradCheckOptions& options,
                           const std::map<std::string, std::vector<std::size_t>>& coordinates) {
  for (auto& p : params) p.tensor.zero_grad();
  std::uint64_t base_branches = 0;
  {
    Tape<double> tape;
    const Tensor<double> loss = loss_fn(tape);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss);
    base_branches = tape.branch_signature();
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("grad_check: non-finite gradient in " + p.name);
    }
    std::vector<std::size_t> pool;
    if (auto it = coordinates.find(p.name); it != coordinates.end()) {
      pool = it->second;
    } else {
      pool.resize(p.tensor.size());
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    }
    if (!p.frozen_rows.empty() && p.tensor.rank() == 2) {
      const std::size_t width = p.tensor.cols();
      std::erase_if(pool, [&](std::size_t i) {
        return std::find(p.frozen_rows.begin(), p.frozen_rows.end(), i / width) != p.frozen_rows.end();
      });
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    double worst = 0;
    std::size_t checked = 0;
    auto values = p.tensor.mutable_values();
    for (std::size_t k = 0; k < pool.size() && checked < options.samples_per_tensor; ++k) {
      const std::size_t index = pool[k];
      const double original = values[index];
      const std::string where = p.name + "[" + std::to_string(index) + "]";
      values[index] = original + options.eps;
      const auto plus = evaluate(loss_fn, where);
      values[index] = original - options.eps;
      const auto minus = evaluate(loss_fn, where);
      values[index] = original;
      const double numeric = (plus.value - minus.value) / (2 * options.eps);
      const double analytic = p.tensor.grad().empty() ? 0.0 : p.tensor.grad()[index];
      const double err = relative_error(analytic, numeric);
      const bool kink = plus.branches != base_branches || minus.branches != base_branches;
      report.samples.push_back({p.name, index, analytic, numeric, err, kink});
      if (kink) {
        ++report.kinks;
        continue;
      }
      ++checked;
      worst = std::max(worst, err);
    }
    report.max_by_tensor[p.name] = worst;
    report.checked_by_tensor[p.name] = checked;
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

}  // namespace drbl
