#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "drbl/tensor.hpp"

namespace drbl {

struct GradCheckSample {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
  bool kink = false;  // a perturbation changed a ReLU/max/clamp decision
};

struct GradCheckReport {
  std::vector<GradCheckSample> samples;
  std::map<std::string, double> max_by_tensor;
  std::map<std::string, std::size_t> checked_by_tensor;  // kink-free samples
  double max_rel_error = 0;
  std::size_t kinks = 0;

  bool passed(double threshold = 1e-4) const { return max_rel_error < threshold; }
};

struct GradCheckOptions {
  double eps = 1e-3;
  std::size_t samples_per_tensor = 24;
  std::uint64_t seed = 7;
};

/// |a - n| / max(|a| + |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of a scalar loss against central
/// differences at sampled coordinates of each parameter. `loss_fn` must be
/// deterministic. When `coordinates` has an entry for a parameter name, only
/// those flat indices are sampled from.
///
/// A coordinate whose ±eps evaluations take a different piecewise branch than
/// the unperturbed loss (see Tape::note_branch) straddles a kink, where central
/// differences are not a valid oracle. Such samples are kept in the report
/// with `kink` set, excluded from the maxima, and replaced by another
/// coordinate when one is available.
GradCheckReport grad_check(const std::function<Tensor<double>(Tape<double>&)>& loss_fn,
                           std::vector<Parameter<double>> params, const GradCheckOptions& options,
                           const std::map<std::string, std::vector<std::size_t>>& coordinates = {});

}  // namespace drbl
