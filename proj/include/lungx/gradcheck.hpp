#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lungx/tensor.hpp"

namespace lungx {

struct GradCheckResult {
  double max_rel_error = 0.0;
  bool pass = true;
  std::string note;  // worst coordinate, or the non-finite failure
};

/// Compares the reverse-mode gradient of a scalar-valued tensor function
/// against central finite differences, coordinate by coordinate, at 64-bit.
/// The relative error uses max(|analytic|, |numeric|, 1e-6) as denominator
/// so that legitimately-zero gradients do not produce spurious failures.
inline GradCheckResult gradcheck(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, double h = 1e-4, double tol = 1e-4) {
  GradCheckResult res;

  for (auto& t : inputs) t.set_track(true);
  Tensor<double> y = fn(inputs);
  if (y.numel() != 1) tensor_fail("gradcheck: function must be scalar-valued");
  if (!std::isfinite(y.item())) {
    res.pass = false;
    res.note = "non-finite forward value at the evaluation point";
    return res;
  }
  backward(y);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs) analytic.push_back(t.grad());

  // untracked working copies, perturbed in place
  std::vector<Tensor<double>> probe;
  probe.reserve(inputs.size());
  for (auto& t : inputs) probe.push_back(t.detach());

  NoGradGuard ng;
  for (std::size_t ti = 0; ti < probe.size(); ++ti) {
    auto& vals = probe[ti].data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      double saved = vals[i];
      vals[i] = saved + h;
      double fp = fn(probe).item();
      vals[i] = saved - h;
      double fm = fn(probe).item();
      vals[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        res.pass = false;
        std::ostringstream os;
        os << "non-finite forward value while perturbing input " << ti << " coordinate " << i;
        res.note = os.str();
        return res;
      }
      double numeric = (fp - fm) / (2.0 * h);
      double a = analytic[ti][i];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        std::ostringstream os;
        os << "input " << ti << " coordinate " << i << ": analytic " << a << " vs numeric " << numeric;
        res.note = os.str();
      }
    }
  }
  res.pass = res.max_rel_error <= tol;
  return res;
}

}  // namespace lungx
