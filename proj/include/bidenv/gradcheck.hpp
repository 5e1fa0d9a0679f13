#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bidenv/tensor.hpp"

namespace bidenv {

inline constexpr double kGradCheckStep = 1e-6;  // central-difference step
inline constexpr double kGradCheckTol = 1e-4;   // accepted max relative error
// denominator floor so near-zero gradients are judged on absolute error
inline constexpr double kGradCheckDenomFloor = 1e-3;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;  // "name[flat_index]" of the worst entry
    long checked = 0;
    bool pass = true;
};

// Compares already-populated analytic grads on `params` against central
// finite differences of `loss_value`, which must be a pure function of the
// current parameter values. Checks up to `max_entries_per_param` entries per
// tensor (all of them when the tensor is small), chosen deterministically
// from `seed`.
GradCheckReport finite_diff_check(std::vector<std::pair<std::string, Tensor>>& params,
                                  const std::function<double()>& loss_value,
                                  int max_entries_per_param, std::uint64_t seed);

}  // namespace bidenv
