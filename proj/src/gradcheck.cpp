#include "bidenv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "bidenv/rng.hpp"

namespace bidenv {

GradCheckReport finite_diff_check(std::vector<std::pair<std::string, Tensor>>& params,
                                  const std::function<double()>& loss_value,
                                  int max_entries_per_param, std::uint64_t seed) {
    GradCheckReport rep;
    Rng rng(Rng::mix(seed, 0xfd));
    for (auto& [name, t] : params) {
        if (!t.requires_grad()) continue;
        const std::vector<double> analytic = t.grad();  // copy: grads survive perturbation
        std::size_t n = t.numel();
        std::vector<std::size_t> idx;
        if (max_entries_per_param <= 0 || n <= static_cast<std::size_t>(max_entries_per_param)) {
            idx.resize(n);
            for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        } else {
            for (int i = 0; i < max_entries_per_param; ++i)
                idx.push_back(rng.uniform_index(n));
            std::sort(idx.begin(), idx.end());
            idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        }
        auto& vals = t.mutable_values();
        for (std::size_t i : idx) {
            double saved = vals[i];
            vals[i] = saved + kGradCheckStep;
            double lp = loss_value();
            vals[i] = saved - kGradCheckStep;
            double lm = loss_value();
            vals[i] = saved;
            double numeric = (lp - lm) / (2.0 * kGradCheckStep);
            double a = analytic[i];
            double denom = std::max({std::fabs(a), std::fabs(numeric), kGradCheckDenomFloor});
            double rel = std::fabs(a - numeric) / denom;
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    rep.pass = rep.max_rel_err < kGradCheckTol;
    return rep;
}

}  // namespace bidenv
