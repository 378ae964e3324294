#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wmc/nn.hpp"
#include "wmc/rng.hpp"

namespace wmc {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    int checked_coords = 0;
    bool pass = false;

    std::string to_string() const {
        return "gradcheck: max_rel_err=" + std::to_string(max_rel_err) + " at " +
               worst_param + "[" + std::to_string(worst_index) + "], coords=" +
               std::to_string(checked_coords) + (pass ? " PASS" : " FAIL");
    }
};

// Central-difference oracle, independent of the reverse-mode path: it only
// re-evaluates the scalar loss at perturbed parameters. At most max_coords
// randomly sampled coordinates are probed per parameter tensor.
// Relative error: |a - n| / max(1, |a| + |n|).
template <class T>
GradCheckReport finite_diff_check(
    const std::function<double(const ParamSet<T>&)>& loss_fn, ParamSet<T> params,
    const std::map<std::string, TensorT<T>>& analytic_grads, double eps, double tol,
    RngStream rng, int max_coords = 256) {
    GradCheckReport report;
    for (const auto& [name, grad] : analytic_grads) {
        TensorT<T>& value = params.at(name);
        check(grad.shape == value.shape, "finite_diff_check: grad shape mismatch " + name);
        std::vector<int64_t> coords;
        if (grad.size() <= max_coords) {
            coords.resize(static_cast<size_t>(grad.size()));
            for (int64_t i = 0; i < grad.size(); ++i) {
                coords[static_cast<size_t>(i)] = i;
            }
        } else {
            RngStream sub = rng.split(name);
            for (int i = 0; i < max_coords; ++i) {
                coords.push_back(sub.uniform_int64(grad.size()));
            }
        }
        for (int64_t idx : coords) {
            const T saved = value[idx];
            value[idx] = static_cast<T>(static_cast<double>(saved) + eps);
            const double fp = loss_fn(params);
            value[idx] = static_cast<T>(static_cast<double>(saved) - eps);
            const double fm = loss_fn(params);
            value[idx] = saved;
            check(std::isfinite(fp) && std::isfinite(fm),
                  "finite_diff_check: loss not finite at perturbed point of " + name);
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = static_cast<double>(grad[idx]);
            const double rel =
                std::abs(analytic - numeric) /
                std::max(1.0, std::abs(analytic) + std::abs(numeric));
            ++report.checked_coords;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = idx;
            }
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace wmc
