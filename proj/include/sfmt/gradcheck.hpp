#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "sfmt/error.hpp"
#include "sfmt/param.hpp"
#include "sfmt/rng.hpp"

namespace sfmt {

// Evaluates the loss on a fixed batch. When compute_grads is true the
// analytic gradients must be accumulated into the store's grad buffers
// (starting from zero); otherwise only the loss value is needed.
using GradCheckLoss = std::function<double(ParamStore<double>&, bool compute_grads)>;

struct GradCheckEntry {
    std::string param;
    size_t coord = 0;
    double analytic = 0;
    double numeric = 0;
    double rel_err = 0;
};

struct GradCheckReport {
    double max_rel_err = 0;
    size_t coords_checked = 0;
    GradCheckEntry worst;
    std::vector<GradCheckEntry> entries;
};

// Central-difference check of analytic gradients in double precision.
// For each parameter it perturbs a few sampled coordinates, preferring
// coordinates whose analytic gradient magnitude is in the top half so the
// comparison is not dominated by cancellation noise near zero.
inline GradCheckReport finite_difference_check(ParamStore<double>& ps, const GradCheckLoss& loss,
                                               double h, int samples_per_param, uint64_t seed) {
    if (h < 1e-6 || h > 1e-4)
        throw ConfigError("finite_difference_check: step size must lie in [1e-6, 1e-4]");
    if (samples_per_param < 1)
        throw ConfigError("finite_difference_check: need at least one sample per parameter");

    ps.zero_grads();
    loss(ps, true);

    GradCheckReport report;
    for (size_t pi = 0; pi < ps.size(); ++pi) {
        auto& p = ps.at(pi);
        size_t n = p.value.numel();
        if (n == 0) continue;

        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return std::fabs(p.grad.data[a]) > std::fabs(p.grad.data[b]);
        });
        size_t pool = std::max<size_t>(1, (n + 1) / 2);

        Rng rng = Rng::keyed(seed, "gradcheck/" + p.name);
        int want = std::min<int>(samples_per_param, static_cast<int>(pool));
        std::vector<size_t> chosen;
        while (static_cast<int>(chosen.size()) < want) {
            size_t c = order[rng.uniform_int(pool)];
            if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
        }

        for (size_t c : chosen) {
            double saved = p.value.data[c];
            p.value.data[c] = saved + h;
            double lp = loss(ps, false);
            p.value.data[c] = saved - h;
            double lm = loss(ps, false);
            p.value.data[c] = saved;

            GradCheckEntry e;
            e.param = p.name;
            e.coord = c;
            e.analytic = p.grad.data[c];
            e.numeric = (lp - lm) / (2.0 * h);
            double denom = std::max({std::fabs(e.analytic), std::fabs(e.numeric), 1e-6});
            e.rel_err = std::fabs(e.analytic - e.numeric) / denom;
            if (e.rel_err >= report.max_rel_err) {
                report.max_rel_err = e.rel_err;
                report.worst = e;
            }
            report.entries.push_back(e);
            ++report.coords_checked;
        }
    }
    return report;
}

}  // namespace sfmt
