#pragma once

// Central finite differences on float64 tensors, compared against autograd.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <torch/torch.h>

namespace cscn::testing {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
};

// Norm-wise relative error per tensor: ||analytic - numeric|| / max(||analytic||, ||numeric||).
// Gradients whose norms both fall below `floor` (e.g. a bias cancelled by normalisation) count as agreeing.
// `loss` must rebuild the graph from `inputs` on every call.
inline GradCheckResult grad_check(const std::function<torch::Tensor()>& loss, std::vector<torch::Tensor> inputs,
                                  double step = 1e-3, double floor = 1e-7) {
    for (auto& t : inputs) {
        if (t.grad().defined()) t.mutable_grad().zero_();
    }
    auto value = loss();
    auto analytic = torch::autograd::grad({value}, inputs, {}, false, false, true);

    GradCheckResult result;
    torch::NoGradGuard no_grad;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto& t = inputs[i];
        auto flat = t.view({-1});
        auto numeric = torch::zeros_like(flat);
        for (std::int64_t j = 0; j < flat.numel(); ++j) {
            const double orig = flat[j].item<double>();
            flat[j] = orig + step;
            const double up = loss().item<double>();
            flat[j] = orig - step;
            const double down = loss().item<double>();
            flat[j] = orig;
            numeric[j] = (up - down) / (2.0 * step);
        }
        auto a = analytic[i].defined() ? analytic[i].reshape({-1}) : torch::zeros_like(numeric);
        const double diff = (a - numeric).norm().item<double>();
        const double scale = std::max(a.norm().item<double>(), numeric.norm().item<double>());
        if (scale >= floor) result.max_rel_err = std::max(result.max_rel_err, diff / scale);
        result.checked += flat.numel();
    }
    return result;
}

}  // namespace cscn::testing
