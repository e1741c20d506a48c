#pragma once

#include <cmath>
#include <functional>

#include "offrec/graph.hpp"

namespace offrec::nn {

// Compares reverse-mode gradients of loss_fn against central finite
// differences. loss_fn must be deterministic (fix any noise inputs before
// calling) and must compute its loss through a Graph built on the store.
//
// Returns max over parameter entries of
//   |analytic - numeric| / max(1, |numeric|).
inline double grad_check(const std::function<double(ParamStore&)>& loss_fn, ParamStore& store,
                         double h = 1e-5) {
    // analytic pass
    store.clear_grads();
    {
        double loss = loss_fn(store);
        if (!std::isfinite(loss)) throw NumericError("grad_check: loss is not finite");
    }
    // snapshot analytic grads; loss_fn is expected to have run backward()
    std::map<std::string, Tensor> analytic;
    for (auto& [name, p] : store) analytic[name] = p.grad;
    store.clear_grads();

    double max_rel = 0.0;
    for (auto& [name, p] : store) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double orig = p.value.values[i];
            p.value.values[i] = orig + h;
            double up = loss_fn(store);
            store.clear_grads();
            p.value.values[i] = orig - h;
            double down = loss_fn(store);
            store.clear_grads();
            p.value.values[i] = orig;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NumericError("grad_check: perturbed loss is not finite");
            double numeric = (up - down) / (2.0 * h);
            double rel = std::abs(analytic[name].values[i] - numeric) /
                         std::max(1.0, std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace offrec::nn
