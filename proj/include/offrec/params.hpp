#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "offrec/rng.hpp"
#include "offrec/tensor.hpp"

namespace offrec::nn {

// Named parameter collection plus per-parameter optimizer state.
// Iteration order is the map order (lexicographic by name), which keeps
// optimizer sweeps and serialization deterministic.
class ParamStore {
 public:
    struct Param {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        Tensor m;  // Adam first moment
        Tensor v;  // Adam second moment
    };

    Tensor& create(const std::string& name, std::size_t rows, std::size_t cols) {
        return create(name, Tensor(rows, cols));
    }

    Tensor& create(const std::string& name, Tensor init) {
        if (params_.count(name)) throw UsageError("parameter already exists: " + name);
        Param p;
        p.grad = Tensor::zeros_like(init);
        p.m = Tensor::zeros_like(init);
        p.v = Tensor::zeros_like(init);
        p.value = std::move(init);
        auto [it, ok] = params_.emplace(name, std::move(p));
        (void)ok;
        return it->second.value;
    }

    // uniform(-scale, scale) init, the default for hidden weights
    Tensor& create_uniform(const std::string& name, std::size_t rows, std::size_t cols, double scale,
                           Rng& rng) {
        Tensor t(rows, cols);
        for (double& v : t.values) v = rng.uniform(-scale, scale);
        return create(name, std::move(t));
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    Param& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw UsageError("unknown parameter: " + name);
        return it->second;
    }
    const Param& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw UsageError("unknown parameter: " + name);
        return it->second;
    }

    Tensor& value(const std::string& name) { return at(name).value; }
    const Tensor& value(const std::string& name) const { return at(name).value; }

    void accumulate_grad(const std::string& name, const Tensor& g) {
        Param& p = at(name);
        if (!p.value.same_shape(g))
            throw DimensionError("gradient shape mismatch for " + name + ": " + g.shape_str());
        for (std::size_t i = 0; i < g.size(); ++i) p.grad.values[i] += g.values[i];
        p.has_grad = true;
    }

    void clear_grads() {
        for (auto& [name, p] : params_) {
            p.grad.values.assign(p.grad.values.size(), 0.0);
            p.has_grad = false;
        }
    }

    // Bias-corrected Adam over every parameter. Requires a populated grad on
    // each one; clears grads afterwards.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++step_;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (auto& [name, p] : params_) {
            if (!p.has_grad) throw UsageError("adam_step: parameter has no gradient: " + name);
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                double g = p.grad.values[i];
                p.m.values[i] = beta1 * p.m.values[i] + (1.0 - beta1) * g;
                p.v.values[i] = beta2 * p.v.values[i] + (1.0 - beta2) * g * g;
                double mhat = p.m.values[i] / bc1;
                double vhat = p.v.values[i] / bc2;
                p.value.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
        clear_grads();
    }

    void sgd_step(double lr) {
        ++step_;
        for (auto& [name, p] : params_) {
            if (!p.has_grad) throw UsageError("sgd_step: parameter has no gradient: " + name);
            for (std::size_t i = 0; i < p.value.size(); ++i)
                p.value.values[i] -= lr * p.grad.values[i];
        }
        clear_grads();
    }

    // Hard copy of parameter values (target-network sync). Optimizer state is
    // left alone; shapes must match name for name.
    void copy_values_from(const ParamStore& src) {
        for (auto& [name, p] : params_) p.value = src.at(name).value;
    }

    // phi_bar <- tau * phi + (1 - tau) * phi_bar
    void polyak_from(const ParamStore& src, double tau) {
        for (auto& [name, p] : params_) {
            const Tensor& s = src.at(name).value;
            for (std::size_t i = 0; i < p.value.size(); ++i)
                p.value.values[i] = tau * s.values[i] + (1.0 - tau) * p.value.values[i];
        }
    }

    // Shape-identical clone with fresh optimizer state.
    ParamStore clone_values() const {
        ParamStore out;
        for (const auto& [name, p] : params_) out.create(name, p.value);
        return out;
    }

    std::int64_t step_count() const { return step_; }
    std::size_t count() const { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

 private:
    std::map<std::string, Param> params_;
    std::int64_t step_ = 0;
};

}  // namespace offrec::nn
