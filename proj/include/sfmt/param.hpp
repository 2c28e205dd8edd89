#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfmt/error.hpp"
#include "sfmt/rng.hpp"
#include "sfmt/tensor.hpp"

namespace sfmt {

// A named, grouped weight with a persistent gradient accumulation buffer.
// `grad_live` is set by whoever accumulates into `grad` and cleared by
// zero_grads(); the optimizer refuses to step a trainable parameter whose
// gradient was never touched, which catches wiring mistakes where a group
// is marked trainable but sits off the loss path.
template <typename Real>
struct Parameter {
    std::string name;
    std::string group;
    Tensor<Real> value;
    Tensor<Real> grad;
    bool grad_live = false;
};

template <typename Real>
class ParamStore {
public:
    Parameter<Real>& add(const std::string& name, const std::string& group, Tensor<Real> init) {
        if (index_.count(name)) throw StateError("parameter already registered: " + name);
        Parameter<Real> p;
        p.name = name;
        p.group = group;
        p.grad = Tensor<Real>::zeros(init.shape);
        p.value = std::move(init);
        index_[name] = params_.size();
        params_.push_back(std::move(p));
        return params_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Parameter<Real>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw IndexError("unknown parameter: " + name);
        return params_[it->second];
    }

    const Parameter<Real>& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw IndexError("unknown parameter: " + name);
        return params_[it->second];
    }

    size_t size() const { return params_.size(); }
    Parameter<Real>& at(size_t i) { return params_[i]; }
    const Parameter<Real>& at(size_t i) const { return params_[i]; }

    // Registration order; stable across runs because construction is
    // deterministic.
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& p : params_) out.push_back(p.name);
        return out;
    }

    // Distinct group labels in first-registration order.
    std::vector<std::string> groups() const {
        std::vector<std::string> out;
        for (const auto& p : params_) {
            bool seen = false;
            for (const auto& g : out) seen = seen || g == p.group;
            if (!seen) out.push_back(p.group);
        }
        return out;
    }

    std::vector<std::string> names_in_group(const std::string& group) const {
        std::vector<std::string> out;
        for (const auto& p : params_)
            if (p.group == group) out.push_back(p.name);
        return out;
    }

    size_t numel() const {
        size_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) {
            std::fill(p.grad.data.begin(), p.grad.data.end(), Real(0));
            p.grad_live = false;
        }
    }

    template <typename Other>
    ParamStore<Other> cast() const {
        ParamStore<Other> out;
        for (const auto& p : params_) out.add(p.name, p.group, p.value.template cast<Other>());
        return out;
    }

    // Copy values (not grads) from a same-layout store.
    void load_values_from(const ParamStore<Real>& other) {
        if (other.size() != size()) throw StateError("parameter count mismatch on load");
        for (size_t i = 0; i < params_.size(); ++i) {
            const auto& src = other.at(i);
            if (src.name != params_[i].name || src.value.shape != params_[i].value.shape)
                throw StateError("parameter layout mismatch on load: " + params_[i].name);
            params_[i].value.data = src.value.data;
        }
    }

    // Order-sensitive digest of names, shapes, and raw value bytes.
    uint64_t value_hash() const {
        uint64_t h = kFnvOffset;
        for (const auto& p : params_) {
            h = fnv1a64(p.name.data(), p.name.size(), h);
            for (int d : p.value.shape) h = fnv1a64(&d, sizeof d, h);
            h = fnv1a64(p.value.data.data(), p.value.data.size() * sizeof(Real), h);
        }
        return h;
    }

private:
    std::vector<Parameter<Real>> params_;
    std::unordered_map<std::string, size_t> index_;
};

using ParamStoreF = ParamStore<float>;
using ParamStoreD = ParamStore<double>;

}  // namespace sfmt
