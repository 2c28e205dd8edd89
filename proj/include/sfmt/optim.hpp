#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfmt/error.hpp"
#include "sfmt/param.hpp"

namespace sfmt {

struct AdamWConfig {
    float lr = 4e-5f;
    float beta1 = 0.9f;
    float beta2 = 0.98f;
    float eps = 1e-8f;
    float weight_decay = 0.01f;
};

// AdamW with decoupled weight decay. Moment slots are created lazily per
// parameter name, so the same optimizer can drive different trainable sets
// across stages while keeping state for parameters it has already seen.
class AdamW {
public:
    struct Slot {
        std::vector<float> m, v;
    };

    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {
        if (!(cfg.lr > 0)) throw ConfigError("adamw: lr must be positive");
        if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1))
            throw ConfigError("adamw: betas must lie in [0,1)");
        if (!(cfg.eps > 0)) throw ConfigError("adamw: eps must be positive");
        if (cfg.weight_decay < 0) throw ConfigError("adamw: negative weight decay");
    }

    const AdamWConfig& config() const { return cfg_; }
    void set_lr(float lr) {
        if (!(lr > 0)) throw ConfigError("adamw: lr must be positive");
        cfg_.lr = lr;
    }

    int64_t step_count() const { return t_; }

    // Applies one update to every named parameter using its accumulated
    // grad buffer. Throws if a parameter's gradient was never touched since
    // the last zero_grads(): that means the caller believes it is training
    // a weight that the loss cannot see.
    void step(ParamStore<float>& ps, const std::vector<std::string>& trainable) {
        for (const auto& name : trainable) {
            const auto& p = ps.get(name);
            if (!p.grad_live)
                throw StateError("adamw: no gradient reached trainable parameter " + name);
        }
        ++t_;
        double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
        for (const auto& name : trainable) {
            auto& p = ps.get(name);
            Slot& s = slots_[name];
            if (s.m.empty()) {
                s.m.assign(p.value.numel(), 0.0f);
                s.v.assign(p.value.numel(), 0.0f);
            } else if (s.m.size() != p.value.numel()) {
                throw StateError("adamw: slot shape changed for " + name);
            }
            float* w = p.value.data.data();
            const float* g = p.grad.data.data();
            for (size_t i = 0; i < s.m.size(); ++i) {
                s.m[i] = cfg_.beta1 * s.m[i] + (1.0f - cfg_.beta1) * g[i];
                s.v[i] = cfg_.beta2 * s.v[i] + (1.0f - cfg_.beta2) * g[i] * g[i];
                double mhat = s.m[i] / bc1;
                double vhat = s.v[i] / bc2;
                double upd = mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i];
                w[i] = static_cast<float>(w[i] - cfg_.lr * upd);
            }
        }
    }

    // Checkpoint access. Slots are keyed by parameter name; iteration for
    // serialization must use a caller-imposed order.
    bool has_slot(const std::string& name) const { return slots_.count(name) != 0; }
    const Slot& slot(const std::string& name) const {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw IndexError("adamw: no slot for " + name);
        return it->second;
    }
    std::vector<std::string> slot_names_sorted() const {
        std::vector<std::string> out;
        out.reserve(slots_.size());
        for (const auto& [k, v] : slots_) out.push_back(k);
        std::sort(out.begin(), out.end());
        return out;
    }
    void restore_slot(const std::string& name, Slot s) { slots_[name] = std::move(s); }
    void restore_step_count(int64_t t) {
        if (t < 0) throw ConfigError("adamw: negative step count");
        t_ = t;
    }

private:
    AdamWConfig cfg_;
    std::unordered_map<std::string, Slot> slots_;
    int64_t t_ = 0;
};

}  // namespace sfmt
