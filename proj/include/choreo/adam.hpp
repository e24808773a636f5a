// Adam with bias correction, over a flat list of named parameters.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "choreo/core.hpp"

namespace choreo {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.99f;
    float eps = 1e-8f;
};

struct NamedParam {
    std::string name;
    Tensor tensor;
};

class Adam {
  public:
    Adam(std::vector<NamedParam> params, AdamConfig cfg) : cfg_(cfg), params_(std::move(params)) {
        slots_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            slots_[i].m.assign(params_[i].tensor.size(), 0.f);
            slots_[i].v.assign(params_[i].tensor.size(), 0.f);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    void step() {
        ++step_;
        const float bc1 = 1.f - std::pow(cfg_.beta1, static_cast<float>(step_));
        const float bc2 = 1.f - std::pow(cfg_.beta2, static_cast<float>(step_));
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor& t = params_[i].tensor;
            const auto& g = t.grad();
            float* x = t.data();
            auto& m = slots_[i].m;
            auto& v = slots_[i].v;
            for (int64_t j = 0; j < t.size(); ++j) {
                if (!std::isfinite(g[j]))
                    throw NumericError("adam: non-finite gradient in parameter '" + params_[i].name +
                                       "' at element " + std::to_string(j));
                m[j] = cfg_.beta1 * m[j] + (1.f - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (1.f - cfg_.beta2) * g[j] * g[j];
                float mhat = m[j] / bc1;
                float vhat = v[j] / bc2;
                x[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    void set_lr(float lr) { cfg_.lr = lr; }
    float lr() const { return cfg_.lr; }
    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }

    size_t param_count() const { return params_.size(); }
    const NamedParam& param(size_t i) const { return params_[i]; }
    std::vector<float>& moment1(size_t i) { return slots_[i].m; }
    std::vector<float>& moment2(size_t i) { return slots_[i].v; }

    // serializable optimizer state, parallel to the parameter order
    struct State {
        int64_t step = 0;
        std::vector<std::vector<float>> m, v;
        bool empty() const { return m.empty(); }
    };
    State export_state() const {
        State s;
        s.step = step_;
        for (const auto& slot : slots_) {
            s.m.push_back(slot.m);
            s.v.push_back(slot.v);
        }
        return s;
    }
    void import_state(const State& s) {
        if (s.m.size() != slots_.size() || s.v.size() != slots_.size())
            throw ConfigError("adam: optimizer state does not match parameter list");
        for (size_t i = 0; i < slots_.size(); ++i) {
            if (s.m[i].size() != slots_[i].m.size() || s.v[i].size() != slots_[i].v.size())
                throw ConfigError("adam: moment shape mismatch for '" + params_[i].name + "'");
            slots_[i].m = s.m[i];
            slots_[i].v = s.v[i];
        }
        step_ = s.step;
    }

  private:
    struct Slot {
        std::vector<float> m, v;
    };
    AdamConfig cfg_;
    int64_t step_ = 0;
    std::vector<NamedParam> params_;
    std::vector<Slot> slots_;
};

}  // namespace choreo
