#include "choreo/nn.hpp"

#include <cmath>

namespace choreo {
namespace nn {

Tensor ParamRegistry::add(const std::string& name, Tensor t) {
    for (const auto& e : entries_)
        if (e.name == name) throw ConfigError("duplicate parameter name: " + name);
    t.set_requires_grad(true);
    entries_.push_back({name, t});
    return t;
}

void ParamRegistry::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

int64_t ParamRegistry::total_size() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

Tensor ParamRegistry::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw ConfigError("parameter not found: " + name);
}

Tensor init_normal(std::vector<int64_t> shape, float stddev, RngEngine& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i)
        t.data()[i] = static_cast<float>(normal_real(rng, 0.0, stddev));
    return t;
}

Tensor init_zeros(std::vector<int64_t> shape) { return Tensor::zeros(std::move(shape)); }

Tensor init_ones(std::vector<int64_t> shape) { return Tensor::full(std::move(shape), 1.f); }

Linear::Linear(ParamRegistry& reg, const std::string& prefix, int64_t in, int64_t out,
               RngEngine& rng, float w_std) {
    w = reg.add(prefix + "/w", init_normal({in, out}, w_std, rng));
    b = reg.add(prefix + "/b", init_zeros({out}));
}

Conv1d::Conv1d(ParamRegistry& reg, const std::string& prefix, int64_t k, int64_t in, int64_t out,
               int64_t stride_, int64_t padding_, RngEngine& rng) {
    float std = 1.f / std::sqrt(static_cast<float>(k * in));
    w = reg.add(prefix + "/w", init_normal({k, in, out}, std, rng));
    b = reg.add(prefix + "/b", init_zeros({out}));
    stride = stride_;
    padding = padding_;
}

LayerNorm::LayerNorm(ParamRegistry& reg, const std::string& prefix, int64_t dim) {
    gamma = reg.add(prefix + "/g", init_ones({dim}));
    beta = reg.add(prefix + "/b", init_zeros({dim}));
}

Embedding::Embedding(ParamRegistry& reg, const std::string& prefix, int64_t n, int64_t c,
                     RngEngine& rng, float std) {
    table = reg.add(prefix + "/table", init_normal({n, c}, std, rng));
}

}  // namespace nn
}  // namespace choreo
