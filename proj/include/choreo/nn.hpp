// Layers over the autodiff core. Parameters are registered by path name so
// optimizers and checkpoints see one flat ordered list per model.
#pragma once

#include <string>
#include <vector>

#include "choreo/adam.hpp"
#include "choreo/core.hpp"
#include "choreo/rng.hpp"

namespace choreo {
namespace nn {

class ParamRegistry {
  public:
    Tensor add(const std::string& name, Tensor t);
    const std::vector<NamedParam>& entries() const { return entries_; }
    std::vector<NamedParam>& entries() { return entries_; }
    std::vector<NamedParam> named() const { return entries_; }
    void zero_grad();
    int64_t total_size() const;
    Tensor find(const std::string& name) const;

  private:
    std::vector<NamedParam> entries_;
};

Tensor init_normal(std::vector<int64_t> shape, float stddev, RngEngine& rng);
Tensor init_zeros(std::vector<int64_t> shape);
Tensor init_ones(std::vector<int64_t> shape);

struct Linear {
    Tensor w;  // [in, out]
    Tensor b;  // [out]
    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& prefix, int64_t in, int64_t out, RngEngine& rng,
           float w_std = 0.02f);
    Tensor forward(const Tensor& x) const { return add_rowwise(matmul(x, w), b); }
};

struct Conv1d {
    Tensor w;  // [k, in, out]
    Tensor b;  // [out]
    int64_t stride = 1;
    int64_t padding = 0;
    Conv1d() = default;
    Conv1d(ParamRegistry& reg, const std::string& prefix, int64_t k, int64_t in, int64_t out,
           int64_t stride, int64_t padding, RngEngine& rng);
    Tensor forward(const Tensor& x) const { return conv1d(x, w, b, stride, padding); }
};

struct LayerNorm {
    Tensor gamma, beta;
    LayerNorm() = default;
    LayerNorm(ParamRegistry& reg, const std::string& prefix, int64_t dim);
    Tensor forward(const Tensor& x) const { return layer_norm_rows(x, gamma, beta); }
};

struct Embedding {
    Tensor table;  // [n, c]
    Embedding() = default;
    Embedding(ParamRegistry& reg, const std::string& prefix, int64_t n, int64_t c, RngEngine& rng,
              float std = 0.02f);
    Tensor forward(const std::vector<int>& idx) const { return embedding_lookup(table, idx); }
};

}  // namespace nn
}  // namespace choreo
