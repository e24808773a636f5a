// Scalar-generic mirror of the GPT forward, for double-precision composite
// gradient checks (same role as vq_mirror.hpp).
#pragma once

#include <map>
#include <string>
#include <vector>

#include "choreo/gpt.hpp"
#include "support/vq_mirror.hpp"

namespace gpt_mirror {

template <typename S>
struct Mirror {
    choreo::GptConfig cfg;
    std::map<std::string, choreo::TensorT<S>> w;

    explicit Mirror(const choreo::GptModel& model) : cfg(model.config()) {
        for (const auto& e : model.registry().entries())
            w.emplace(e.name, vq_mirror::cast_tensor<S>(e.tensor));
    }

    choreo::TensorT<S> linear(const std::string& name, const choreo::TensorT<S>& x) const {
        return choreo::add_rowwise(choreo::matmul(x, w.at(name + "/w")), w.at(name + "/b"));
    }
    choreo::TensorT<S> lnorm(const std::string& name, const choreo::TensorT<S>& x) const {
        return choreo::layer_norm_rows(x, w.at(name + "/g"), w.at(name + "/b"));
    }

    choreo::TensorT<S> block(int64_t l, const choreo::TensorT<S>& x,
                             const choreo::TensorT<S>& mask) const {
        const std::string p = "layer" + std::to_string(l);
        const int64_t c = cfg.channels, hd = c / cfg.heads;
        const S att_scale = S(1) / std::sqrt(S(c));
        auto xn = lnorm(p + "/ln1", x);
        auto q = linear(p + "/wq", xn), k = linear(p + "/wk", xn), v = linear(p + "/wv", xn);
        std::vector<choreo::TensorT<S>> outs;
        for (int64_t h = 0; h < cfg.heads; ++h) {
            auto qh = choreo::slice_cols(q, h * hd, (h + 1) * hd);
            auto kh = choreo::slice_cols(k, h * hd, (h + 1) * hd);
            auto vh = choreo::slice_cols(v, h * hd, (h + 1) * hd);
            auto att = choreo::softmax_rows(
                choreo::scale(choreo::add(choreo::matmul(qh, choreo::transpose(kh)), mask), att_scale));
            outs.push_back(choreo::matmul(att, vh));
        }
        auto x1 = choreo::add(x, linear(p + "/wo", choreo::concat_cols(outs)));
        auto mlp = linear(p + "/fc2", choreo::gelu(linear(p + "/fc1", lnorm(p + "/ln2", x1))));
        return choreo::add(x1, mlp);
    }

    choreo::TensorT<S> forward(const choreo::TensorT<S>& music,
                               const std::vector<std::vector<int>>& codes) const {
        const int64_t n = music.dim(0);
        std::vector<choreo::TensorT<S>> segs;
        segs.push_back(linear("emb/music", music));
        for (int64_t s = 0; s < cfg.code_streams; ++s)
            segs.push_back(choreo::embedding_lookup(w.at("emb/codes" + std::to_string(s) + "/table"),
                                                    codes[s]));
        auto x = choreo::concat_rows(segs);
        std::vector<choreo::TensorT<S>> pos;
        for (int64_t seg = 0; seg < cfg.segments(); ++seg)
            pos.push_back(choreo::slice_rows(w.at("emb/pos"), seg * cfg.block_size,
                                             seg * cfg.block_size + n));
        x = choreo::add(x, choreo::concat_rows(pos));

        auto mask64 = [&] {
            choreo::Tensor m32 = choreo::build_cross_conditional_mask(n, cfg.segments());
            return vq_mirror::cast_tensor<S>(m32);
        }();
        for (int64_t l = 0; l < cfg.layers; ++l) x = block(l, x, mask64);
        return linear("head", lnorm("ln_f", x));
    }

    choreo::TensorT<S> ce_loss(const choreo::TensorT<S>& logits,
                               const std::vector<std::vector<int>>& targets) const {
        const int64_t n = logits.dim(0) / cfg.segments();
        choreo::TensorT<S> loss;
        for (int64_t s = 0; s < cfg.code_streams; ++s) {
            auto part = choreo::mean(choreo::cross_entropy_rows(
                choreo::slice_rows(logits, (1 + s) * n, (2 + s) * n), targets[s]));
            loss = loss.defined() ? choreo::add(loss, part) : part;
        }
        return loss;
    }
};

}  // namespace gpt_mirror
