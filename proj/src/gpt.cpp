#include "choreo/gpt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace choreo {

void GptConfig::validate() const {
    if (layers < 1 || heads < 1 || channels < 1) throw ConfigError("gpt: bad stack dims");
    if (channels % heads != 0) throw ConfigError("gpt: channels must divide by heads");
    if (block_size < 2) throw ConfigError("gpt: block size must be >= 2");
    if (codebook_size < 2 || music_dim < 1) throw ConfigError("gpt: bad vocab/music dims");
    if (code_streams != 1 && code_streams != 2) throw ConfigError("gpt: 1 or 2 code streams");
    if (dropout < 0.f || dropout >= 1.f) throw ConfigError("gpt: dropout in [0,1)");
}

Tensor build_cross_conditional_mask(int64_t n, int64_t segments) {
    if (n < 1 || segments < 1) throw ConfigError("mask: bad dims");
    const int64_t s = segments * n;
    Tensor m = Tensor::zeros({s, s});
    for (int64_t i = 0; i < s; ++i) {
        int64_t ti = i % n;
        for (int64_t j = 0; j < s; ++j) {
            int64_t tj = j % n;
            if (tj > ti) m.data()[i * s + j] = -1e9f;
        }
    }
    return m;
}

TransformerBlock::TransformerBlock(nn::ParamRegistry& reg, const std::string& prefix,
                                   int64_t channels, int64_t heads_, float attn_scale_,
                                   float dropout_, RngEngine& rng) {
    ln1 = nn::LayerNorm(reg, prefix + "/ln1", channels);
    wq = nn::Linear(reg, prefix + "/wq", channels, channels, rng);
    wk = nn::Linear(reg, prefix + "/wk", channels, channels, rng);
    wv = nn::Linear(reg, prefix + "/wv", channels, channels, rng);
    wo = nn::Linear(reg, prefix + "/wo", channels, channels, rng);
    ln2 = nn::LayerNorm(reg, prefix + "/ln2", channels);
    fc1 = nn::Linear(reg, prefix + "/fc1", channels, 4 * channels, rng);
    fc2 = nn::Linear(reg, prefix + "/fc2", 4 * channels, channels, rng);
    heads = heads_;
    attn_scale = attn_scale_;
    dropout = dropout_;
}

Tensor TransformerBlock::forward(const Tensor& x, const Tensor& mask, bool train,
                                 RngEngine* drop_rng) const {
    const int64_t c = x.dim(1);
    const int64_t hd = c / heads;
    Tensor xn = ln1.forward(x);
    Tensor q = wq.forward(xn), k = wk.forward(xn), v = wv.forward(xn);
    std::vector<Tensor> head_outs;
    head_outs.reserve(heads);
    for (int64_t h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
        Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
        Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
        Tensor scores = scale(add(matmul(qh, transpose(kh)), mask), attn_scale);
        Tensor att = softmax_rows(scores);
        if (train && dropout > 0.f) att = choreo::dropout(att, dropout, train, *drop_rng);
        head_outs.push_back(matmul(att, vh));
    }
    Tensor attn = wo.forward(concat_cols(head_outs));
    if (train && dropout > 0.f) attn = choreo::dropout(attn, dropout, train, *drop_rng);
    Tensor x1 = add(x, attn);
    Tensor mlp = fc2.forward(gelu(fc1.forward(ln2.forward(x1))));
    if (train && dropout > 0.f) mlp = choreo::dropout(mlp, dropout, train, *drop_rng);
    return add(x1, mlp);
}

GptModel::GptModel(GptConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    RngEngine rng(seed);
    for (int64_t s = 0; s < cfg_.code_streams; ++s)
        code_emb_.emplace_back(params_, "emb/codes" + std::to_string(s), cfg_.codebook_size,
                               cfg_.channels, rng);
    music_proj_ = nn::Linear(params_, "emb/music", cfg_.music_dim, cfg_.channels, rng);
    pos_emb_ = params_.add("emb/pos", nn::init_normal({cfg_.segments() * cfg_.block_size,
                                                       cfg_.channels}, 0.02f, rng));
    const float attn_scale = 1.f / std::sqrt(static_cast<float>(cfg_.channels));
    for (int64_t l = 0; l < cfg_.layers; ++l)
        blocks_.emplace_back(params_, "layer" + std::to_string(l), cfg_.channels, cfg_.heads,
                             attn_scale, cfg_.dropout, rng);
    ln_f_ = nn::LayerNorm(params_, "ln_f", cfg_.channels);
    head_ = nn::Linear(params_, "head", cfg_.channels, cfg_.codebook_size, rng);
}

Tensor GptModel::embed(const Tensor& music, const std::vector<std::vector<int>>& codes, bool train,
                       RngEngine* drop_rng) const {
    if (static_cast<int64_t>(codes.size()) != cfg_.code_streams)
        throw ConfigError("gpt: wrong number of code streams");
    const int64_t n = music.dim(0);
    if (n < 1 || n > cfg_.block_size) throw ConfigError("gpt: window length exceeds block size");
    if (music.dim(1) != cfg_.music_dim) throw ConfigError("gpt: music feature dim mismatch");
    for (const auto& c : codes)
        if (static_cast<int64_t>(c.size()) != n) throw ConfigError("gpt: code/music length mismatch");

    std::vector<Tensor> segs;
    segs.push_back(music_proj_.forward(music));
    for (int64_t s = 0; s < cfg_.code_streams; ++s) segs.push_back(code_emb_[s].forward(codes[s]));
    Tensor x = concat_rows(segs);

    std::vector<Tensor> pos;
    for (int64_t seg = 0; seg < cfg_.segments(); ++seg)
        pos.push_back(slice_rows(pos_emb_, seg * cfg_.block_size, seg * cfg_.block_size + n));
    x = add(x, concat_rows(pos));
    if (train && cfg_.dropout > 0.f) x = choreo::dropout(x, cfg_.dropout, train, *drop_rng);
    return x;
}

Tensor GptModel::run_layers(const Tensor& x, int64_t from, int64_t to, bool train,
                            RngEngine* drop_rng) const {
    if (from < 0 || to > cfg_.layers || from > to) throw ConfigError("gpt: bad layer range");
    const int64_t n = x.dim(0) / cfg_.segments();
    Tensor mask = build_cross_conditional_mask(n, cfg_.segments());
    Tensor h = x;
    for (int64_t l = from; l < to; ++l) h = blocks_[l].forward(h, mask, train, drop_rng);
    return h;
}

Tensor GptModel::logits_from(const Tensor& x) const { return head_.forward(ln_f_.forward(x)); }

Tensor GptModel::forward(const Tensor& music, const std::vector<std::vector<int>>& codes,
                         bool train, RngEngine* drop_rng) const {
    return logits_from(run_layers(embed(music, codes, train, drop_rng), 0, cfg_.layers, train,
                                  drop_rng));
}

Tensor GptModel::stream_logits(const Tensor& logits, int64_t stream, int64_t n) const {
    if (stream < 0 || stream >= cfg_.code_streams) throw ConfigError("gpt: bad stream index");
    return slice_rows(logits, (1 + stream) * n, (2 + stream) * n);
}

Tensor GptModel::ce_loss(const Tensor& logits, const std::vector<std::vector<int>>& next_codes) const {
    if (static_cast<int64_t>(next_codes.size()) != cfg_.code_streams)
        throw ConfigError("gpt: wrong target stream count");
    const int64_t n = logits.dim(0) / cfg_.segments();
    Tensor loss;
    for (int64_t s = 0; s < cfg_.code_streams; ++s) {
        Tensor part = mean(cross_entropy_rows(stream_logits(logits, s, n), next_codes[s]));
        loss = loss.defined() ? add(loss, part) : part;
    }
    return loss;
}

std::vector<NamedParam> GptModel::state_params() const {
    std::vector<NamedParam> out;
    const int64_t split = state_layer_count();
    for (const auto& e : params_.entries()) {
        bool is_emb = e.name.rfind("emb/", 0) == 0;
        bool is_early = false;
        if (e.name.rfind("layer", 0) == 0) {
            int64_t l = std::stoll(e.name.substr(5, e.name.find('/') - 5));
            is_early = l < split;
        }
        if (is_emb || is_early) out.push_back(e);
    }
    return out;
}

std::vector<NamedParam> GptModel::policy_params() const {
    std::vector<NamedParam> out;
    const int64_t split = state_layer_count();
    for (const auto& e : params_.entries()) {
        bool is_late = false;
        if (e.name.rfind("layer", 0) == 0) {
            int64_t l = std::stoll(e.name.substr(5, e.name.find('/') - 5));
            is_late = l >= split;
        }
        if (is_late || e.name.rfind("ln_f", 0) == 0 || e.name.rfind("head", 0) == 0)
            out.push_back(e);
    }
    return out;
}

namespace {
// window of a coded sequence: inputs p[s..s+n), music rows [s+1..s+n+1),
// targets p[s+1..s+n+1)
struct Window {
    Tensor music;
    std::vector<std::vector<int>> inputs;
    std::vector<std::vector<int>> targets;
    int64_t n = 0;
};

Window make_window(const CodedSequence& seq, int64_t block, int64_t start, int64_t n,
                   int64_t streams) {
    Window w;
    w.n = n;
    const int64_t f = seq.music.feature_dim;
    std::vector<float> rows(n * f);
    std::copy_n(seq.music.features.data() + (start + 1) * f, n * f, rows.begin());
    w.music = Tensor::from({n, f}, std::move(rows));
    auto slice_codes = [&](const std::vector<int>& src, int64_t lo) {
        return std::vector<int>(src.begin() + lo, src.begin() + lo + n);
    };
    w.inputs.push_back(slice_codes(seq.codes.upper, start));
    w.targets.push_back(slice_codes(seq.codes.upper, start + 1));
    if (streams == 2) {
        w.inputs.push_back(slice_codes(seq.codes.lower, start));
        w.targets.push_back(slice_codes(seq.codes.lower, start + 1));
    }
    (void)block;
    return w;
}
}  // namespace

GptTrainStats train_gpt(GptModel& model, const std::vector<CodedSequence>& corpus,
                        const GptTrainConfig& cfg, GptTrainState* state) {
    if (corpus.empty()) throw DataError("train_gpt: empty corpus");
    const GptConfig& mc = model.config();
    for (const auto& s : corpus) {
        if (s.codes.length() < 2) throw DataError("train_gpt: sequence with fewer than 2 code steps");
        if (s.music.rows() < s.codes.length()) throw DataError("train_gpt: music shorter than codes");
        if (s.music.feature_dim != mc.music_dim) throw DataError("train_gpt: music dim mismatch");
    }
    Adam opt(model.all_params(), cfg.adam);
    int64_t start_step = 0;
    if (state) {
        if (!state->adam.empty()) opt.import_state(state->adam);
        start_step = state->step;
    }
    const int64_t batch = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(corpus.size()));
    GptTrainStats stats;

    for (int64_t step = start_step; step < cfg.steps; ++step) {
        if (cfg.lr_decay_factor != 1.f && step >= cfg.steps / 2)
            opt.set_lr(cfg.adam.lr * cfg.lr_decay_factor);
        RngEngine rng = step_rng(cfg.seed, static_cast<uint64_t>(step), /*salt=*/2);
        auto picks = sample_distinct(corpus.size(), batch, rng);
        opt.zero_grad();
        Tensor loss_acc;
        for (size_t pick : picks) {
            const auto& seq = corpus[pick];
            const int64_t usable = seq.codes.length() - 1;
            int64_t n = std::min<int64_t>(mc.block_size, usable);
            int64_t start = (usable > n) ? uniform_int(rng, 0, usable - n) : 0;
            Window w = make_window(seq, mc.block_size, start, n, mc.code_streams);
            Tensor logits = model.forward(w.music, w.inputs, /*train=*/true, &rng);
            Tensor loss = model.ce_loss(logits, w.targets);
            loss_acc = loss_acc.defined() ? add(loss_acc, loss) : loss;
        }
        Tensor loss = scale(loss_acc, 1.f / static_cast<float>(batch));
        if (!all_finite(loss)) throw NumericError("train_gpt: loss diverged at step " + std::to_string(step));
        loss.backward();
        opt.step();
        stats.loss_curve.push_back(loss.item());
    }
    if (state) {
        state->step = cfg.steps;
        state->adam = opt.export_state();
    }
    return stats;
}

double next_code_accuracy(const GptModel& model, const std::vector<CodedSequence>& corpus) {
    NoGradGuard ng;
    const GptConfig& mc = model.config();
    int64_t hits = 0, total = 0;
    for (const auto& seq : corpus) {
        const int64_t usable = seq.codes.length() - 1;
        for (int64_t start = 0; start < usable; start += mc.block_size) {
            int64_t n = std::min<int64_t>(mc.block_size, usable - start);
            Window w = make_window(seq, mc.block_size, start, n, mc.code_streams);
            Tensor logits = model.forward(w.music, w.inputs, /*train=*/false, nullptr);
            for (int64_t s = 0; s < mc.code_streams; ++s) {
                auto pred = argmax_rows(model.stream_logits(logits, s, n));
                for (int64_t t = 0; t < n; ++t) {
                    hits += (pred[t] == w.targets[s][t]) ? 1 : 0;
                    ++total;
                }
            }
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

CodeSequence generate(const GptModel& model, const CodeStepFeatures& music, int start_upper,
                      int start_lower, int64_t length, const GenerateOptions& opts) {
    NoGradGuard ng;
    const GptConfig& mc = model.config();
    if (mc.code_streams != 2) throw ConfigError("generate: needs an upper+lower model");
    if (length < 1) throw ConfigError("generate: length must be >= 1");
    if (music.rows() < length) throw DataError("generate: music shorter than requested length");
    if (music.feature_dim != mc.music_dim) throw DataError("generate: music dim mismatch");
    if (start_upper < 0 || start_upper >= mc.codebook_size || start_lower < 0 ||
        start_lower >= mc.codebook_size)
        throw ConfigError("generate: start codes out of range");

    CodeSequence out;
    out.step = music.step;
    out.upper = {start_upper};
    out.lower = {start_lower};
    RngEngine sample_rng(opts.sample_seed);
    const int64_t f = music.feature_dim;
    for (int64_t t = 1; t < length; ++t) {
        // context: most recent block-1 steps at most, so the next row fits
        int64_t n = std::min<int64_t>(t, mc.block_size - 1);
        int64_t lo = t - n;
        std::vector<float> rows(n * f);
        std::copy_n(music.features.data() + (lo + 1) * f, n * f, rows.begin());
        Tensor m = Tensor::from({n, f}, std::move(rows));
        std::vector<std::vector<int>> codes{
            std::vector<int>(out.upper.begin() + lo, out.upper.begin() + lo + n),
            std::vector<int>(out.lower.begin() + lo, out.lower.begin() + lo + n)};
        Tensor logits = model.forward(m, codes, /*train=*/false, nullptr);
        auto pick = [&](int64_t stream) {
            Tensor row = slice_rows(model.stream_logits(logits, stream, n), n - 1, n);
            if (opts.temperature <= 0.f) return argmax_rows(row)[0];
            Tensor probs = softmax_rows(scale(row, 1.f / opts.temperature));
            double r = uniform_real(sample_rng);
            double acc = 0;
            for (int64_t k = 0; k < probs.dim(1); ++k) {
                acc += probs.data()[k];
                if (r <= acc) return static_cast<int>(k);
            }
            return static_cast<int>(probs.dim(1) - 1);
        };
        out.upper.push_back(pick(0));
        out.lower.push_back(pick(1));
    }
    out.fps = 0.f;  // caller pairs with its motion fps
    return out;
}

void save_code_corpus(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<CodeSequence>& codes) {
    if (ids.size() != codes.size()) throw ConfigError("save_code_corpus: id/code count mismatch");
    nlohmann::json j;
    for (size_t i = 0; i < ids.size(); ++i) {
        j[ids[i]] = {{"upper", codes[i].upper},
                     {"lower", codes[i].lower},
                     {"d", codes[i].step},
                     {"fps", codes[i].fps}};
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump(2) << "\n";
}

std::vector<std::pair<std::string, CodeSequence>> load_code_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": code corpus parse error: " + e.what());
    }
    std::vector<std::pair<std::string, CodeSequence>> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        CodeSequence cs;
        cs.upper = it.value().at("upper").get<std::vector<int>>();
        cs.lower = it.value().at("lower").get<std::vector<int>>();
        cs.step = it.value().at("d").get<int64_t>();
        cs.fps = it.value().at("fps").get<float>();
        if (cs.upper.size() != cs.lower.size()) throw DataError(path + ": stream length mismatch");
        out.emplace_back(it.key(), std::move(cs));
    }
    return out;
}

}  // namespace choreo
