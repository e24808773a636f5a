// Decoder-only transformer over (music, upper codes, lower codes) with the
// cross-conditional causal mask: any segment may attend to any segment at the
// same or earlier step. Supervised training and greedy generation.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "choreo/adam.hpp"
#include "choreo/music.hpp"
#include "choreo/nn.hpp"
#include "choreo/vqvae.hpp"

namespace choreo {

struct GptConfig {
    int64_t layers = 12;
    int64_t heads = 12;
    int64_t channels = 768;
    float dropout = 0.1f;
    int64_t block_size = 29;     // T'
    int64_t codebook_size = 512;  // N
    int64_t music_dim = 438;      // F
    int64_t code_streams = 2;     // 2 = upper+lower; 1 = single-body ablation
    void validate() const;
    int64_t segments() const { return 1 + code_streams; }
};

// Additive mask over (segments*n) positions: 0 where attention is allowed
// (target step <= source step), -1e9 elsewhere. The constant is applied
// before the joint 1/sqrt(C) scale and still underflows the softmax.
Tensor build_cross_conditional_mask(int64_t n, int64_t segments);

// One pre-norm transformer block; shared by the GPT stack and the critic.
struct TransformerBlock {
    nn::LayerNorm ln1, ln2;
    nn::Linear wq, wk, wv, wo, fc1, fc2;
    int64_t heads = 1;
    float attn_scale = 1.f;  // joint 1/sqrt(C) over the full channel width
    float dropout = 0.f;

    TransformerBlock() = default;
    TransformerBlock(nn::ParamRegistry& reg, const std::string& prefix, int64_t channels,
                     int64_t heads, float attn_scale, float dropout, RngEngine& rng);
    Tensor forward(const Tensor& x, const Tensor& mask, bool train, RngEngine* drop_rng) const;
};

class GptModel {
  public:
    GptModel(GptConfig cfg, uint64_t seed);

    const GptConfig& config() const { return cfg_; }

    // music: [n x F] rows already shifted one step ahead of the codes;
    // codes: one vector of n indices per stream. Returns the embedded and
    // position-tagged [segments*n x C] sequence.
    Tensor embed(const Tensor& music, const std::vector<std::vector<int>>& codes, bool train,
                 RngEngine* drop_rng) const;
    Tensor run_layers(const Tensor& x, int64_t from, int64_t to, bool train,
                      RngEngine* drop_rng) const;
    Tensor logits_from(const Tensor& x) const;  // final norm + shared head

    // embed -> all layers -> logits, [(segments*n) x N]
    Tensor forward(const Tensor& music, const std::vector<std::vector<int>>& codes, bool train,
                   RngEngine* drop_rng) const;

    // rows of the logits belonging to code stream k (0 = upper)
    Tensor stream_logits(const Tensor& logits, int64_t stream, int64_t n) const;

    // Eq-style supervised loss: mean over steps, summed over streams.
    Tensor ce_loss(const Tensor& logits, const std::vector<std::vector<int>>& next_codes) const;

    int64_t state_layer_count() const { return cfg_.layers / 2; }

    nn::ParamRegistry& registry() { return params_; }
    const nn::ParamRegistry& registry() const { return params_; }
    std::vector<NamedParam> all_params() const { return params_.entries(); }
    // parameters of the embedding + first half of the stack (the state
    // network), and of the remaining layers + head (the policy network)
    std::vector<NamedParam> state_params() const;
    std::vector<NamedParam> policy_params() const;

  private:
    GptConfig cfg_;
    nn::ParamRegistry params_;
    std::vector<nn::Embedding> code_emb_;
    nn::Linear music_proj_;
    Tensor pos_emb_;  // [segments*block x C]
    std::vector<TransformerBlock> blocks_;
    nn::LayerNorm ln_f_;
    nn::Linear head_;  // C -> N
};

struct GptTrainConfig {
    int64_t steps = 3000;
    int64_t batch_size = 4;
    AdamConfig adam{.lr = 3e-4f, .beta1 = 0.5f, .beta2 = 0.99f, .eps = 1e-8f};
    float lr_decay_factor = 0.1f;  // applied once, halfway through
    uint64_t seed = 1;
};

struct GptTrainState {
    int64_t step = 0;
    Adam::State adam;
};

struct GptTrainStats {
    std::vector<float> loss_curve;
};

// One training example: the codes of a sequence plus its code-step music.
struct CodedSequence {
    CodeSequence codes;
    CodeStepFeatures music;
};

// Runs steps [state->step, cfg.steps) when a state is given; each step's
// randomness derives from (seed, step), so resumes are bit-exact.
GptTrainStats train_gpt(GptModel& model, const std::vector<CodedSequence>& corpus,
                        const GptTrainConfig& cfg, GptTrainState* state = nullptr);

// Teacher-forced next-code accuracy over full windows, both streams pooled.
double next_code_accuracy(const GptModel& model, const std::vector<CodedSequence>& corpus);

struct GenerateOptions {
    float temperature = 0.f;  // 0 = greedy argmax
    uint64_t sample_seed = 0;
};

// Greedy autoregressive decoding from a start pair; music must provide at
// least `length` code-step rows. Contexts past the block size slide, keeping
// the most recent block-1 steps with window-relative positions.
CodeSequence generate(const GptModel& model, const CodeStepFeatures& music, int start_upper,
                      int start_lower, int64_t length, const GenerateOptions& opts = {});

// Code-corpus cache: JSON {id -> {upper, lower, d}} plus fps.
void save_code_corpus(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<CodeSequence>& codes);
std::vector<std::pair<std::string, CodeSequence>> load_code_corpus(const std::string& path);

}  // namespace choreo
