// Actor-critic finetuning of the motion GPT: the first half of the stack is
// the frozen state network, the rest plus the head make policy decisions, and
// a 3-layer transformer branch estimates per-step values. Rewards come from
// the decoded motion: beat alignment and upper/lower facing consistency.
#pragma once

#include <cstdint>
#include <vector>

#include "choreo/gpt.hpp"
#include "choreo/metrics.hpp"
#include "choreo/vqvae.hpp"

namespace choreo {

struct RewardConfig {
    float gamma_b = 5.f;  // beat-align weight
    float gamma_c = 1.f;  // consistency weight
    SkeletonRefs refs;
    float degenerate_norm = 1e-6f;
};

class CriticModel {
  public:
    CriticModel(int64_t channels, int64_t heads, int64_t block_size, int64_t segments,
                float dropout, uint64_t seed);

    // s: [(segments*n) x C] states from the frozen first half of the GPT.
    // Returns per-step values v = v_upper + v_lower, shape [n].
    Tensor values(const Tensor& s, bool train = false, RngEngine* drop_rng = nullptr) const;

    nn::ParamRegistry& registry() { return params_; }
    const nn::ParamRegistry& registry() const { return params_; }
    std::vector<NamedParam> all_params() const { return params_.entries(); }

  private:
    int64_t segments_;
    int64_t block_size_;
    nn::ParamRegistry params_;
    std::vector<TransformerBlock> blocks_;
    nn::Linear head_;  // C -> 1, zero-initialized
};

// eps_t = r_t + sg[v_{t+1}] - v_t for t in [0, n-2]; plain-number variant.
std::vector<float> td_error(const std::vector<float>& rewards, const std::vector<float>& values);
// Graph variant: gradient reaches v_t with coefficient -1; v_{t+1} is stopped.
Tensor td_error_graph(const Tensor& rewards_const, const Tensor& values);

// (1/(n-1)) * sum_t ce_sum[t] * sg[eps[t]]
Tensor ac_loss(const Tensor& ce_sum_rows, const Tensor& eps);
// (1/(n-1)) * ||eps||^2 with gradient through the unstopped v terms
Tensor critic_loss(const Tensor& eps);

// R_b per step: -1 iff the window [t*d, (t+1)*d) holds a music beat and no
// dance beat, else +1.
std::vector<float> beat_align_reward(const std::vector<int64_t>& dance_beats,
                                     const std::vector<int64_t>& music_beats, int64_t steps,
                                     int64_t d);

// Per-frame facing consistency r_hat in [-1, 1]: the dot of the x-z-projected
// unit normals when negative, else 1. Degenerate normals count as consistent.
std::vector<float> consistency_per_frame(const MotionSequence& merged, const RewardConfig& cfg,
                                         int64_t* degenerate_frames = nullptr);
// R_c per step: infimum of r_hat over the step's frame window.
std::vector<float> consistency_reward(const MotionSequence& merged, const RewardConfig& cfg,
                                      int64_t steps, int64_t d,
                                      int64_t* degenerate_frames = nullptr);

struct FinetuneSequence {
    CodeStepFeatures music;           // code-step features for the GPT
    std::vector<int64_t> music_beats;  // frame indices
    int start_upper = 0;
    int start_lower = 0;
    float fps = 30.f;
};

struct FinetuneConfig {
    int64_t epochs = 10;
    int64_t batch_size = 4;
    AdamConfig adam{.lr = 1e-5f, .beta1 = 0.9f, .beta2 = 0.99f, .eps = 1e-8f};
    uint64_t seed = 1;
    RewardConfig reward;
    EvalConfig eval;  // dance-beat extraction settings for R_b
};

struct FinetuneEpochStats {
    float mean_rb = 0, mean_rc = 0, mean_reward = 0;
    float mean_ac_loss = 0, mean_critic_loss = 0;
};

struct FinetuneStats {
    std::vector<FinetuneEpochStats> epochs;
    int64_t degenerate_frames = 0;
};

struct FinetuneState {
    int64_t epoch = 0;
    Adam::State policy_adam, critic_adam;
};

// Rolls out greedily from each sequence's start codes over the teacher music,
// decodes through the frozen VQ-VAEs, scores rewards, and alternates one
// policy step with one critic step per batch. State-network parameters are
// never touched. Each epoch's randomness derives from (seed, epoch).
FinetuneStats finetune(GptModel& gpt, CriticModel& critic, const VqVaeModel& upper_vq,
                       const VqVaeModel& lower_vq, const HalfBodySplit& split,
                       const std::vector<FinetuneSequence>& corpus, const FinetuneConfig& cfg,
                       FinetuneState* state = nullptr);

// Decode a code sequence through both VQ-VAEs to a full motion: merged halves
// plus the integrated root trajectory from the velocity branch. with_root
// false keeps the pose root-relative (codebook inspection measures the
// frozen-pose property there, away from the root drift).
MotionSequence decode_codes_to_motion(const VqVaeModel& upper_vq, const VqVaeModel& lower_vq,
                                      const HalfBodySplit& split, const CodeSequence& codes,
                                      float fps, bool with_root = true);

}  // namespace choreo
