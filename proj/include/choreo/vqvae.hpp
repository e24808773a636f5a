// Pose VQ-VAE: per-half-body convolutional encoder, quantized codebook,
// pose decoder, and the lower body's global-velocity decoder branch.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "choreo/adam.hpp"
#include "choreo/motion.hpp"
#include "choreo/nn.hpp"

namespace choreo {

enum class BodyHalf { upper, lower };

struct VqVaeConfig {
    int64_t codebook_size = 32;  // N
    int64_t channels = 32;       // C
    int64_t downsample = 8;      // d, power of two
    int64_t width = 0;           // hidden width, 0 -> channels / 2
    int64_t in_dim = 0;          // 3 * half joint count
    float beta = 0.1f;
    float alpha1 = 1.f;
    float alpha2 = 1.f;
    bool squared_norms = true;  // codebook/commitment as MSE; false -> plain L2
    bool reset_dead_codes = true;
    BodyHalf half = BodyHalf::upper;

    int64_t hidden() const { return width > 0 ? width : channels / 2; }
    int64_t stages() const;  // log2(downsample)
    void validate() const;
};

struct VqLossParts {
    float total = 0, rec = 0, rec_pos = 0, rec_vel = 0, rec_acc = 0, codebook = 0, commit = 0;
};

// Paired per-step code indices for both halves.
struct CodeSequence {
    std::vector<int> upper;
    std::vector<int> lower;
    int64_t step = 8;  // d
    float fps = 0.f;
    int64_t length() const { return static_cast<int64_t>(upper.size()); }
};

class VqVaeModel {
  public:
    VqVaeModel(VqVaeConfig cfg, uint64_t seed);

    const VqVaeConfig& config() const { return cfg_; }

    // Encoder features for a [T x in_dim] sequence; crops trailing frames if
    // T is not a multiple of d. T < d is an error.
    Tensor encode(const Tensor& frames) const;

    // Nearest codebook rows by L2; ties resolve to the lowest index.
    std::vector<int> nearest_codes(const Tensor& e) const;
    // Forward substitution by codebook rows; backward passes the gradient of
    // e_q straight through to e. The codebook gets no gradient on this path.
    Tensor quantize_straight_through(const Tensor& e, const std::vector<int>& codes) const;

    Tensor decode_pose(const Tensor& e_q) const;           // [T' x C] -> [T'*d x in_dim]
    Tensor decode_velocity(const Tensor& e_q_lower) const;  // lower model only, [(T-1) x 3]
    Tensor codebook_rows(const std::vector<int>& codes) const;  // differentiable lookup

    Tensor codebook() const { return codebook_; }
    bool has_velocity_branch() const { return cfg_.half == BodyHalf::lower; }

    // Eq-style loss: reconstruction (position + velocity + acceleration L1),
    // codebook term on sg[e], commitment term on sg[e_q].
    Tensor vq_loss(const Tensor& decoded, const Tensor& target, const Tensor& e,
                   const std::vector<int>& codes, VqLossParts* parts = nullptr) const;

    std::vector<NamedParam> main_params() const;      // encoder + decoder + codebook
    std::vector<NamedParam> velocity_params() const;  // velocity branch only
    nn::ParamRegistry& registry() { return params_; }
    const nn::ParamRegistry& registry() const { return params_; }

    std::vector<int64_t>& usage_counters() { return usage_; }
    const std::vector<int64_t>& usage_counters() const { return usage_; }

  private:
    Tensor run_decoder_stack(const Tensor& e_q, const std::vector<nn::Conv1d>& res,
                             const std::vector<nn::Conv1d>& ups, const nn::Conv1d& head) const;

    VqVaeConfig cfg_;
    nn::ParamRegistry params_;
    Tensor codebook_;  // [N x C]
    std::vector<int64_t> usage_;

    std::vector<nn::Conv1d> enc_down_;  // stride-2 stages
    std::vector<nn::Conv1d> enc_res_;   // bottleneck residual pairs (2 per block)
    std::vector<nn::Conv1d> dec_res_;
    std::vector<nn::Conv1d> dec_up_;  // stride-1 convs after zero upsampling
    nn::Conv1d dec_head_;
    std::vector<nn::Conv1d> vel_res_;
    std::vector<nn::Conv1d> vel_up_;
    nn::Conv1d vel_head_;
};

struct VqTrainConfig {
    int64_t steps = 2000;
    int64_t batch_size = 8;
    AdamConfig adam{.lr = 3e-4f, .beta1 = 0.9f, .beta2 = 0.99f, .eps = 1e-8f};
    uint64_t seed = 1;
    int64_t reset_interval = 0;  // dead-code reset cadence; 0 -> corpus/batch
};

// Trainer state beyond the parameters; enough for a bit-exact resume because
// each step draws its randomness from (seed, step) alone.
struct VqTrainState {
    int64_t step = 0;
    Adam::State adam;
    std::vector<int64_t> usage_since_reset;
};

struct VqTrainStats {
    std::vector<float> loss_curve;  // per step, total loss
    std::vector<VqLossParts> parts_curve;
    int64_t codes_used = 0;  // distinct codes hit on the training set afterwards
};

// Joint phase: encoder, decoder, codebook. Sequences are [T x in_dim] tracks.
// Runs steps [state->step, cfg.steps) when a state is given.
VqTrainStats train_vqvae(VqVaeModel& model, const std::vector<std::vector<float>>& sequences,
                         const VqTrainConfig& cfg, VqTrainState* state = nullptr);

// Second phase: velocity branch only, everything else frozen. Targets are the
// (T-1) x 3 global velocities paired with each lower-half sequence.
VqTrainStats train_velocity_branch(VqVaeModel& model,
                                   const std::vector<std::vector<float>>& lower_sequences,
                                   const std::vector<std::vector<float>>& velocity_targets,
                                   const VqTrainConfig& cfg, VqTrainState* state = nullptr);

// Flatten a motion sequence to the [T x J*3] track the model consumes.
Tensor motion_to_tensor(const MotionSequence& p);

// Both halves of a root-normalized sequence to paired code indices.
CodeSequence encode_to_codes(const VqVaeModel& upper_model, const VqVaeModel& lower_model,
                             const MotionSequence& normalized, const HalfBodySplit& split);

}  // namespace choreo
