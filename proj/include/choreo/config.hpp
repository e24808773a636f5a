// Run configuration: one JSON file covering every stage, with two built-in
// profiles (desk and full scale) a single key apart. Unknown keys are
// rejected; the resolved config and its hash are logged with every run.
#pragma once

#include <cstdint>
#include <string>

#include "choreo/actor_critic.hpp"
#include "choreo/gpt.hpp"
#include "choreo/motion.hpp"
#include "choreo/vqvae.hpp"

namespace choreo {

struct PipelineConfig {
    std::string profile = "desk";
    uint64_t seed = 1;
    int64_t music_dim = 16;

    struct Synth {
        int num_sequences = 16;
        int64_t frames = 64;
        int64_t joints = 24;
        float fps = 30.f;
        float tempo_min_bpm = 90.f;
        float tempo_max_bpm = 150.f;
        float drift_speed = 0.003f;
        bool zero_drift = false;
        int64_t motion_beat_offset = 0;
        bool random_beat_phase = false;
        float jitter_amplitude = 0.f;
        int max_harmonic = 3;
        std::string coupling = "independent";  // or "echo"
    } synth;

    struct Vq {
        int64_t codebook_size = 32;
        int64_t channels = 32;
        int64_t width = 64;
        int64_t downsample = 8;
        float beta = 0.1f;
        float alpha1 = 1.f;
        float alpha2 = 1.f;
        bool squared_norms = true;
        bool reset_dead_codes = true;
        int64_t steps = 2000;
        int64_t batch_size = 8;
        float lr = 2e-3f;
        float adam_beta1 = 0.9f;
        float adam_beta2 = 0.99f;
        int64_t velocity_steps = 600;
        float velocity_lr = 1e-3f;
    } vqvae;

    struct Gpt {
        int64_t layers = 4;
        int64_t heads = 4;
        int64_t channels = 128;
        float dropout = 0.f;
        int64_t block_size = 8;
        int64_t steps = 3000;
        int64_t batch_size = 4;
        float lr = 1e-3f;
        float adam_beta1 = 0.5f;
        float adam_beta2 = 0.99f;
        float lr_decay_factor = 0.1f;
    } gpt;

    struct Ac {
        float gamma_b = 5.f;
        float gamma_c = 1.f;
        int64_t epochs = 10;
        int64_t batch_size = 2;
        float lr = 5e-5f;
        float adam_beta1 = 0.9f;
        float adam_beta2 = 0.99f;
    } actor_critic;

    struct Eval {
        double sigma = 3.0;
        bool scale_sigma_by_fps = true;
        int smooth_window = 5;
        double min_gap_fraction = 0.25;
    } eval;

    static PipelineConfig desk_profile();
    static PipelineConfig full_profile();

    // derived per-module configs
    SyntheticCorpusSpec synth_spec() const;
    VqVaeConfig vq_config(BodyHalf half, const HalfBodySplit& split) const;
    VqTrainConfig vq_train_config() const;
    VqTrainConfig velocity_train_config() const;
    GptConfig gpt_config() const;
    GptTrainConfig gpt_train_config() const;
    FinetuneConfig finetune_config(float fps) const;
    EvalConfig eval_config() const;
};

// Reads the file (JSON object; the optional "profile" key picks the default
// set, every other key overrides it). Unknown keys anywhere are an error.
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& json_text);

std::string config_to_json(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);  // FNV-1a 64 over the canonical dump

}  // namespace choreo
