#include "choreo/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

namespace choreo {

PipelineConfig PipelineConfig::desk_profile() { return PipelineConfig{}; }

PipelineConfig PipelineConfig::full_profile() {
    PipelineConfig c;
    c.profile = "full";
    c.music_dim = 438;
    c.synth.frames = 240;
    c.synth.fps = 60.f;
    c.synth.num_sequences = 64;
    c.vqvae.codebook_size = 512;
    c.vqvae.channels = 512;
    c.vqvae.width = 256;
    c.vqvae.steps = 12000;
    c.vqvae.batch_size = 32;
    c.vqvae.lr = 3e-5f;
    c.vqvae.velocity_steps = 3000;
    c.vqvae.velocity_lr = 3e-5f;
    c.gpt.layers = 12;
    c.gpt.heads = 12;
    c.gpt.channels = 768;
    c.gpt.dropout = 0.1f;
    c.gpt.block_size = 29;
    c.gpt.steps = 12000;
    c.gpt.lr = 3e-4f;
    c.actor_critic.lr = 1e-5f;
    return c;
}

SyntheticCorpusSpec PipelineConfig::synth_spec() const {
    SyntheticCorpusSpec s;
    s.motion_beat_offset = synth.motion_beat_offset;
    s.random_beat_phase = synth.random_beat_phase;
    s.jitter_amplitude = synth.jitter_amplitude;
    s.max_harmonic = synth.max_harmonic;
    s.num_sequences = synth.num_sequences;
    s.frames = synth.frames;
    s.joints = synth.joints;
    s.fps = synth.fps;
    s.tempo_min_bpm = synth.tempo_min_bpm;
    s.tempo_max_bpm = synth.tempo_max_bpm;
    s.drift_speed = synth.drift_speed;
    s.zero_drift = synth.zero_drift;
    s.seed = seed;
    if (synth.coupling == "echo")
        s.coupling = SyntheticCorpusSpec::Coupling::echo;
    else if (synth.coupling == "independent")
        s.coupling = SyntheticCorpusSpec::Coupling::independent;
    else
        throw ConfigError("config: coupling must be 'independent' or 'echo'");
    return s;
}

VqVaeConfig PipelineConfig::vq_config(BodyHalf half, const HalfBodySplit& split) const {
    VqVaeConfig c;
    c.codebook_size = vqvae.codebook_size;
    c.channels = vqvae.channels;
    c.width = vqvae.width;
    c.downsample = vqvae.downsample;
    c.beta = vqvae.beta;
    c.alpha1 = vqvae.alpha1;
    c.alpha2 = vqvae.alpha2;
    c.squared_norms = vqvae.squared_norms;
    c.reset_dead_codes = vqvae.reset_dead_codes;
    c.half = half;
    c.in_dim = 3 * static_cast<int64_t>(half == BodyHalf::upper ? split.upper.size()
                                                                : split.lower.size());
    return c;
}

VqTrainConfig PipelineConfig::vq_train_config() const {
    VqTrainConfig c;
    c.steps = vqvae.steps;
    c.batch_size = vqvae.batch_size;
    c.adam = {vqvae.lr, vqvae.adam_beta1, vqvae.adam_beta2, 1e-8f};
    c.seed = seed;
    return c;
}

VqTrainConfig PipelineConfig::velocity_train_config() const {
    VqTrainConfig c = vq_train_config();
    c.steps = vqvae.velocity_steps;
    c.adam.lr = vqvae.velocity_lr;
    return c;
}

GptConfig PipelineConfig::gpt_config() const {
    GptConfig c;
    c.layers = gpt.layers;
    c.heads = gpt.heads;
    c.channels = gpt.channels;
    c.dropout = gpt.dropout;
    c.block_size = gpt.block_size;
    c.codebook_size = vqvae.codebook_size;
    c.music_dim = music_dim;
    c.code_streams = 2;
    return c;
}

GptTrainConfig PipelineConfig::gpt_train_config() const {
    GptTrainConfig c;
    c.steps = gpt.steps;
    c.batch_size = gpt.batch_size;
    c.adam = {gpt.lr, gpt.adam_beta1, gpt.adam_beta2, 1e-8f};
    c.lr_decay_factor = gpt.lr_decay_factor;
    c.seed = seed;
    return c;
}

FinetuneConfig PipelineConfig::finetune_config(float fps) const {
    FinetuneConfig c;
    c.epochs = actor_critic.epochs;
    c.batch_size = actor_critic.batch_size;
    c.adam = {actor_critic.lr, actor_critic.adam_beta1, actor_critic.adam_beta2, 1e-8f};
    c.seed = seed;
    c.reward.gamma_b = actor_critic.gamma_b;
    c.reward.gamma_c = actor_critic.gamma_c;
    c.eval = eval_config();
    (void)fps;
    return c;
}

EvalConfig PipelineConfig::eval_config() const {
    EvalConfig c;
    c.sigma = eval.sigma;
    c.scale_sigma_by_fps = eval.scale_sigma_by_fps;
    c.smooth_window = eval.smooth_window;
    c.min_gap_fraction = eval.min_gap_fraction;
    return c;
}

namespace {
using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("config: unknown key '" + where + it.key() + "'");
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");

    std::string profile = "desk";
    if (j.contains("profile")) profile = j.at("profile").get<std::string>();
    PipelineConfig cfg;
    if (profile == "desk")
        cfg = PipelineConfig::desk_profile();
    else if (profile == "full")
        cfg = PipelineConfig::full_profile();
    else
        throw ConfigError("config: profile must be 'desk' or 'full'");

    reject_unknown(j, {"profile", "seed", "music_dim", "synth", "vqvae", "gpt", "actor_critic",
                       "eval"},
                   "");
    take(j, "seed", cfg.seed);
    take(j, "music_dim", cfg.music_dim);

    if (j.contains("synth")) {
        const json& s = j.at("synth");
        reject_unknown(s, {"num_sequences", "frames", "joints", "fps", "tempo_min_bpm",
                           "tempo_max_bpm", "drift_speed", "zero_drift", "motion_beat_offset",
                           "random_beat_phase", "jitter_amplitude", "max_harmonic", "coupling"},
                       "synth.");
        take(s, "num_sequences", cfg.synth.num_sequences);
        take(s, "frames", cfg.synth.frames);
        take(s, "joints", cfg.synth.joints);
        take(s, "fps", cfg.synth.fps);
        take(s, "tempo_min_bpm", cfg.synth.tempo_min_bpm);
        take(s, "tempo_max_bpm", cfg.synth.tempo_max_bpm);
        take(s, "drift_speed", cfg.synth.drift_speed);
        take(s, "zero_drift", cfg.synth.zero_drift);
        take(s, "motion_beat_offset", cfg.synth.motion_beat_offset);
        take(s, "random_beat_phase", cfg.synth.random_beat_phase);
        take(s, "jitter_amplitude", cfg.synth.jitter_amplitude);
        take(s, "max_harmonic", cfg.synth.max_harmonic);
        take(s, "coupling", cfg.synth.coupling);
    }
    if (j.contains("vqvae")) {
        const json& s = j.at("vqvae");
        reject_unknown(s, {"codebook_size", "channels", "width", "downsample", "beta", "alpha1",
                           "alpha2", "squared_norms", "reset_dead_codes", "steps", "batch_size",
                           "lr", "adam_beta1", "adam_beta2", "velocity_steps", "velocity_lr"},
                       "vqvae.");
        take(s, "codebook_size", cfg.vqvae.codebook_size);
        take(s, "channels", cfg.vqvae.channels);
        take(s, "width", cfg.vqvae.width);
        take(s, "downsample", cfg.vqvae.downsample);
        take(s, "beta", cfg.vqvae.beta);
        take(s, "alpha1", cfg.vqvae.alpha1);
        take(s, "alpha2", cfg.vqvae.alpha2);
        take(s, "squared_norms", cfg.vqvae.squared_norms);
        take(s, "reset_dead_codes", cfg.vqvae.reset_dead_codes);
        take(s, "steps", cfg.vqvae.steps);
        take(s, "batch_size", cfg.vqvae.batch_size);
        take(s, "lr", cfg.vqvae.lr);
        take(s, "adam_beta1", cfg.vqvae.adam_beta1);
        take(s, "adam_beta2", cfg.vqvae.adam_beta2);
        take(s, "velocity_steps", cfg.vqvae.velocity_steps);
        take(s, "velocity_lr", cfg.vqvae.velocity_lr);
    }
    if (j.contains("gpt")) {
        const json& s = j.at("gpt");
        reject_unknown(s, {"layers", "heads", "channels", "dropout", "block_size", "steps",
                           "batch_size", "lr", "adam_beta1", "adam_beta2", "lr_decay_factor"},
                       "gpt.");
        take(s, "layers", cfg.gpt.layers);
        take(s, "heads", cfg.gpt.heads);
        take(s, "channels", cfg.gpt.channels);
        take(s, "dropout", cfg.gpt.dropout);
        take(s, "block_size", cfg.gpt.block_size);
        take(s, "steps", cfg.gpt.steps);
        take(s, "batch_size", cfg.gpt.batch_size);
        take(s, "lr", cfg.gpt.lr);
        take(s, "adam_beta1", cfg.gpt.adam_beta1);
        take(s, "adam_beta2", cfg.gpt.adam_beta2);
        take(s, "lr_decay_factor", cfg.gpt.lr_decay_factor);
    }
    if (j.contains("actor_critic")) {
        const json& s = j.at("actor_critic");
        reject_unknown(s, {"gamma_b", "gamma_c", "epochs", "batch_size", "lr", "adam_beta1",
                           "adam_beta2"},
                       "actor_critic.");
        take(s, "gamma_b", cfg.actor_critic.gamma_b);
        take(s, "gamma_c", cfg.actor_critic.gamma_c);
        take(s, "epochs", cfg.actor_critic.epochs);
        take(s, "batch_size", cfg.actor_critic.batch_size);
        take(s, "lr", cfg.actor_critic.lr);
        take(s, "adam_beta1", cfg.actor_critic.adam_beta1);
        take(s, "adam_beta2", cfg.actor_critic.adam_beta2);
    }
    if (j.contains("eval")) {
        const json& s = j.at("eval");
        reject_unknown(s, {"sigma", "scale_sigma_by_fps", "smooth_window", "min_gap_fraction"},
                       "eval.");
        take(s, "sigma", cfg.eval.sigma);
        take(s, "scale_sigma_by_fps", cfg.eval.scale_sigma_by_fps);
        take(s, "smooth_window", cfg.eval.smooth_window);
        take(s, "min_gap_fraction", cfg.eval.min_gap_fraction);
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_pipeline_config(text);
}

std::string config_to_json(const PipelineConfig& c) {
    json j;
    j["profile"] = c.profile;
    j["seed"] = c.seed;
    j["music_dim"] = c.music_dim;
    j["synth"] = {{"num_sequences", c.synth.num_sequences},
                  {"frames", c.synth.frames},
                  {"joints", c.synth.joints},
                  {"fps", c.synth.fps},
                  {"tempo_min_bpm", c.synth.tempo_min_bpm},
                  {"tempo_max_bpm", c.synth.tempo_max_bpm},
                  {"drift_speed", c.synth.drift_speed},
                  {"zero_drift", c.synth.zero_drift},
                  {"motion_beat_offset", c.synth.motion_beat_offset},
                  {"random_beat_phase", c.synth.random_beat_phase},
                  {"jitter_amplitude", c.synth.jitter_amplitude},
                  {"max_harmonic", c.synth.max_harmonic},
                  {"coupling", c.synth.coupling}};
    j["vqvae"] = {{"codebook_size", c.vqvae.codebook_size},
                  {"channels", c.vqvae.channels},
                  {"width", c.vqvae.width},
                  {"downsample", c.vqvae.downsample},
                  {"beta", c.vqvae.beta},
                  {"alpha1", c.vqvae.alpha1},
                  {"alpha2", c.vqvae.alpha2},
                  {"squared_norms", c.vqvae.squared_norms},
                  {"reset_dead_codes", c.vqvae.reset_dead_codes},
                  {"steps", c.vqvae.steps},
                  {"batch_size", c.vqvae.batch_size},
                  {"lr", c.vqvae.lr},
                  {"adam_beta1", c.vqvae.adam_beta1},
                  {"adam_beta2", c.vqvae.adam_beta2},
                  {"velocity_steps", c.vqvae.velocity_steps},
                  {"velocity_lr", c.vqvae.velocity_lr}};
    j["gpt"] = {{"layers", c.gpt.layers},
                {"heads", c.gpt.heads},
                {"channels", c.gpt.channels},
                {"dropout", c.gpt.dropout},
                {"block_size", c.gpt.block_size},
                {"steps", c.gpt.steps},
                {"batch_size", c.gpt.batch_size},
                {"lr", c.gpt.lr},
                {"adam_beta1", c.gpt.adam_beta1},
                {"adam_beta2", c.gpt.adam_beta2},
                {"lr_decay_factor", c.gpt.lr_decay_factor}};
    j["actor_critic"] = {{"gamma_b", c.actor_critic.gamma_b},
                         {"gamma_c", c.actor_critic.gamma_c},
                         {"epochs", c.actor_critic.epochs},
                         {"batch_size", c.actor_critic.batch_size},
                         {"lr", c.actor_critic.lr},
                         {"adam_beta1", c.actor_critic.adam_beta1},
                         {"adam_beta2", c.actor_critic.adam_beta2}};
    j["eval"] = {{"sigma", c.eval.sigma},
                 {"scale_sigma_by_fps", c.eval.scale_sigma_by_fps},
                 {"smooth_window", c.eval.smooth_window},
                 {"min_gap_fraction", c.eval.min_gap_fraction}};
    return j.dump(2);
}

std::string config_hash(const PipelineConfig& cfg) {
    std::string s = config_to_json(cfg);
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace choreo
