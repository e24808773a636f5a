// Per-frame music feature tracks: ingestion, code-step alignment, onset-peak
// beat picking, and the synthetic generator paired with the motion corpus.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "choreo/motion.hpp"

namespace choreo {

struct MusicFeatureTrack {
    std::vector<float> features;  // T * F
    int64_t feature_dim = 0;
    float fps = 0.f;
    std::vector<int64_t> beats;  // sorted frame indices
    int onset_channel = -1;      // -1 if absent

    int64_t t() const { return feature_dim == 0 ? 0 : static_cast<int64_t>(features.size()) / feature_dim; }
    float at(int64_t frame, int64_t f) const { return features[frame * feature_dim + f]; }
    void validate() const;
};

// Features pooled onto the code-step timeline (d motion frames per step).
struct CodeStepFeatures {
    std::vector<float> features;  // T' * F
    int64_t feature_dim = 0;
    int64_t step = 1;  // d
    int64_t rows() const { return feature_dim == 0 ? 0 : static_cast<int64_t>(features.size()) / feature_dim; }
};

enum class PoolMode { mean, stride };

// Window t covers frames [t*d, (t+1)*d); trailing partial windows are dropped.
CodeStepFeatures downsample_features(const MusicFeatureTrack& track, int64_t d, PoolMode mode);

// True iff some beat falls in [step*d, (step+1)*d); the music-beat test used
// by the beat-align reward.
bool step_has_beat(const std::vector<int64_t>& beats, int64_t step, int64_t d);

// Local maxima above threshold, greedily kept by descending magnitude with a
// minimum spacing; equal peaks keep the lower index.
std::vector<int64_t> pick_beats_from_onset(const std::vector<float>& onset, int64_t min_gap,
                                           float threshold);

// Smooth noise plus an impulse train on the onset channel at the paired
// motion sequence's ground-truth beats.
MusicFeatureTrack generate_synthetic_music(const SyntheticSequence& seq, int64_t feature_dim,
                                           uint64_t seed);

// .mfeat format: 24-byte header {magic "MFEA", version u32, T u32, F u32,
// fps f32, onset_channel i32}, then T*F little-endian f32.
void write_music(const std::string& path, const MusicFeatureTrack& m);
MusicFeatureTrack read_music(const std::string& path);

}  // namespace choreo
