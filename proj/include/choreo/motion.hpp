// Motion sequences: representation, root normalization, temporal derivatives,
// half-body split/merge, file I/O, and the procedural synthetic corpus with
// known ground-truth beats.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "choreo/core.hpp"
#include "choreo/rng.hpp"

namespace choreo {

struct MotionSequence {
    std::vector<float> frames;  // T * J * 3, row-major
    int64_t joints = 0;
    float fps = 0.f;
    std::string skeleton_id;

    int64_t t() const { return joints == 0 ? 0 : static_cast<int64_t>(frames.size()) / (joints * 3); }
    float& at(int64_t frame, int64_t joint, int64_t axis) {
        return frames[(frame * joints + joint) * 3 + axis];
    }
    float at(int64_t frame, int64_t joint, int64_t axis) const {
        return frames[(frame * joints + joint) * 3 + axis];
    }
    void validate() const;
};

// Root displacement per frame: rows t = root(t+1) - root(t), T-1 rows.
struct GlobalVelocity {
    std::vector<float> values;  // (T-1) * 3
    int64_t rows() const { return static_cast<int64_t>(values.size()) / 3; }
};

struct HalfBodySplit {
    std::vector<int> upper;
    std::vector<int> lower;
    int root_index = 0;
    void validate(int64_t total_joints) const;
};

// SMPL 24-joint ordering; the lower body holds the root as the velocity
// branch requires.
HalfBodySplit default_smpl_split();
// Joint indices used by reward normals and geometric templates (SMPL order).
struct SkeletonRefs {
    int pelvis = 0, l_hip = 1, r_hip = 2, spine1 = 3, neck = 12, head = 15;
    int l_shoulder = 16, r_shoulder = 17, l_elbow = 18, r_elbow = 19;
    int l_wrist = 20, r_wrist = 21;
    int l_knee = 4, r_knee = 5, l_ankle = 7, r_ankle = 8, l_foot = 10, r_foot = 11;
};

struct SyntheticCorpusSpec {
    int num_sequences = 16;
    int64_t frames = 64;
    int64_t joints = 24;
    float fps = 30.f;
    float tempo_min_bpm = 90.f;
    float tempo_max_bpm = 150.f;
    uint64_t seed = 1;
    float drift_speed = 0.003f;  // root path speed, length units per frame
    bool zero_drift = false;
    // per-frame measurement noise on every coordinate; gives the corpus a
    // mocap-like jitter floor (default off)
    float jitter_amplitude = 0.f;
    // harmonics cycle 1..max_harmonic across channels; 1 gives the slowest,
    // smoothest motion
    int max_harmonic = 3;
    // shifts the motion's speed minima to k*tau + offset while the stored
    // beat annotations stay on the k*tau grid; a nonzero value builds the
    // deliberately misaligned corpus used to pretrain before finetuning
    int64_t motion_beat_offset = 0;
    // draws a per-sequence phase in [0, tau) for the beat grid, so beat
    // placement cannot be read off absolute positions
    bool random_beat_phase = false;
    // echo: the upper body repeats the lower body's previous-interval move
    // intensity, so upper prediction genuinely needs lower-body history
    enum class Coupling { independent, echo } coupling = Coupling::independent;
};

struct SyntheticSequence {
    MotionSequence motion;
    std::vector<int64_t> beats;  // frame indices, ground truth
    int64_t beat_period = 0;     // frames per beat
};

std::vector<SyntheticSequence> generate_synthetic(const SyntheticCorpusSpec& spec);

// Sets the root joint to the origin at every frame by subtracting the root
// trajectory from all joints; the returned velocity reconstructs the original
// root by prefix sum from its initial position.
std::pair<MotionSequence, GlobalVelocity> normalize_root(const MotionSequence& p, int root_index);

// Prefix-sums velocity rows from `origin`; returns T*3 root positions where
// T = velocity rows + 1.
std::vector<float> integrate_velocity(const GlobalVelocity& v, const float origin[3]);

// Adds a root trajectory (T*3) onto every joint of a root-relative sequence.
MotionSequence apply_root_trajectory(const MotionSequence& p, const std::vector<float>& root);

// First and second forward differences of a [T x D] track; lengths T-1, T-2.
std::pair<std::vector<float>, std::vector<float>> derivatives(const std::vector<float>& track,
                                                              int64_t width);

std::pair<MotionSequence, MotionSequence> split_half_bodies(const MotionSequence& p,
                                                            const HalfBodySplit& split);
MotionSequence merge_half_bodies(const MotionSequence& upper, const MotionSequence& lower,
                                 const HalfBodySplit& split);

// Mean joint speed per frame (T-1 values), the envelope dance beats live on.
std::vector<float> mean_speed_envelope(const MotionSequence& p);

// .motn format: 24-byte header {magic "MOTN", version u32, T u32, J u32,
// fps f32, reserved u32}, then T*J*3 little-endian f32.
void write_motion(const std::string& path, const MotionSequence& p);
MotionSequence read_motion(const std::string& path);

// Beat sidecar: a JSON array of frame indices, shared schema with music.
void write_beats(const std::string& path, const std::vector<int64_t>& beats);
std::vector<int64_t> read_beats(const std::string& path);

}  // namespace choreo
