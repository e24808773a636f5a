// Evaluation metrics: kinetic and geometric motion features, Fréchet distance
// between fitted Gaussians, diversity, dance-beat extraction, beat alignment.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "choreo/motion.hpp"

namespace choreo {

struct GaussianStats {
    std::vector<double> mean;  // D
    std::vector<double> cov;   // D x D, symmetric
    int64_t dim = 0;
};

// Per joint: mean speed, mean squared speed (kinetic energy proxy), mean
// acceleration magnitude; grouped per joint -> 3*J values. Translation of the
// whole sequence leaves them unchanged.
std::vector<float> kinetic_features(const MotionSequence& p);

struct GeometricConfig {
    SkeletonRefs refs;
    float hands_together_dist = 0.15f;
    float feet_apart_dist = 0.35f;
    float lean_forward_z = 0.10f;
    float behind_back_z = 0.05f;
    float crouch_height = 0.45f;
};

// 16 relational pose templates, each a per-frame boolean averaged over time.
// Requires the SMPL-24 joint set (or a skeleton providing the named joints).
std::vector<float> geometric_features(const MotionSequence& p, const GeometricConfig& cfg = {});
std::vector<std::string> geometric_feature_names();

GaussianStats fit_gaussian(const std::vector<std::vector<float>>& features);

// Frechet distance between Gaussians: |mu_a - mu_b|^2 + Tr(Sa + Sb - 2(Sa Sb)^(1/2)).
// Matrix square roots via symmetric eigendecomposition; eigenvalues below
// -psd_tolerance raise, small negatives clamp to zero.
double frechet_distance(const GaussianStats& a, const GaussianStats& b,
                        double psd_tolerance = 1e-4);

// Mean Euclidean distance over all unordered distinct pairs. n < 2 raises.
double diversity(const std::vector<std::vector<float>>& features);

// Local minima of the smoothed mean joint-speed envelope, min_gap apart,
// deepest first, ties to the earliest frame.
std::vector<int64_t> extract_dance_beats(const MotionSequence& p, int smooth_window = 5,
                                         int64_t min_gap = 0);

// Eq-style kernel score in (0,1]: mean over music beats of
// exp(-min_d ||t_d - t_m||^2 / (2 sigma^2)). Empty dance beats score 0;
// empty music beats raise.
double beat_align_score(const std::vector<int64_t>& dance_beats,
                        const std::vector<int64_t>& music_beats, double sigma_frames);

struct EvalConfig {
    double sigma = 3.0;          // in frames at 60 fps
    bool scale_sigma_by_fps = true;  // sigma_frames = sigma * fps / 60
    int smooth_window = 5;
    double min_gap_fraction = 0.25;  // of fps
    GeometricConfig geometric;
    double sigma_frames(float fps) const { return scale_sigma_by_fps ? sigma * fps / 60.0 : sigma; }
};

struct EvalReport {
    double fid_k = 0, fid_g = 0, div_k = 0, div_g = 0, bas = 0;
    int64_t n_generated = 0, n_reference = 0;
    std::string config_hash;
    std::vector<double> per_sequence_bas;
};

// Full metric suite; music beats are paired per generated sequence.
EvalReport evaluate_suite(const std::vector<MotionSequence>& generated,
                          const std::vector<std::vector<int64_t>>& generated_music_beats,
                          const std::vector<MotionSequence>& reference, const EvalConfig& cfg = {});

std::string eval_report_to_json(const EvalReport& r);

}  // namespace choreo
