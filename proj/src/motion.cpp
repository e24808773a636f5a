#include "choreo/motion.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace choreo {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Approximate T-pose offsets in SMPL joint order, y up, x to the character's
// left, z forward. Dimensionless normalized lengths.
const float kSmplBase[24][3] = {
    {0.00f, 0.00f, 0.00f},    // pelvis
    {0.10f, -0.08f, 0.00f},   // l_hip
    {-0.10f, -0.08f, 0.00f},  // r_hip
    {0.00f, 0.12f, 0.00f},    // spine1
    {0.11f, -0.50f, 0.00f},   // l_knee
    {-0.11f, -0.50f, 0.00f},  // r_knee
    {0.00f, 0.25f, 0.00f},    // spine2
    {0.12f, -0.90f, 0.00f},   // l_ankle
    {-0.12f, -0.90f, 0.00f},  // r_ankle
    {0.00f, 0.35f, 0.00f},    // spine3
    {0.13f, -0.95f, 0.12f},   // l_foot
    {-0.13f, -0.95f, 0.12f},  // r_foot
    {0.00f, 0.55f, 0.00f},    // neck
    {0.07f, 0.45f, 0.00f},    // l_collar
    {-0.07f, 0.45f, 0.00f},   // r_collar
    {0.00f, 0.65f, 0.00f},    // head
    {0.18f, 0.45f, 0.00f},    // l_shoulder
    {-0.18f, 0.45f, 0.00f},   // r_shoulder
    {0.45f, 0.45f, 0.00f},    // l_elbow
    {-0.45f, 0.45f, 0.00f},   // r_elbow
    {0.70f, 0.45f, 0.00f},    // l_wrist
    {-0.70f, 0.45f, 0.00f},   // r_wrist
    {0.80f, 0.45f, 0.00f},    // l_hand
    {-0.80f, 0.45f, 0.00f},   // r_hand
};

// Time warp whose derivative is (2/tau) sin^2(pi t / tau): increases by one
// per beat interval and has zero slope exactly on the beat grid.
double beat_phase(double t, double tau) {
    return t / tau - std::sin(2.0 * kPi * t / tau) / (2.0 * kPi);
}
}  // namespace

void MotionSequence::validate() const {
    if (joints <= 0 || fps <= 0.f) throw DataError("motion: joints and fps must be positive");
    if (frames.size() % static_cast<size_t>(joints * 3) != 0)
        throw DataError("motion: frame payload not divisible by J*3");
    if (t() < 2) throw DataError("motion: need at least 2 frames");
    for (float v : frames)
        if (!std::isfinite(v)) throw DataError("motion: non-finite value");
}

void HalfBodySplit::validate(int64_t total_joints) const {
    std::vector<char> seen(total_joints, 0);
    auto mark = [&](const std::vector<int>& idx) {
        for (int j : idx) {
            if (j < 0 || j >= total_joints) throw ConfigError("half-body split: joint index out of range");
            if (seen[j]) throw ConfigError("half-body split: joint listed twice");
            seen[j] = 1;
        }
    };
    mark(upper);
    mark(lower);
    for (int64_t j = 0; j < total_joints; ++j)
        if (!seen[j]) throw ConfigError("half-body split: joint " + std::to_string(j) + " unassigned");
    if (std::find(lower.begin(), lower.end(), root_index) == lower.end())
        throw ConfigError("half-body split: root must belong to the lower body");
}

HalfBodySplit default_smpl_split() {
    HalfBodySplit s;
    s.lower = {0, 1, 2, 3, 4, 5, 7, 8, 10, 11};
    for (int j = 0; j < 24; ++j)
        if (std::find(s.lower.begin(), s.lower.end(), j) == s.lower.end()) s.upper.push_back(j);
    s.root_index = 0;
    return s;
}

std::pair<MotionSequence, GlobalVelocity> normalize_root(const MotionSequence& p, int root_index) {
    if (root_index < 0 || root_index >= p.joints) throw ConfigError("normalize_root: bad root index");
    const int64_t t_len = p.t();
    MotionSequence out = p;
    GlobalVelocity vel;
    vel.values.resize((t_len - 1) * 3);
    for (int64_t t = 0; t < t_len; ++t) {
        float rx = p.at(t, root_index, 0), ry = p.at(t, root_index, 1), rz = p.at(t, root_index, 2);
        for (int64_t j = 0; j < p.joints; ++j) {
            out.at(t, j, 0) -= rx;
            out.at(t, j, 1) -= ry;
            out.at(t, j, 2) -= rz;
        }
        if (t + 1 < t_len)
            for (int c = 0; c < 3; ++c)
                vel.values[t * 3 + c] = p.at(t + 1, root_index, c) - p.at(t, root_index, c);
    }
    return {std::move(out), std::move(vel)};
}

std::vector<float> integrate_velocity(const GlobalVelocity& v, const float origin[3]) {
    const int64_t rows = v.rows();
    std::vector<float> out((rows + 1) * 3);
    out[0] = origin[0];
    out[1] = origin[1];
    out[2] = origin[2];
    for (int64_t t = 0; t < rows; ++t)
        for (int c = 0; c < 3; ++c) out[(t + 1) * 3 + c] = out[t * 3 + c] + v.values[t * 3 + c];
    return out;
}

MotionSequence apply_root_trajectory(const MotionSequence& p, const std::vector<float>& root) {
    if (static_cast<int64_t>(root.size()) != p.t() * 3)
        throw ConfigError("apply_root_trajectory: trajectory length mismatch");
    MotionSequence out = p;
    for (int64_t t = 0; t < p.t(); ++t)
        for (int64_t j = 0; j < p.joints; ++j)
            for (int c = 0; c < 3; ++c) out.at(t, j, c) += root[t * 3 + c];
    return out;
}

std::pair<std::vector<float>, std::vector<float>> derivatives(const std::vector<float>& track,
                                                              int64_t width) {
    const int64_t t_len = static_cast<int64_t>(track.size()) / width;
    if (t_len < 3) throw DataError("derivatives: need at least 3 frames");
    std::vector<float> d1((t_len - 1) * width), d2((t_len - 2) * width);
    for (int64_t t = 0; t + 1 < t_len; ++t)
        for (int64_t i = 0; i < width; ++i)
            d1[t * width + i] = track[(t + 1) * width + i] - track[t * width + i];
    for (int64_t t = 0; t + 2 < t_len; ++t)
        for (int64_t i = 0; i < width; ++i)
            d2[t * width + i] = d1[(t + 1) * width + i] - d1[t * width + i];
    return {std::move(d1), std::move(d2)};
}

std::pair<MotionSequence, MotionSequence> split_half_bodies(const MotionSequence& p,
                                                            const HalfBodySplit& split) {
    split.validate(p.joints);
    auto take = [&](const std::vector<int>& idx) {
        MotionSequence h;
        h.joints = static_cast<int64_t>(idx.size());
        h.fps = p.fps;
        h.skeleton_id = p.skeleton_id;
        h.frames.resize(p.t() * h.joints * 3);
        for (int64_t t = 0; t < p.t(); ++t)
            for (size_t k = 0; k < idx.size(); ++k)
                for (int c = 0; c < 3; ++c) h.at(t, static_cast<int64_t>(k), c) = p.at(t, idx[k], c);
        return h;
    };
    return {take(split.upper), take(split.lower)};
}

MotionSequence merge_half_bodies(const MotionSequence& upper, const MotionSequence& lower,
                                 const HalfBodySplit& split) {
    if (upper.t() != lower.t()) throw DataError("merge: frame counts differ");
    MotionSequence out;
    out.joints = static_cast<int64_t>(split.upper.size() + split.lower.size());
    out.fps = lower.fps;
    out.skeleton_id = lower.skeleton_id;
    out.frames.assign(upper.t() * out.joints * 3, 0.f);
    for (int64_t t = 0; t < upper.t(); ++t) {
        for (size_t k = 0; k < split.upper.size(); ++k)
            for (int c = 0; c < 3; ++c)
                out.at(t, split.upper[k], c) = upper.at(t, static_cast<int64_t>(k), c);
        for (size_t k = 0; k < split.lower.size(); ++k)
            for (int c = 0; c < 3; ++c)
                out.at(t, split.lower[k], c) = lower.at(t, static_cast<int64_t>(k), c);
    }
    return out;
}

std::vector<float> mean_speed_envelope(const MotionSequence& p) {
    const int64_t t_len = p.t();
    std::vector<float> env(t_len - 1, 0.f);
    for (int64_t t = 0; t + 1 < t_len; ++t) {
        double acc = 0;
        for (int64_t j = 0; j < p.joints; ++j) {
            double dx = p.at(t + 1, j, 0) - p.at(t, j, 0);
            double dy = p.at(t + 1, j, 1) - p.at(t, j, 1);
            double dz = p.at(t + 1, j, 2) - p.at(t, j, 2);
            acc += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
        env[t] = static_cast<float>(acc / static_cast<double>(p.joints));
    }
    return env;
}

std::vector<SyntheticSequence> generate_synthetic(const SyntheticCorpusSpec& spec) {
    if (spec.num_sequences < 0 || spec.joints < 1 || spec.frames < 2 || spec.fps <= 0)
        throw ConfigError("synthetic corpus: bad spec");
    if (spec.tempo_min_bpm <= 0 || spec.tempo_max_bpm < spec.tempo_min_bpm)
        throw ConfigError("synthetic corpus: bad tempo range");
    RngEngine rng(spec.seed);
    // integer beat periods inside the tempo range
    int64_t tau_min = static_cast<int64_t>(std::ceil(spec.fps * 60.f / spec.tempo_max_bpm));
    int64_t tau_max = static_cast<int64_t>(std::floor(spec.fps * 60.f / spec.tempo_min_bpm));
    tau_min = std::max<int64_t>(tau_min, 4);
    if (tau_max < tau_min) tau_max = tau_min;

    std::vector<SyntheticSequence> corpus;
    corpus.reserve(spec.num_sequences);
    for (int s = 0; s < spec.num_sequences; ++s) {
        int64_t tau = (spec.coupling == SyntheticCorpusSpec::Coupling::echo)
                          ? (tau_min + tau_max) / 2
                          : uniform_int(rng, tau_min, tau_max);
        int64_t phase = spec.random_beat_phase ? uniform_int(rng, 0, tau - 1) : 0;
        const int64_t t_len = spec.frames;
        const int64_t j_n = spec.joints;
        const int64_t intervals = (t_len + tau - 1) / tau;

        std::vector<float> amp(j_n * 3);
        std::vector<int> harm(j_n * 3);
        for (int64_t i = 0; i < j_n * 3; ++i) {
            amp[i] = static_cast<float>(uniform_real(rng, 0.1, 0.5));
            harm[i] = 1 + static_cast<int>(i % std::max(1, spec.max_harmonic));
            // mixed harmonics avoid a common mid-interval stop
        }
        for (int c = 0; c < 3; ++c) amp[c] = 0.f;  // root carries only the drift path

        // per-interval intensity per half body; echo repeats the lower line
        // one interval later on the upper body
        std::vector<float> inten_lower(intervals, 1.f), inten_upper(intervals, 1.f);
        if (spec.coupling == SyntheticCorpusSpec::Coupling::echo) {
            for (int64_t k = 0; k < intervals; ++k) inten_lower[k] = (rng() & 1) ? 1.f : 0.35f;
            for (int64_t k = 1; k < intervals; ++k) inten_upper[k] = inten_lower[k - 1];
        }

        HalfBodySplit split;
        if (j_n == 24) {
            split = default_smpl_split();
        } else {
            for (int j = 0; j < static_cast<int>(j_n); ++j)
                (j < static_cast<int>((j_n + 1) / 2) ? split.lower : split.upper).push_back(j);
            split.root_index = 0;
        }
        std::vector<char> is_upper(j_n, 0);
        for (int j : split.upper) is_upper[j] = 1;

        // slow circular root path in the x-z plane
        double drift_omega = 2.0 * kPi / (8.0 * static_cast<double>(tau));
        double drift_r = spec.zero_drift ? 0.0 : spec.drift_speed / drift_omega;
        double drift_phase = uniform_real(rng, 0.0, 2.0 * kPi);

        std::vector<float> jitter;
        if (spec.jitter_amplitude > 0.f) {
            jitter.resize(t_len * j_n * 3);
            for (auto& v : jitter)
                v = static_cast<float>(spec.jitter_amplitude * normal_real(rng));
        }

        SyntheticSequence seq;
        seq.beat_period = tau;
        seq.motion.joints = j_n;
        seq.motion.fps = spec.fps;
        seq.motion.skeleton_id = (j_n == 24) ? "smpl24" : ("joints" + std::to_string(j_n));
        seq.motion.frames.resize(t_len * j_n * 3);
        for (int64_t t = 0; t < t_len; ++t) {
            double ts = static_cast<double>(t - phase - spec.motion_beat_offset);
            double psi = beat_phase(ts, static_cast<double>(tau));
            int64_t k = static_cast<int64_t>(std::floor(ts / static_cast<double>(tau)));
            k = std::clamp<int64_t>(k, 0, intervals - 1);
            double u = psi - static_cast<double>(k);  // in [0, 1] inside interval k
            double gx = drift_r * std::sin(drift_omega * t + drift_phase);
            double gz = drift_r * std::cos(drift_omega * t + drift_phase);
            for (int64_t j = 0; j < j_n; ++j) {
                float inten = is_upper[j] ? inten_upper[k] : inten_lower[k];
                for (int c = 0; c < 3; ++c) {
                    int64_t ch = j * 3 + c;
                    double base = (j_n == 24) ? kSmplBase[j][c]
                                              : 0.3 * std::cos(2.0 * kPi * static_cast<double>(ch) /
                                                               static_cast<double>(j_n * 3));
                    double move = amp[ch] * inten * std::sin(2.0 * kPi * harm[ch] * u);
                    double v = base + move;
                    if (c == 0) v += gx;
                    if (c == 2) v += gz;
                    if (!jitter.empty()) v += jitter[(t * j_n + j) * 3 + c];
                    seq.motion.at(t, j, c) = static_cast<float>(v);
                }
            }
        }
        // stop at T-3: a beat needs an interior speed-envelope neighborhood
        for (int64_t b = phase == 0 ? tau : phase; b <= t_len - 3; b += tau)
            if (b >= 2) seq.beats.push_back(b);
        corpus.push_back(std::move(seq));
    }
    return corpus;
}

// --------------------------------------------------------------------------
// file I/O
// --------------------------------------------------------------------------

namespace {
void put_u32(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}
uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
}  // namespace

void write_motion(const std::string& path, const MotionSequence& p) {
    p.validate();
    std::string buf;
    buf.reserve(24 + p.frames.size() * 4);
    buf += "MOTN";
    put_u32(buf, 1u);
    put_u32(buf, static_cast<uint32_t>(p.t()));
    put_u32(buf, static_cast<uint32_t>(p.joints));
    uint32_t fps_bits;
    std::memcpy(&fps_bits, &p.fps, 4);
    put_u32(buf, fps_bits);
    put_u32(buf, 0u);  // reserved
    for (float v : p.frames) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(buf, bits);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("write failed: " + path);
}

MotionSequence read_motion(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (buf.size() < 24)
        throw DataError(path + ": truncated header at byte offset " + std::to_string(buf.size()));
    if (std::memcmp(p, "MOTN", 4) != 0) throw DataError(path + ": bad magic at byte offset 0");
    uint32_t version = get_u32(p + 4);
    if (version != 1) throw DataError(path + ": unsupported version " + std::to_string(version));
    uint32_t t_len = get_u32(p + 8), j_n = get_u32(p + 12);
    MotionSequence out;
    uint32_t fps_bits = get_u32(p + 16);
    std::memcpy(&out.fps, &fps_bits, 4);
    out.joints = j_n;
    size_t expect = static_cast<size_t>(t_len) * j_n * 3;
    if (buf.size() != 24 + expect * 4)
        throw DataError(path + ": payload size mismatch (header T=" + std::to_string(t_len) +
                        " J=" + std::to_string(j_n) + " expects " + std::to_string(24 + expect * 4) +
                        " bytes, file has " + std::to_string(buf.size()) + "); first bad byte offset " +
                        std::to_string(std::min(buf.size(), 24 + expect * 4)));
    out.frames.resize(expect);
    for (size_t i = 0; i < expect; ++i) {
        uint32_t bits = get_u32(p + 24 + i * 4);
        std::memcpy(&out.frames[i], &bits, 4);
    }
    out.skeleton_id = (j_n == 24) ? "smpl24" : ("joints" + std::to_string(j_n));
    out.validate();
    return out;
}

void write_beats(const std::string& path, const std::vector<int64_t>& beats) {
    nlohmann::json j = beats;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump() << "\n";
}

std::vector<int64_t> read_beats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": beat sidecar parse error: " + e.what());
    }
    if (!j.is_array()) throw DataError(path + ": beat sidecar must be a JSON array");
    std::vector<int64_t> out;
    for (const auto& v : j) out.push_back(v.get<int64_t>());
    if (!std::is_sorted(out.begin(), out.end())) throw DataError(path + ": beats must be sorted");
    return out;
}

}  // namespace choreo
