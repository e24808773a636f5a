#include "choreo/music.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace choreo {

void MusicFeatureTrack::validate() const {
    if (feature_dim <= 0 || fps <= 0.f) throw DataError("music: feature dim and fps must be positive");
    if (features.size() % static_cast<size_t>(feature_dim) != 0)
        throw DataError("music: payload not divisible by F");
    for (float v : features)
        if (!std::isfinite(v)) throw DataError("music: non-finite value");
    for (int64_t b : beats)
        if (b < 0 || b >= t()) throw DataError("music: beat index out of range");
    if (!std::is_sorted(beats.begin(), beats.end())) throw DataError("music: beats must be sorted");
    if (onset_channel >= feature_dim) throw DataError("music: onset channel out of range");
}

CodeStepFeatures downsample_features(const MusicFeatureTrack& track, int64_t d, PoolMode mode) {
    if (d < 1) throw ConfigError("downsample: d must be >= 1");
    const int64_t t_len = track.t(), f_dim = track.feature_dim;
    if (t_len < d) throw ConfigError("downsample: track shorter than one window");
    const int64_t t_out = t_len / d;
    CodeStepFeatures out;
    out.feature_dim = f_dim;
    out.step = d;
    out.features.assign(t_out * f_dim, 0.f);
    for (int64_t t = 0; t < t_out; ++t) {
        if (mode == PoolMode::stride) {
            std::copy_n(track.features.data() + t * d * f_dim, f_dim, out.features.begin() + t * f_dim);
        } else {
            for (int64_t k = 0; k < d; ++k)
                for (int64_t f = 0; f < f_dim; ++f)
                    out.features[t * f_dim + f] += track.features[(t * d + k) * f_dim + f];
            for (int64_t f = 0; f < f_dim; ++f) out.features[t * f_dim + f] /= static_cast<float>(d);
        }
    }
    return out;
}

bool step_has_beat(const std::vector<int64_t>& beats, int64_t step, int64_t d) {
    auto lo = std::lower_bound(beats.begin(), beats.end(), step * d);
    return lo != beats.end() && *lo < (step + 1) * d;
}

std::vector<int64_t> pick_beats_from_onset(const std::vector<float>& onset, int64_t min_gap,
                                           float threshold) {
    if (min_gap < 1) throw ConfigError("pick_beats: min_gap must be >= 1");
    const int64_t n = static_cast<int64_t>(onset.size());
    std::vector<int64_t> candidates;
    for (int64_t i = 0; i < n; ++i) {
        bool left_ok = (i == 0) || onset[i] > onset[i - 1];
        bool right_ok = (i + 1 == n) || onset[i] >= onset[i + 1];
        if (left_ok && right_ok && onset[i] > threshold) candidates.push_back(i);
    }
    // descending magnitude, lower index wins ties
    std::stable_sort(candidates.begin(), candidates.end(), [&](int64_t a, int64_t b) {
        if (onset[a] != onset[b]) return onset[a] > onset[b];
        return a < b;
    });
    std::vector<int64_t> picked;
    for (int64_t c : candidates) {
        bool ok = true;
        for (int64_t p : picked)
            if (std::llabs(p - c) < min_gap) {
                ok = false;
                break;
            }
        if (ok) picked.push_back(c);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

MusicFeatureTrack generate_synthetic_music(const SyntheticSequence& seq, int64_t feature_dim,
                                           uint64_t seed) {
    if (feature_dim < 1) throw ConfigError("synthetic music: feature dim must be >= 1");
    const int64_t t_len = seq.motion.t();
    RngEngine rng(seed);
    MusicFeatureTrack m;
    m.feature_dim = feature_dim;
    m.fps = seq.motion.fps;
    m.onset_channel = 0;
    m.beats = seq.beats;
    m.features.assign(t_len * feature_dim, 0.f);
    // smooth per-channel noise: random low-frequency cosines
    for (int64_t f = 1; f < feature_dim; ++f) {
        double a = uniform_real(rng, 0.2, 1.0);
        double w = uniform_real(rng, 0.02, 0.2);
        double ph = uniform_real(rng, 0.0, 6.283185307179586);
        for (int64_t t = 0; t < t_len; ++t)
            m.features[t * feature_dim + f] = static_cast<float>(a * std::cos(w * t + ph));
    }
    for (int64_t b : seq.beats) m.features[b * feature_dim + 0] = 1.f;
    return m;
}

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

void write_music(const std::string& path, const MusicFeatureTrack& m) {
    m.validate();
    std::string buf;
    buf.reserve(24 + m.features.size() * 4);
    buf += "MFEA";
    put_u32(buf, 1u);
    put_u32(buf, static_cast<uint32_t>(m.t()));
    put_u32(buf, static_cast<uint32_t>(m.feature_dim));
    uint32_t fps_bits;
    std::memcpy(&fps_bits, &m.fps, 4);
    put_u32(buf, fps_bits);
    put_u32(buf, static_cast<uint32_t>(m.onset_channel));
    for (float v : m.features) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(buf, bits);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("write failed: " + path);
}

MusicFeatureTrack read_music(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (buf.size() < 24)
        throw DataError(path + ": truncated header at byte offset " + std::to_string(buf.size()));
    if (std::memcmp(p, "MFEA", 4) != 0) throw DataError(path + ": bad magic at byte offset 0");
    uint32_t version = get_u32(p + 4);
    if (version != 1) throw DataError(path + ": unsupported version " + std::to_string(version));
    uint32_t t_len = get_u32(p + 8), f_dim = get_u32(p + 12);
    MusicFeatureTrack out;
    uint32_t fps_bits = get_u32(p + 16);
    std::memcpy(&out.fps, &fps_bits, 4);
    out.onset_channel = static_cast<int32_t>(get_u32(p + 20));
    out.feature_dim = f_dim;
    size_t expect = static_cast<size_t>(t_len) * f_dim;
    if (buf.size() != 24 + expect * 4)
        throw DataError(path + ": payload size mismatch (header T=" + std::to_string(t_len) +
                        " F=" + std::to_string(f_dim) + " expects " + std::to_string(24 + expect * 4) +
                        " bytes, file has " + std::to_string(buf.size()) + ")");
    out.features.resize(expect);
    for (size_t i = 0; i < expect; ++i) {
        uint32_t bits = get_u32(p + 24 + i * 4);
        std::memcpy(&out.features[i], &bits, 4);
    }
    out.validate();
    return out;
}

}  // namespace choreo
