// Seeded RNG helpers. Distributions are hand-rolled on top of mt19937_64 so
// streams are identical across standard libraries and reruns.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace choreo {

using RngEngine = std::mt19937_64;

inline double uniform_real(RngEngine& rng, double lo = 0.0, double hi = 1.0) {
    // 53-bit mantissa construction, same as the canonical MT19937-64 recipe
    uint64_t u = rng() >> 11;
    return lo + (hi - lo) * (static_cast<double>(u) * (1.0 / 9007199254740992.0));
}

inline double normal_real(RngEngine& rng, double mean = 0.0, double stddev = 1.0) {
    // Box-Muller, one value per call (no cached spare, keeps state trivial)
    double u1 = uniform_real(rng);
    double u2 = uniform_real(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline int64_t uniform_int(RngEngine& rng, int64_t lo, int64_t hi_inclusive) {
    uint64_t span = static_cast<uint64_t>(hi_inclusive - lo) + 1;
    // modulo bias is irrelevant at the corpus sizes used here
    return lo + static_cast<int64_t>(rng() % span);
}

template <typename T>
void shuffle_indices(std::vector<T>& v, RngEngine& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

// Fresh engine for one training step, derived from (seed, step, salt) so a
// resumed run replays the identical stream without serializing rng state.
inline RngEngine step_rng(uint64_t seed, uint64_t step, uint64_t salt = 0) {
    uint64_t mixed = seed;
    mixed ^= 0x9E3779B97F4A7C15ULL * (step + 1);
    mixed ^= 0xBF58476D1CE4E5B9ULL * (salt + 1);
    RngEngine r(mixed);
    r.discard(8);
    return r;
}

// k distinct draws from [0, n); deterministic partial Fisher-Yates.
inline std::vector<size_t> sample_distinct(size_t n, size_t k, RngEngine& rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    k = std::min(k, n);
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(rng() % (n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

inline std::string rng_state_to_string(const RngEngine& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline void rng_state_from_string(RngEngine& rng, const std::string& s) {
    std::istringstream is(s);
    is >> rng;
}

}  // namespace choreo
