#include "choreo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace choreo {

std::vector<float> kinetic_features(const MotionSequence& p) {
    const int64_t t_len = p.t(), j_n = p.joints;
    if (t_len < 3) throw DataError("kinetic_features: need at least 3 frames");
    std::vector<float> out(3 * j_n, 0.f);
    for (int64_t j = 0; j < j_n; ++j) {
        double speed = 0, energy = 0, acc = 0;
        double prev_vx = 0, prev_vy = 0, prev_vz = 0;
        for (int64_t t = 0; t + 1 < t_len; ++t) {
            double vx = p.at(t + 1, j, 0) - p.at(t, j, 0);
            double vy = p.at(t + 1, j, 1) - p.at(t, j, 1);
            double vz = p.at(t + 1, j, 2) - p.at(t, j, 2);
            double s2 = vx * vx + vy * vy + vz * vz;
            speed += std::sqrt(s2);
            energy += s2;
            if (t > 0) {
                double ax = vx - prev_vx, ay = vy - prev_vy, az = vz - prev_vz;
                acc += std::sqrt(ax * ax + ay * ay + az * az);
            }
            prev_vx = vx;
            prev_vy = vy;
            prev_vz = vz;
        }
        out[j * 3 + 0] = static_cast<float>(speed / static_cast<double>(t_len - 1));
        out[j * 3 + 1] = static_cast<float>(energy / static_cast<double>(t_len - 1));
        out[j * 3 + 2] = static_cast<float>(acc / static_cast<double>(t_len - 2));
    }
    return out;
}

std::vector<std::string> geometric_feature_names() {
    return {"l_hand_above_head", "r_hand_above_head", "l_foot_front",      "r_foot_front",
            "hands_together",    "feet_apart",        "l_elbow_bent",      "r_elbow_bent",
            "l_knee_bent",       "r_knee_bent",       "l_hand_above_shoulder",
            "r_hand_above_shoulder", "lean_forward",  "l_hand_behind_back",
            "r_hand_behind_back", "crouch"};
}

namespace {
struct V3 {
    double x, y, z;
};
V3 joint(const MotionSequence& p, int64_t t, int j) {
    return {p.at(t, j, 0), p.at(t, j, 1), p.at(t, j, 2)};
}
V3 operator-(V3 a, V3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
double dot(V3 a, V3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(V3 a) { return std::sqrt(dot(a, a)); }
}  // namespace

std::vector<float> geometric_features(const MotionSequence& p, const GeometricConfig& cfg) {
    const auto& r = cfg.refs;
    int max_idx = std::max({r.pelvis, r.neck, r.head, r.l_shoulder, r.r_shoulder, r.l_elbow,
                            r.r_elbow, r.l_wrist, r.r_wrist, r.l_hip, r.r_hip, r.l_knee, r.r_knee,
                            r.l_ankle, r.r_ankle, r.l_foot, r.r_foot});
    if (p.joints <= max_idx)
        throw ConfigError("geometric_features: skeleton lacks required joints (J=" +
                          std::to_string(p.joints) + ")");
    const int64_t t_len = p.t();
    std::vector<double> acc(16, 0.0);
    for (int64_t t = 0; t < t_len; ++t) {
        V3 pelvis = joint(p, t, r.pelvis), neck = joint(p, t, r.neck), head = joint(p, t, r.head);
        V3 lw = joint(p, t, r.l_wrist), rw = joint(p, t, r.r_wrist);
        V3 ls = joint(p, t, r.l_shoulder), rs = joint(p, t, r.r_shoulder);
        V3 le = joint(p, t, r.l_elbow), re = joint(p, t, r.r_elbow);
        V3 lh = joint(p, t, r.l_hip), rh = joint(p, t, r.r_hip);
        V3 lk = joint(p, t, r.l_knee), rk = joint(p, t, r.r_knee);
        V3 la = joint(p, t, r.l_ankle), ra = joint(p, t, r.r_ankle);
        V3 lf = joint(p, t, r.l_foot), rf = joint(p, t, r.r_foot);

        bool b[16];
        b[0] = lw.y > head.y;
        b[1] = rw.y > head.y;
        b[2] = lf.z > pelvis.z;
        b[3] = rf.z > pelvis.z;
        b[4] = norm(lw - rw) < cfg.hands_together_dist;
        b[5] = norm(la - ra) > cfg.feet_apart_dist;
        b[6] = dot(ls - le, lw - le) > 0;  // elbow angle < 90 deg
        b[7] = dot(rs - re, rw - re) > 0;
        b[8] = dot(lh - lk, la - lk) > 0;  // knee angle < 90 deg
        b[9] = dot(rh - rk, ra - rk) > 0;
        b[10] = lw.y > ls.y;
        b[11] = rw.y > rs.y;
        b[12] = neck.z - pelvis.z > cfg.lean_forward_z;
        b[13] = lw.z < pelvis.z - cfg.behind_back_z;
        b[14] = rw.z < pelvis.z - cfg.behind_back_z;
        b[15] = neck.y - pelvis.y < cfg.crouch_height;
        for (int i = 0; i < 16; ++i) acc[i] += b[i] ? 1.0 : 0.0;
    }
    std::vector<float> out(16);
    for (int i = 0; i < 16; ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(t_len));
    return out;
}

GaussianStats fit_gaussian(const std::vector<std::vector<float>>& features) {
    if (features.empty()) throw DataError("fit_gaussian: no samples");
    const int64_t n = static_cast<int64_t>(features.size());
    const int64_t d = static_cast<int64_t>(features[0].size());
    for (const auto& f : features)
        if (static_cast<int64_t>(f.size()) != d) throw DataError("fit_gaussian: ragged features");
    GaussianStats g;
    g.dim = d;
    g.mean.assign(d, 0.0);
    g.cov.assign(d * d, 0.0);
    for (const auto& f : features)
        for (int64_t i = 0; i < d; ++i) g.mean[i] += f[i];
    for (int64_t i = 0; i < d; ++i) g.mean[i] /= static_cast<double>(n);
    if (n > 1) {
        for (const auto& f : features)
            for (int64_t i = 0; i < d; ++i)
                for (int64_t j = 0; j < d; ++j)
                    g.cov[i * d + j] += (f[i] - g.mean[i]) * (f[j] - g.mean[j]);
        for (double& v : g.cov) v /= static_cast<double>(n - 1);
    }
    return g;
}

namespace {
// Cyclic Jacobi eigendecomposition of a symmetric matrix. a is destroyed;
// eigenvalues land in diag, eigenvectors in columns of v.
void jacobi_eigen(std::vector<double>& a, int64_t n, std::vector<double>& eigvals,
                  std::vector<double>& v) {
    v.assign(n * n, 0.0);
    for (int64_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-22) break;
        for (int64_t p = 0; p < n; ++p)
            for (int64_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a[q * n + q] - a[p * n + p]) / (2 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int64_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int64_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (int64_t k = 0; k < n; ++k) {
                    double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
    }
    eigvals.resize(n);
    for (int64_t i = 0; i < n; ++i) eigvals[i] = a[i * n + i];
}

void check_symmetric(const std::vector<double>& m, int64_t n, const char* what) {
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j)
            if (std::abs(m[i * n + j] - m[j * n + i]) > 1e-6)
                throw DataError(std::string(what) + ": matrix not symmetric");
}

// S^(1/2) for symmetric PSD S, clamping small negative eigenvalues.
std::vector<double> sqrt_psd(const std::vector<double>& m, int64_t n, double psd_tol,
                             const char* what) {
    std::vector<double> a = m, eig, v;
    jacobi_eigen(a, n, eig, v);
    double scale = 0;
    for (double e : eig) scale = std::max(scale, std::abs(e));
    for (double& e : eig) {
        if (e < -psd_tol * std::max(1.0, scale))
            throw DataError(std::string(what) + ": matrix not PSD (eigenvalue " +
                            std::to_string(e) + ")");
        e = e > 0 ? std::sqrt(e) : 0.0;
    }
    std::vector<double> out(n * n, 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0;
            for (int64_t k = 0; k < n; ++k) acc += v[i * n + k] * eig[k] * v[j * n + k];
            out[i * n + j] = acc;
        }
    return out;
}

double trace_sqrt_psd(std::vector<double> m, int64_t n, double psd_tol, const char* what) {
    std::vector<double> eig, v;
    // symmetrize against roundoff before decomposing
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j) {
            double avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = m[j * n + i] = avg;
        }
    jacobi_eigen(m, n, eig, v);
    double scale = 0;
    for (double e : eig) scale = std::max(scale, std::abs(e));
    double acc = 0;
    for (double e : eig) {
        if (e < -psd_tol * std::max(1.0, scale))
            throw DataError(std::string(what) + ": matrix not PSD");
        if (e > 0) acc += std::sqrt(e);
    }
    return acc;
}
}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b, double psd_tolerance) {
    if (a.dim != b.dim) throw ConfigError("frechet_distance: dimension mismatch");
    const int64_t d = a.dim;
    check_symmetric(a.cov, d, "frechet_distance");
    check_symmetric(b.cov, d, "frechet_distance");
    double mean_term = 0;
    for (int64_t i = 0; i < d; ++i) {
        double diff = a.mean[i] - b.mean[i];
        mean_term += diff * diff;
    }
    double tr_a = 0, tr_b = 0;
    for (int64_t i = 0; i < d; ++i) {
        tr_a += a.cov[i * d + i];
        tr_b += b.cov[i * d + i];
    }
    // Tr((Sa Sb)^(1/2)) computed symmetrically as Tr((sqrt(Sa) Sb sqrt(Sa))^(1/2))
    std::vector<double> sa = sqrt_psd(a.cov, d, psd_tolerance, "frechet_distance");
    std::vector<double> tmp(d * d, 0.0), m(d * d, 0.0);
    for (int64_t i = 0; i < d; ++i)
        for (int64_t k = 0; k < d; ++k) {
            double s = sa[i * d + k];
            if (s == 0) continue;
            for (int64_t j = 0; j < d; ++j) tmp[i * d + j] += s * b.cov[k * d + j];
        }
    for (int64_t i = 0; i < d; ++i)
        for (int64_t k = 0; k < d; ++k) {
            double s = tmp[i * d + k];
            if (s == 0) continue;
            for (int64_t j = 0; j < d; ++j) m[i * d + j] += s * sa[k * d + j];
        }
    double tr_cross = trace_sqrt_psd(std::move(m), d, psd_tolerance, "frechet_distance");
    double fid = mean_term + tr_a + tr_b - 2.0 * tr_cross;
    return fid;
}

double diversity(const std::vector<std::vector<float>>& features) {
    const int64_t n = static_cast<int64_t>(features.size());
    if (n < 2) throw DataError("diversity: need at least 2 feature vectors");
    double acc = 0;
    int64_t pairs = 0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j) {
            double d = 0;
            for (size_t k = 0; k < features[i].size(); ++k) {
                double diff = features[i][k] - features[j][k];
                d += diff * diff;
            }
            acc += std::sqrt(d);
            ++pairs;
        }
    return acc / static_cast<double>(pairs);
}

std::vector<int64_t> extract_dance_beats(const MotionSequence& p, int smooth_window,
                                         int64_t min_gap) {
    if (p.t() < 3) throw DataError("extract_dance_beats: need at least 3 frames");
    if (min_gap <= 0) min_gap = std::max<int64_t>(1, std::llround(0.25 * p.fps));
    std::vector<float> env = mean_speed_envelope(p);
    const int64_t n = static_cast<int64_t>(env.size());
    std::vector<float> smooth(n);
    const int half = smooth_window / 2;
    for (int64_t i = 0; i < n; ++i) {
        double acc = 0;
        int64_t cnt = 0;
        for (int64_t k = i - half; k <= i + half; ++k) {
            if (k < 0 || k >= n) continue;
            acc += env[k];
            ++cnt;
        }
        smooth[i] = static_cast<float>(acc / cnt);
    }
    float max_abs = 0;
    for (float v : smooth) max_abs = std::max(max_abs, std::abs(v));
    const float tol = 1e-4f * max_abs;  // rejects float-roundoff wobble on flat envelopes
    std::vector<int64_t> candidates;
    for (int64_t i = 1; i + 1 < n; ++i)
        if (smooth[i] < smooth[i - 1] - tol && smooth[i] <= smooth[i + 1] + tol)
            candidates.push_back(i);
    // deepest minima first, ties to the earliest frame
    std::stable_sort(candidates.begin(), candidates.end(), [&](int64_t a, int64_t b) {
        if (smooth[a] != smooth[b]) return smooth[a] < smooth[b];
        return a < b;
    });
    std::vector<int64_t> picked;
    for (int64_t c : candidates) {
        bool ok = true;
        for (int64_t q : picked)
            if (std::llabs(q - c) < min_gap) {
                ok = false;
                break;
            }
        if (ok) picked.push_back(c);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

double beat_align_score(const std::vector<int64_t>& dance_beats,
                        const std::vector<int64_t>& music_beats, double sigma_frames) {
    if (music_beats.empty()) throw DataError("beat_align_score: no music beats");
    if (sigma_frames <= 0) throw ConfigError("beat_align_score: sigma must be positive");
    if (dance_beats.empty()) return 0.0;
    double acc = 0;
    for (int64_t m : music_beats) {
        double best = std::numeric_limits<double>::infinity();
        for (int64_t d : dance_beats) {
            double diff = static_cast<double>(d - m);
            best = std::min(best, diff * diff);
        }
        acc += std::exp(-best / (2.0 * sigma_frames * sigma_frames));
    }
    return acc / static_cast<double>(music_beats.size());
}

EvalReport evaluate_suite(const std::vector<MotionSequence>& generated,
                          const std::vector<std::vector<int64_t>>& generated_music_beats,
                          const std::vector<MotionSequence>& reference, const EvalConfig& cfg) {
    if (generated.size() < 2 || reference.size() < 2)
        throw DataError("evaluate_suite: need at least 2 sequences per set");
    if (generated_music_beats.size() != generated.size())
        throw DataError("evaluate_suite: music beats must pair with generated sequences");

    auto features = [&](const std::vector<MotionSequence>& set, bool kinetic) {
        std::vector<std::vector<float>> out;
        out.reserve(set.size());
        for (const auto& p : set)
            out.push_back(kinetic ? kinetic_features(p) : geometric_features(p, cfg.geometric));
        return out;
    };
    auto gen_k = features(generated, true), ref_k = features(reference, true);
    auto gen_g = features(generated, false), ref_g = features(reference, false);

    EvalReport r;
    r.n_generated = static_cast<int64_t>(generated.size());
    r.n_reference = static_cast<int64_t>(reference.size());
    r.fid_k = frechet_distance(fit_gaussian(gen_k), fit_gaussian(ref_k));
    r.fid_g = frechet_distance(fit_gaussian(gen_g), fit_gaussian(ref_g));
    r.div_k = diversity(gen_k);
    r.div_g = diversity(gen_g);
    double bas_acc = 0;
    int64_t bas_n = 0;
    for (size_t i = 0; i < generated.size(); ++i) {
        if (generated_music_beats[i].empty()) {
            r.per_sequence_bas.push_back(-1.0);  // no beats annotated
            continue;
        }
        int64_t min_gap = std::max<int64_t>(1, std::llround(cfg.min_gap_fraction * generated[i].fps));
        auto dance = extract_dance_beats(generated[i], cfg.smooth_window, min_gap);
        double s = beat_align_score(dance, generated_music_beats[i],
                                    cfg.sigma_frames(generated[i].fps));
        r.per_sequence_bas.push_back(s);
        bas_acc += s;
        ++bas_n;
    }
    r.bas = bas_n > 0 ? bas_acc / static_cast<double>(bas_n) : 0.0;
    return r;
}

std::string eval_report_to_json(const EvalReport& r) {
    nlohmann::json j{{"fid_k", r.fid_k},
                     {"fid_g", r.fid_g},
                     {"div_k", r.div_k},
                     {"div_g", r.div_g},
                     {"bas", r.bas},
                     {"n_generated", r.n_generated},
                     {"n_reference", r.n_reference},
                     {"config_hash", r.config_hash}};
    return j.dump(2);
}

}  // namespace choreo
