#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "choreo/metrics.hpp"

using namespace choreo;

namespace {
MotionSequence make_seq(int64_t t, int64_t j, float fps = 60.f) {
    MotionSequence p;
    p.joints = j;
    p.fps = fps;
    p.skeleton_id = "test";
    p.frames.assign(t * j * 3, 0.f);
    return p;
}
}  // namespace

TEST_CASE("kinetic features: static zero, uniform translation, time-reversal") {
    MotionSequence still = make_seq(10, 3);
    auto f0 = kinetic_features(still);
    for (float v : f0) CHECK(v == 0.f);

    // uniform translation at speed s: per-joint mean speed s, acceleration 0
    MotionSequence ride = make_seq(10, 3);
    for (int64_t t = 0; t < 10; ++t)
        for (int64_t j = 0; j < 3; ++j) ride.at(t, j, 0) = 0.25f * static_cast<float>(t);
    auto f1 = kinetic_features(ride);
    for (int64_t j = 0; j < 3; ++j) {
        CHECK(f1[j * 3 + 0] == doctest::Approx(0.25f));
        CHECK(f1[j * 3 + 1] == doctest::Approx(0.25f * 0.25f));
        CHECK(f1[j * 3 + 2] == doctest::Approx(0.f));
    }

    // speed and energy are invariant under time reversal
    MotionSequence wiggle = make_seq(16, 2);
    for (int64_t t = 0; t < 16; ++t) {
        wiggle.at(t, 0, 1) = std::sin(0.4f * static_cast<float>(t));
        wiggle.at(t, 1, 2) = std::cos(0.7f * static_cast<float>(t));
    }
    MotionSequence rev = wiggle;
    for (int64_t t = 0; t < 16; ++t)
        for (int64_t j = 0; j < 2; ++j)
            for (int c = 0; c < 3; ++c) rev.at(t, j, c) = wiggle.at(15 - t, j, c);
    auto fw = kinetic_features(wiggle), fr = kinetic_features(rev);
    for (int64_t j = 0; j < 2; ++j) {
        CHECK(fw[j * 3 + 0] == doctest::Approx(fr[j * 3 + 0]));
        CHECK(fw[j * 3 + 1] == doctest::Approx(fr[j * 3 + 1]));
    }
}

TEST_CASE("kinetic features ignore global translation") {
    MotionSequence a = make_seq(12, 2);
    for (int64_t t = 0; t < 12; ++t) a.at(t, 1, 0) = std::sin(0.5f * static_cast<float>(t));
    MotionSequence b = a;
    for (int64_t t = 0; t < 12; ++t)
        for (int64_t j = 0; j < 2; ++j) {
            b.at(t, j, 0) += 100.f;
            b.at(t, j, 1) -= 42.f;
        }
    auto fa = kinetic_features(a), fb = kinetic_features(b);
    for (size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-4));
}

TEST_CASE("geometric features: bounds, symmetry, hands below head") {
    // symmetric T-pose held static
    MotionSequence pose = make_seq(8, 24);
    SyntheticCorpusSpec spec;
    spec.num_sequences = 1;
    spec.frames = 8;
    spec.joints = 24;
    spec.drift_speed = 0.f;
    spec.zero_drift = true;
    auto corpus = generate_synthetic(spec);
    // neutralize motion: frame 0 pose repeated
    for (int64_t t = 0; t < 8; ++t)
        for (int64_t j = 0; j < 24; ++j)
            for (int c = 0; c < 3; ++c) pose.at(t, j, c) = corpus[0].motion.at(0, j, c);

    auto f = geometric_features(pose);
    REQUIRE(f.size() == 16);
    for (float v : f) CHECK((v >= 0.f && v <= 1.f));
    auto names = geometric_feature_names();
    REQUIRE(names.size() == 16);
    // left/right symmetric template pairs agree on a symmetric pose
    CHECK(f[0] == f[1]);    // hands above head
    CHECK(f[6] == f[7]);    // elbows
    CHECK(f[8] == f[9]);    // knees
    CHECK(f[10] == f[11]);  // hands above shoulders

    // wrists stay below the head in the base pose
    CHECK(f[0] == 0.f);
    CHECK(f[1] == 0.f);

    MotionSequence tiny = make_seq(4, 8);
    CHECK_THROWS_AS(geometric_features(tiny), ConfigError);
}

TEST_CASE("frechet distance: identical stats, 1-D mean shift, 1-D variance gap") {
    GaussianStats a;
    a.dim = 1;
    a.mean = {0.0};
    a.cov = {1.0};
    GaussianStats b = a;
    CHECK(frechet_distance(a, b) == doctest::Approx(0).epsilon(1e-6));

    b.mean = {1.0};
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-6));  // N(0,1) vs N(1,1)

    b.mean = {0.0};
    b.cov = {4.0};
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-6));  // (2-1)^2
}

TEST_CASE("frechet distance is symmetric and detects non-PSD input") {
    RngEngine rng(5);
    std::vector<std::vector<float>> fa, fb;
    for (int i = 0; i < 12; ++i) {
        std::vector<float> va(4), vb(4);
        for (int k = 0; k < 4; ++k) {
            va[k] = static_cast<float>(normal_real(rng, 0, 1));
            vb[k] = static_cast<float>(normal_real(rng, 0.5, 1.5));
        }
        fa.push_back(va);
        fb.push_back(vb);
    }
    GaussianStats a = fit_gaussian(fa), b = fit_gaussian(fb);
    double dab = frechet_distance(a, b), dba = frechet_distance(b, a);
    CHECK(dab == doctest::Approx(dba).epsilon(1e-6));
    CHECK(dab >= 0);

    GaussianStats bad = a;
    bad.cov[0] = -5.0;  // strongly negative eigenvalue
    CHECK_THROWS_AS(frechet_distance(bad, b), DataError);
}

TEST_CASE("matrix square root reproduces the covariance") {
    // verified through the public surface: FID(a, a) = 0 needs
    // Tr((Sa Sa)^(1/2)) = Tr(Sa) to hold through the eigen path
    RngEngine rng(9);
    std::vector<std::vector<float>> fa;
    for (int i = 0; i < 20; ++i) {
        std::vector<float> v(6);
        for (int k = 0; k < 6; ++k) v[k] = static_cast<float>(normal_real(rng, 0, 2));
        fa.push_back(v);
    }
    GaussianStats a = fit_gaussian(fa);
    CHECK(frechet_distance(a, a) == doctest::Approx(0).epsilon(1e-5));
}

TEST_CASE("diversity: identical, pair, collinear cases") {
    std::vector<std::vector<float>> same{{1, 2}, {1, 2}, {1, 2}};
    CHECK(diversity(same) == doctest::Approx(0));
    std::vector<std::vector<float>> pair{{0, 0}, {0, 2}};
    CHECK(diversity(pair) == doctest::Approx(2.0));
    std::vector<std::vector<float>> collinear{{0}, {1}, {2}};
    CHECK(diversity(collinear) == doctest::Approx(4.0 / 3.0));
    std::vector<std::vector<float>> lone{{0}};
    CHECK_THROWS_AS(diversity(lone), DataError);
}

TEST_CASE("diversity is invariant to ordering") {
    std::vector<std::vector<float>> f{{0, 1}, {2, 3}, {-1, 4}, {0.5f, 0.5f}};
    double d1 = diversity(f);
    std::reverse(f.begin(), f.end());
    CHECK(diversity(f) == doctest::Approx(d1));
}

TEST_CASE("extract_dance_beats: constant velocity yields nothing") {
    MotionSequence ride = make_seq(32, 2, 30.f);
    for (int64_t t = 0; t < 32; ++t)
        for (int64_t j = 0; j < 2; ++j) ride.at(t, j, 0) = 0.1f * static_cast<float>(t);
    CHECK(extract_dance_beats(ride).empty());
}

TEST_CASE("extract_dance_beats recovers synthetic ground truth") {
    SyntheticCorpusSpec spec;
    spec.num_sequences = 6;
    spec.frames = 128;
    spec.joints = 24;
    spec.seed = 77;
    auto corpus = generate_synthetic(spec);
    int64_t matched = 0, total = 0;
    for (const auto& seq : corpus) {
        auto beats = extract_dance_beats(seq.motion);
        for (int64_t b : seq.beats) {
            ++total;
            for (int64_t d : beats)
                if (std::llabs(d - b) <= 1) {
                    ++matched;
                    break;
                }
        }
    }
    INFO("matched ", matched, " of ", total);
    CHECK(static_cast<double>(matched) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("beat align score: exact match, analytic offset, empty dance beats") {
    std::vector<int64_t> m{10, 20, 30};
    CHECK(beat_align_score(m, m, 3.0) == doctest::Approx(1.0));
    CHECK(beat_align_score({13}, {10}, 3.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
    CHECK(beat_align_score({}, m, 3.0) == 0.0);
    CHECK_THROWS_AS(beat_align_score(m, {}, 3.0), DataError);
}

TEST_CASE("beat align score decays monotonically with offset") {
    double prev = 1.1;
    for (int64_t off = 0; off <= 12; ++off) {
        double s = beat_align_score({50 + off}, {50}, 3.0);
        CHECK(s < prev + 1e-12);
        prev = s;
    }
}

TEST_CASE("evaluate_suite: self comparison gives near-zero FIDs") {
    SyntheticCorpusSpec spec;
    spec.num_sequences = 6;
    spec.frames = 96;
    spec.joints = 24;
    spec.seed = 123;
    auto corpus = generate_synthetic(spec);
    std::vector<MotionSequence> set;
    std::vector<std::vector<int64_t>> beats;
    for (const auto& s : corpus) {
        set.push_back(s.motion);
        beats.push_back(s.beats);
    }
    EvalReport r = evaluate_suite(set, beats, set);
    CHECK(std::abs(r.fid_k) < 1e-4);
    CHECK(std::abs(r.fid_g) < 1e-4);
    CHECK(r.div_k > 0);
    CHECK(r.bas > 0.5);  // ground truth aligns with its own beats
    CHECK(r.n_generated == 6);

    // duplicated single sequence as the generated set: diversity 0
    std::vector<MotionSequence> dup{set[0], set[0], set[0]};
    std::vector<std::vector<int64_t>> dup_beats{beats[0], beats[0], beats[0]};
    EvalReport r2 = evaluate_suite(dup, dup_beats, set);
    CHECK(r2.div_k == doctest::Approx(0));
    CHECK(r2.div_g == doctest::Approx(0));

    // deterministic across runs
    EvalReport r3 = evaluate_suite(set, beats, set);
    CHECK(r3.fid_k == r.fid_k);
    CHECK(r3.bas == r.bas);

    std::string json = eval_report_to_json(r);
    CHECK(json.find("fid_k") != std::string::npos);
}
