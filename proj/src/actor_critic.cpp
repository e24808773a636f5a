#include "choreo/actor_critic.hpp"

#include <algorithm>
#include <cmath>

namespace choreo {

CriticModel::CriticModel(int64_t channels, int64_t heads, int64_t block_size, int64_t segments,
                         float dropout, uint64_t seed)
    : segments_(segments), block_size_(block_size) {
    RngEngine rng(seed);
    const float attn_scale = 1.f / std::sqrt(static_cast<float>(channels));
    for (int l = 0; l < 3; ++l)
        blocks_.emplace_back(params_, "critic/layer" + std::to_string(l), channels, heads,
                             attn_scale, dropout, rng);
    head_ = nn::Linear(params_, "critic/head", channels, 1, rng);
    // zero value estimates before any training
    std::fill(head_.w.data(), head_.w.data() + head_.w.size(), 0.f);
}

Tensor CriticModel::values(const Tensor& s, bool train, RngEngine* drop_rng) const {
    const int64_t n = s.dim(0) / segments_;
    if (s.dim(0) != n * segments_) throw ConfigError("critic: state rows not divisible by segments");
    Tensor mask = build_cross_conditional_mask(n, segments_);
    Tensor x = s;
    for (const auto& b : blocks_) x = b.forward(x, mask, train, drop_rng);
    Tensor per_pos = head_.forward(x);  // [(segments*n) x 1]
    Tensor vu = slice_rows(per_pos, n, 2 * n);
    Tensor vl = slice_rows(per_pos, 2 * n, 3 * n);
    return reshape(add(vu, vl), {n});
}

std::vector<float> td_error(const std::vector<float>& rewards, const std::vector<float>& values) {
    if (rewards.size() != values.size()) throw ConfigError("td_error: length mismatch");
    if (values.size() < 2) throw ConfigError("td_error: need at least 2 steps");
    std::vector<float> eps(values.size() - 1);
    for (size_t t = 0; t + 1 < values.size(); ++t)
        eps[t] = rewards[t] + values[t + 1] - values[t];
    return eps;
}

Tensor td_error_graph(const Tensor& rewards_const, const Tensor& values) {
    const int64_t n = values.size();
    if (rewards_const.size() != n) throw ConfigError("td_error: length mismatch");
    if (n < 2) throw ConfigError("td_error: need at least 2 steps");
    Tensor v = reshape(values, {n});
    Tensor next_sg = stop_gradient(slice_rows(v, 1, n));
    Tensor prev = slice_rows(v, 0, n - 1);
    Tensor r = stop_gradient(slice_rows(reshape(rewards_const, {n}), 0, n - 1));
    return add(r, sub(next_sg, prev));
}

Tensor ac_loss(const Tensor& ce_sum_rows, const Tensor& eps) {
    const int64_t n = ce_sum_rows.size();
    if (eps.size() != n) throw ConfigError("ac_loss: length mismatch");
    return scale(sum(mul(ce_sum_rows, stop_gradient(eps))), 1.f / static_cast<float>(n));
}

Tensor critic_loss(const Tensor& eps) {
    return scale(sum(mul(eps, eps)), 1.f / static_cast<float>(eps.size()));
}

std::vector<float> beat_align_reward(const std::vector<int64_t>& dance_beats,
                                     const std::vector<int64_t>& music_beats, int64_t steps,
                                     int64_t d) {
    std::vector<float> out(steps, 1.f);
    for (int64_t t = 0; t < steps; ++t) {
        bool music = step_has_beat(music_beats, t, d);
        bool dance = step_has_beat(dance_beats, t, d);
        if (music && !dance) out[t] = -1.f;
    }
    return out;
}

namespace {
struct V3 {
    double x, y, z;
};
V3 jpos(const MotionSequence& p, int64_t t, int j) {
    return {p.at(t, j, 0), p.at(t, j, 1), p.at(t, j, 2)};
}
V3 operator-(V3 a, V3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
V3 cross(V3 a, V3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(V3 a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }
}  // namespace

std::vector<float> consistency_per_frame(const MotionSequence& merged, const RewardConfig& cfg,
                                         int64_t* degenerate_frames) {
    const auto& r = cfg.refs;
    int max_idx = std::max({r.pelvis, r.neck, r.spine1, r.l_shoulder, r.r_shoulder, r.l_hip, r.r_hip});
    if (merged.joints <= max_idx)
        throw ConfigError("consistency reward: skeleton lacks the normal-defining joints");
    const int64_t t_len = merged.t();
    std::vector<float> out(t_len, 1.f);
    int64_t degenerate = 0;
    for (int64_t t = 0; t < t_len; ++t) {
        V3 nu = cross(jpos(merged, t, r.r_shoulder) - jpos(merged, t, r.l_shoulder),
                      jpos(merged, t, r.neck) - jpos(merged, t, r.pelvis));
        V3 nl = cross(jpos(merged, t, r.r_hip) - jpos(merged, t, r.l_hip),
                      jpos(merged, t, r.spine1) - jpos(merged, t, r.pelvis));
        // project to the x-z plane, renormalize
        double ux = nu.x, uz = nu.z, lx = nl.x, lz = nl.z;
        double un = std::sqrt(ux * ux + uz * uz), ln = std::sqrt(lx * lx + lz * lz);
        if (norm(nu) < cfg.degenerate_norm || norm(nl) < cfg.degenerate_norm ||
            un < cfg.degenerate_norm || ln < cfg.degenerate_norm) {
            ++degenerate;  // treated as consistent
            continue;
        }
        double dot = (ux * lx + uz * lz) / (un * ln);
        out[t] = dot < 0.0 ? static_cast<float>(dot) : 1.f;
    }
    if (degenerate_frames) *degenerate_frames += degenerate;
    return out;
}

std::vector<float> consistency_reward(const MotionSequence& merged, const RewardConfig& cfg,
                                      int64_t steps, int64_t d, int64_t* degenerate_frames) {
    std::vector<float> frame_r = consistency_per_frame(merged, cfg, degenerate_frames);
    std::vector<float> out(steps, 1.f);
    for (int64_t t = 0; t < steps; ++t) {
        float inf = 1.f;
        for (int64_t f = t * d; f < (t + 1) * d && f < static_cast<int64_t>(frame_r.size()); ++f)
            inf = std::min(inf, frame_r[f]);
        out[t] = inf;
    }
    return out;
}

MotionSequence decode_codes_to_motion(const VqVaeModel& upper_vq, const VqVaeModel& lower_vq,
                                      const HalfBodySplit& split, const CodeSequence& codes,
                                      float fps, bool with_root) {
    NoGradGuard ng;
    Tensor eq_u = upper_vq.codebook_rows(codes.upper);
    Tensor eq_l = lower_vq.codebook_rows(codes.lower);
    Tensor pose_u = upper_vq.decode_pose(eq_u);
    Tensor pose_l = lower_vq.decode_pose(eq_l);
    Tensor vel = lower_vq.decode_velocity(eq_l);

    const int64_t t_len = pose_u.dim(0);
    auto to_half = [&](const Tensor& flat, size_t joints) {
        MotionSequence h;
        h.joints = static_cast<int64_t>(joints);
        h.fps = fps;
        h.frames.assign(flat.data(), flat.data() + flat.size());
        return h;
    };
    MotionSequence up = to_half(pose_u, split.upper.size());
    MotionSequence lo = to_half(pose_l, split.lower.size());
    up.skeleton_id = lo.skeleton_id = (split.upper.size() + split.lower.size() == 24)
                                          ? "smpl24"
                                          : "joints" + std::to_string(split.upper.size() +
                                                                      split.lower.size());
    MotionSequence merged = merge_half_bodies(up, lo, split);
    merged.fps = fps;
    if (!with_root) return merged;

    GlobalVelocity gv;
    gv.values.assign(vel.data(), vel.data() + vel.size());
    if (gv.rows() != t_len - 1) throw DataError("decode: velocity length mismatch");
    float origin[3] = {0.f, 0.f, 0.f};
    return apply_root_trajectory(merged, integrate_velocity(gv, origin));
}

namespace {
// Greedy on-policy rollout over one block; the re-forward over the finished
// trajectory reproduces these argmax choices position by position.
CodeSequence rollout(const GptModel& gpt, const FinetuneSequence& seq, int64_t n) {
    CodeStepFeatures music = seq.music;
    return generate(gpt, music, seq.start_upper, seq.start_lower, n + 1);
}
}  // namespace

FinetuneStats finetune(GptModel& gpt, CriticModel& critic, const VqVaeModel& upper_vq,
                       const VqVaeModel& lower_vq, const HalfBodySplit& split,
                       const std::vector<FinetuneSequence>& corpus, const FinetuneConfig& cfg,
                       FinetuneState* state) {
    if (corpus.empty()) throw DataError("finetune: empty corpus");
    const GptConfig& mc = gpt.config();
    if (mc.code_streams != 2) throw ConfigError("finetune: needs an upper+lower model");
    const int64_t d = upper_vq.config().downsample;

    Adam opt_policy(gpt.policy_params(), cfg.adam);
    Adam opt_critic(critic.all_params(), cfg.adam);
    int64_t start_epoch = 0;
    if (state) {
        if (!state->policy_adam.empty()) opt_policy.import_state(state->policy_adam);
        if (!state->critic_adam.empty()) opt_critic.import_state(state->critic_adam);
        start_epoch = state->epoch;
    }
    FinetuneStats stats;

    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        RngEngine rng = step_rng(cfg.seed, static_cast<uint64_t>(epoch), /*salt=*/3);
        shuffle_indices(order, rng);
        FinetuneEpochStats es;
        int64_t reward_count = 0, batch_count = 0;
        for (size_t base = 0; base < order.size(); base += cfg.batch_size) {
            size_t batch = std::min<size_t>(cfg.batch_size, order.size() - base);
            Tensor ac_acc, v_acc;
            for (size_t b = 0; b < batch; ++b) {
                const FinetuneSequence& seq = corpus[order[base + b]];
                int64_t n = std::min<int64_t>(mc.block_size - 1, seq.music.rows() - 1);
                if (n < 2) throw DataError("finetune: sequence too short for TD steps");

                CodeSequence traj = rollout(gpt, seq, n);

                // rewards on the decoded trajectory
                MotionSequence decoded =
                    decode_codes_to_motion(upper_vq, lower_vq, split, traj, seq.fps);
                int64_t min_gap =
                    std::max<int64_t>(1, std::llround(cfg.eval.min_gap_fraction * seq.fps));
                std::vector<int64_t> dance_beats =
                    extract_dance_beats(decoded, cfg.eval.smooth_window, min_gap);
                std::vector<float> rb = beat_align_reward(dance_beats, seq.music_beats, n, d);
                std::vector<float> rc =
                    consistency_reward(decoded, cfg.reward, n, d, &stats.degenerate_frames);
                std::vector<float> r(n);
                for (int64_t t = 0; t < n; ++t) {
                    r[t] = cfg.reward.gamma_b * rb[t] + cfg.reward.gamma_c * rc[t];
                    es.mean_rb += rb[t];
                    es.mean_rc += rc[t];
                    es.mean_reward += r[t];
                }
                reward_count += n;

                // one teacher-forced pass over the rolled-out trajectory
                const int64_t f = seq.music.feature_dim;
                std::vector<float> rows(n * f);
                std::copy_n(seq.music.features.data() + f, n * f, rows.begin());
                Tensor music = Tensor::from({n, f}, std::move(rows));
                std::vector<std::vector<int>> inputs{
                    std::vector<int>(traj.upper.begin(), traj.upper.begin() + n),
                    std::vector<int>(traj.lower.begin(), traj.lower.begin() + n)};

                Tensor s = gpt.run_layers(gpt.embed(music, inputs, false, nullptr), 0,
                                          gpt.state_layer_count(), false, nullptr);
                Tensor s_fixed = stop_gradient(s);  // the state network stays frozen
                Tensor policy_x = gpt.run_layers(s_fixed, gpt.state_layer_count(), mc.layers,
                                                 false, nullptr);
                Tensor logits = gpt.logits_from(policy_x);
                Tensor v = critic.values(s_fixed);

                std::vector<int> tgt_u(traj.upper.begin() + 1, traj.upper.begin() + n);
                std::vector<int> tgt_l(traj.lower.begin() + 1, traj.lower.begin() + n);
                Tensor ce_u = cross_entropy_rows(
                    slice_rows(gpt.stream_logits(logits, 0, n), 0, n - 1), tgt_u);
                Tensor ce_l = cross_entropy_rows(
                    slice_rows(gpt.stream_logits(logits, 1, n), 0, n - 1), tgt_l);

                Tensor eps = td_error_graph(Tensor::from({n}, r), v);
                Tensor l_ac = ac_loss(add(ce_u, ce_l), eps);
                Tensor l_v = critic_loss(eps);
                es.mean_ac_loss += l_ac.item();
                es.mean_critic_loss += l_v.item();

                ac_acc = ac_acc.defined() ? add(ac_acc, l_ac) : l_ac;
                v_acc = v_acc.defined() ? add(v_acc, l_v) : l_v;
            }
            float inv_b = 1.f / static_cast<float>(batch);
            // one policy step, then one critic step
            opt_policy.zero_grad();
            Tensor l_ac = scale(ac_acc, inv_b);
            if (!all_finite(l_ac)) throw NumericError("finetune: actor loss diverged");
            l_ac.backward();
            opt_policy.step();

            opt_critic.zero_grad();
            Tensor l_v = scale(v_acc, inv_b);
            if (!all_finite(l_v)) throw NumericError("finetune: critic loss diverged");
            l_v.backward();
            opt_critic.step();
            ++batch_count;
        }
        es.mean_rb /= static_cast<float>(reward_count);
        es.mean_rc /= static_cast<float>(reward_count);
        es.mean_reward /= static_cast<float>(reward_count);
        es.mean_ac_loss /= static_cast<float>(order.size());
        es.mean_critic_loss /= static_cast<float>(order.size());
        stats.epochs.push_back(es);
    }
    if (state) {
        state->epoch = cfg.epochs;
        state->policy_adam = opt_policy.export_state();
        state->critic_adam = opt_critic.export_state();
    }
    return stats;
}

}  // namespace choreo
