#include "choreo/vqvae.hpp"

#include <algorithm>
#include <cmath>

namespace choreo {

int64_t VqVaeConfig::stages() const {
    int64_t s = 0, d = downsample;
    while (d > 1) {
        if (d % 2 != 0) throw ConfigError("vqvae: downsample must be a power of two");
        d /= 2;
        ++s;
    }
    return s;
}

void VqVaeConfig::validate() const {
    if (codebook_size < 2) throw ConfigError("vqvae: codebook needs at least 2 entries");
    if (channels < 1 || in_dim < 1) throw ConfigError("vqvae: channels and in_dim must be positive");
    if (downsample < 2) throw ConfigError("vqvae: downsample must be >= 2");
    if (beta < 0 || alpha1 < 0 || alpha2 < 0) throw ConfigError("vqvae: loss weights must be >= 0");
    (void)stages();
}

namespace {
// residual pair: x + c2(relu(c1(x)))
Tensor res_block(const Tensor& x, const nn::Conv1d& c1, const nn::Conv1d& c2) {
    return add(x, c2.forward(relu(c1.forward(x))));
}
// repeat-upsample then k4 conv with pad 2 gives 2T+1 rows; crop to 2T
Tensor up_block(const Tensor& x, const nn::Conv1d& c) {
    Tensor y = c.forward(upsample2x_repeat(x));
    return slice_rows(y, 0, x.dim(0) * 2);
}
}  // namespace

VqVaeModel::VqVaeModel(VqVaeConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    RngEngine rng(seed);
    const int64_t w = cfg_.hidden();
    const int64_t c = cfg_.channels;
    const int64_t stages = cfg_.stages();

    for (int64_t s = 0; s < stages; ++s) {
        int64_t ci = (s == 0) ? cfg_.in_dim : w;
        int64_t co = (s == stages - 1) ? c : w;
        enc_down_.emplace_back(params_, "enc/down" + std::to_string(s), 4, ci, co, 2, 1, rng);
    }
    for (int i = 0; i < 2; ++i) {
        enc_res_.emplace_back(params_, "enc/res" + std::to_string(i) + "a", 3, c, c, 1, 1, rng);
        enc_res_.emplace_back(params_, "enc/res" + std::to_string(i) + "b", 3, c, c, 1, 1, rng);
    }

    codebook_ = params_.add("codebook", nn::init_normal({cfg_.codebook_size, c}, 0.2f, rng));
    usage_.assign(cfg_.codebook_size, 0);

    for (int i = 0; i < 2; ++i) {
        dec_res_.emplace_back(params_, "dec/res" + std::to_string(i) + "a", 3, c, c, 1, 1, rng);
        dec_res_.emplace_back(params_, "dec/res" + std::to_string(i) + "b", 3, c, c, 1, 1, rng);
    }
    for (int64_t s = 0; s < stages; ++s) {
        int64_t ci = (s == 0) ? c : w;
        dec_up_.emplace_back(params_, "dec/up" + std::to_string(s), 4, ci, w, 1, 2, rng);
    }
    dec_head_ = nn::Conv1d(params_, "dec/head", 3, w, cfg_.in_dim, 1, 1, rng);

    if (cfg_.half == BodyHalf::lower) {
        for (int i = 0; i < 2; ++i) {
            vel_res_.emplace_back(params_, "vel/res" + std::to_string(i) + "a", 3, c, c, 1, 1, rng);
            vel_res_.emplace_back(params_, "vel/res" + std::to_string(i) + "b", 3, c, c, 1, 1, rng);
        }
        for (int64_t s = 0; s < stages; ++s) {
            int64_t ci = (s == 0) ? c : w;
            vel_up_.emplace_back(params_, "vel/up" + std::to_string(s), 4, ci, w, 1, 2, rng);
        }
        vel_head_ = nn::Conv1d(params_, "vel/head", 3, w, 3, 1, 1, rng);
    }
}

Tensor VqVaeModel::encode(const Tensor& frames) const {
    if (frames.rank() != 2 || frames.dim(1) != cfg_.in_dim)
        throw ConfigError("encode: expected [T x " + std::to_string(cfg_.in_dim) + "]");
    int64_t t = frames.dim(0);
    if (t < cfg_.downsample) throw DataError("encode: sequence shorter than one code step");
    int64_t keep = (t / cfg_.downsample) * cfg_.downsample;
    Tensor x = (keep == t) ? frames : slice_rows(frames, 0, keep);
    for (const auto& down : enc_down_) x = relu(down.forward(x));
    for (size_t i = 0; i + 1 < enc_res_.size(); i += 2) x = res_block(x, enc_res_[i], enc_res_[i + 1]);
    return x;
}

std::vector<int> VqVaeModel::nearest_codes(const Tensor& e) const {
    const int64_t rows = e.dim(0), c = cfg_.channels, n = cfg_.codebook_size;
    std::vector<int> out(rows);
    for (int64_t i = 0; i < rows; ++i) {
        const float* ei = e.data() + i * c;
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (int64_t j = 0; j < n; ++j) {
            const float* z = codebook_.data() + j * c;
            double d = 0;
            for (int64_t k = 0; k < c; ++k) {
                double diff = static_cast<double>(ei[k]) - static_cast<double>(z[k]);
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        out[i] = best_j;
    }
    return out;
}

Tensor VqVaeModel::quantize_straight_through(const Tensor& e, const std::vector<int>& codes) const {
    const int64_t rows = e.dim(0), c = cfg_.channels;
    if (static_cast<int64_t>(codes.size()) != rows) throw ConfigError("quantize: code count mismatch");
    std::vector<float> out(rows * c);
    for (int64_t i = 0; i < rows; ++i)
        std::copy_n(codebook_.data() + codes[i] * c, c, out.begin() + i * c);
    return detail::make_op<float>({rows, c}, std::move(out), {e}, [](NodeT<float>& n) {
        auto& pe = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i) pe.grad[i] += n.grad[i];
    });
}

Tensor VqVaeModel::codebook_rows(const std::vector<int>& codes) const {
    return embedding_lookup(codebook_, codes);
}

Tensor VqVaeModel::run_decoder_stack(const Tensor& e_q, const std::vector<nn::Conv1d>& res,
                                     const std::vector<nn::Conv1d>& ups,
                                     const nn::Conv1d& head) const {
    Tensor x = e_q;
    for (size_t i = 0; i + 1 < res.size(); i += 2) x = res_block(x, res[i], res[i + 1]);
    for (const auto& up : ups) x = relu(up_block(x, up));
    return head.forward(x);
}

Tensor VqVaeModel::decode_pose(const Tensor& e_q) const {
    return run_decoder_stack(e_q, dec_res_, dec_up_, dec_head_);
}

Tensor VqVaeModel::decode_velocity(const Tensor& e_q_lower) const {
    if (!has_velocity_branch()) throw ConfigError("decode_velocity: model has no velocity branch");
    Tensor v = run_decoder_stack(e_q_lower, vel_res_, vel_up_, vel_head_);
    return slice_rows(v, 0, v.dim(0) - 1);  // (T-1) rows, the defined differences
}

Tensor VqVaeModel::vq_loss(const Tensor& decoded, const Tensor& target, const Tensor& e,
                           const std::vector<int>& codes, VqLossParts* parts) const {
    if (decoded.shape() != target.shape()) throw ConfigError("vq_loss: shape mismatch");
    Tensor pos = l1_loss(decoded, target);
    Tensor vel = l1_loss(temporal_diff(decoded), temporal_diff(target));
    Tensor acc = l1_loss(temporal_diff(temporal_diff(decoded)), temporal_diff(temporal_diff(target)));
    Tensor rec = add(pos, add(scale(vel, cfg_.alpha1), scale(acc, cfg_.alpha2)));

    Tensor z = codebook_rows(codes);
    Tensor e_const = stop_gradient(e);
    Tensor z_const = stop_gradient(z);
    Tensor codebook_term, commit_term;
    if (cfg_.squared_norms) {
        codebook_term = mse_loss(e_const, z);
        commit_term = mse_loss(e, z_const);
    } else {
        codebook_term = mean_row_norm(sub(e_const, z));
        commit_term = mean_row_norm(sub(e, z_const));
    }
    Tensor total = add(rec, add(codebook_term, scale(commit_term, cfg_.beta)));
    if (parts) {
        parts->rec_pos = pos.item();
        parts->rec_vel = vel.item();
        parts->rec_acc = acc.item();
        parts->rec = rec.item();
        parts->codebook = codebook_term.item();
        parts->commit = commit_term.item();
        parts->total = total.item();
    }
    return total;
}

std::vector<NamedParam> VqVaeModel::main_params() const {
    std::vector<NamedParam> out;
    for (const auto& e : params_.entries())
        if (e.name.rfind("vel/", 0) != 0) out.push_back(e);
    return out;
}

std::vector<NamedParam> VqVaeModel::velocity_params() const {
    std::vector<NamedParam> out;
    for (const auto& e : params_.entries())
        if (e.name.rfind("vel/", 0) == 0) out.push_back(e);
    return out;
}

VqTrainStats train_vqvae(VqVaeModel& model, const std::vector<std::vector<float>>& sequences,
                         const VqTrainConfig& cfg, VqTrainState* state) {
    if (sequences.empty()) throw DataError("train_vqvae: empty corpus");
    const int64_t in_dim = model.config().in_dim;
    Adam opt(model.main_params(), cfg.adam);
    const int64_t n_codes = model.config().codebook_size;
    const int64_t c_dim = model.config().channels;
    std::vector<int64_t> usage(n_codes, 0);
    int64_t start_step = 0;
    if (state) {
        if (!state->adam.empty()) opt.import_state(state->adam);
        if (!state->usage_since_reset.empty()) usage = state->usage_since_reset;
        start_step = state->step;
    }
    const int64_t batch = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(sequences.size()));
    const int64_t reset_every =
        cfg.reset_interval > 0
            ? cfg.reset_interval
            : std::max<int64_t>(1, static_cast<int64_t>(sequences.size()) / batch);
    VqTrainStats stats;

    for (int64_t step = start_step; step < cfg.steps; ++step) {
        RngEngine rng = step_rng(cfg.seed, static_cast<uint64_t>(step));
        auto picks = sample_distinct(sequences.size(), batch, rng);
        opt.zero_grad();
        Tensor loss_acc;
        VqLossParts batch_parts;
        std::vector<float> stash;  // this step's encoder rows, donors for resets
        int64_t stash_rows = 0;
        for (size_t pick : picks) {
            const auto& seq = sequences[pick];
            Tensor frames = Tensor::from({static_cast<int64_t>(seq.size()) / in_dim, in_dim}, seq);
            Tensor e = model.encode(frames);
            std::vector<int> codes = model.nearest_codes(e);
            for (int idx : codes) {
                ++usage[idx];
                ++model.usage_counters()[idx];
            }
            stash.insert(stash.end(), e.data(), e.data() + e.size());
            stash_rows += e.dim(0);
            Tensor e_q = model.quantize_straight_through(e, codes);
            Tensor decoded = model.decode_pose(e_q);
            VqLossParts parts;
            Tensor target = slice_rows(frames, 0, decoded.dim(0));
            Tensor loss = model.vq_loss(decoded, target, e, codes, &parts);
            batch_parts.total += parts.total;
            batch_parts.rec += parts.rec;
            batch_parts.rec_pos += parts.rec_pos;
            batch_parts.rec_vel += parts.rec_vel;
            batch_parts.rec_acc += parts.rec_acc;
            batch_parts.codebook += parts.codebook;
            batch_parts.commit += parts.commit;
            loss_acc = loss_acc.defined() ? add(loss_acc, loss) : loss;
        }
        Tensor loss = scale(loss_acc, 1.f / static_cast<float>(batch));
        if (!all_finite(loss)) throw NumericError("train_vqvae: loss diverged at step " + std::to_string(step));
        loss.backward();
        opt.step();

        // periodic dead-code reset from this step's encoder rows
        if (model.config().reset_dead_codes && (step + 1) % reset_every == 0 && stash_rows > 0) {
            Tensor cb = model.codebook();
            for (int64_t j = 0; j < n_codes; ++j) {
                if (usage[j] != 0) continue;
                int64_t donor = uniform_int(rng, 0, stash_rows - 1);
                std::copy_n(stash.data() + donor * c_dim, c_dim, cb.data() + j * c_dim);
            }
            std::fill(usage.begin(), usage.end(), 0);
        }

        float inv_b = 1.f / static_cast<float>(batch);
        batch_parts.total *= inv_b;
        batch_parts.rec *= inv_b;
        batch_parts.rec_pos *= inv_b;
        batch_parts.rec_vel *= inv_b;
        batch_parts.rec_acc *= inv_b;
        batch_parts.codebook *= inv_b;
        batch_parts.commit *= inv_b;
        stats.loss_curve.push_back(batch_parts.total);
        stats.parts_curve.push_back(batch_parts);
    }
    if (state) {
        state->step = cfg.steps;
        state->adam = opt.export_state();
        state->usage_since_reset = usage;
    }

    // distinct codes hit across the training set with final weights
    {
        NoGradGuard ng;
        std::vector<char> used(n_codes, 0);
        for (const auto& seq : sequences) {
            Tensor frames = Tensor::from({static_cast<int64_t>(seq.size()) / in_dim, in_dim}, seq);
            for (int idx : model.nearest_codes(model.encode(frames))) used[idx] = 1;
        }
        stats.codes_used = std::count(used.begin(), used.end(), 1);
    }
    return stats;
}

VqTrainStats train_velocity_branch(VqVaeModel& model,
                                   const std::vector<std::vector<float>>& lower_sequences,
                                   const std::vector<std::vector<float>>& velocity_targets,
                                   const VqTrainConfig& cfg, VqTrainState* state) {
    if (!model.has_velocity_branch()) throw ConfigError("train_velocity_branch: upper model");
    if (lower_sequences.size() != velocity_targets.size())
        throw DataError("train_velocity_branch: sequence/target count mismatch");
    const int64_t in_dim = model.config().in_dim;
    Adam opt(model.velocity_params(), cfg.adam);
    int64_t start_step = 0;
    if (state) {
        if (!state->adam.empty()) opt.import_state(state->adam);
        start_step = state->step;
    }
    const int64_t batch =
        std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(lower_sequences.size()));
    VqTrainStats stats;

    for (int64_t step = start_step; step < cfg.steps; ++step) {
        RngEngine rng = step_rng(cfg.seed, static_cast<uint64_t>(step), /*salt=*/1);
        auto picks = sample_distinct(lower_sequences.size(), batch, rng);
        opt.zero_grad();
        Tensor loss_acc;
        for (size_t i : picks) {
            const auto& seq = lower_sequences[i];
            Tensor frames = Tensor::from({static_cast<int64_t>(seq.size()) / in_dim, in_dim}, seq);
            Tensor e;
            std::vector<int> codes;
            {
                NoGradGuard ng;  // encoder and codebook are frozen in this phase
                e = model.encode(frames);
                codes = model.nearest_codes(e);
            }
            Tensor e_q = model.quantize_straight_through(Tensor::from(e.shape(), e.values()), codes);
            Tensor vhat = model.decode_velocity(e_q);
            const auto& vt = velocity_targets[i];
            Tensor target = Tensor::from({static_cast<int64_t>(vt.size()) / 3, 3}, vt);
            target = slice_rows(target, 0, vhat.dim(0));
            // same reconstruction form as the pose loss, applied to velocities
            Tensor loss = add(l1_loss(vhat, target),
                              add(scale(l1_loss(temporal_diff(vhat), temporal_diff(target)),
                                        model.config().alpha1),
                                  scale(l1_loss(temporal_diff(temporal_diff(vhat)),
                                                temporal_diff(temporal_diff(target))),
                                        model.config().alpha2)));
            loss_acc = loss_acc.defined() ? add(loss_acc, loss) : loss;
        }
        Tensor loss = scale(loss_acc, 1.f / static_cast<float>(batch));
        if (!all_finite(loss))
            throw NumericError("train_velocity_branch: loss diverged at step " + std::to_string(step));
        loss.backward();
        opt.step();
        stats.loss_curve.push_back(loss.item());
    }
    if (state) {
        state->step = cfg.steps;
        state->adam = opt.export_state();
    }
    return stats;
}

Tensor motion_to_tensor(const MotionSequence& p) {
    return Tensor::from({p.t(), p.joints * 3}, p.frames);
}

CodeSequence encode_to_codes(const VqVaeModel& upper_model, const VqVaeModel& lower_model,
                             const MotionSequence& normalized, const HalfBodySplit& split) {
    if (upper_model.config().downsample != lower_model.config().downsample)
        throw ConfigError("encode_to_codes: models disagree on downsample rate");
    NoGradGuard ng;
    auto [up, lo] = split_half_bodies(normalized, split);
    CodeSequence cs;
    cs.step = upper_model.config().downsample;
    cs.fps = normalized.fps;
    cs.upper = upper_model.nearest_codes(upper_model.encode(motion_to_tensor(up)));
    cs.lower = lower_model.nearest_codes(lower_model.encode(motion_to_tensor(lo)));
    if (cs.upper.size() != cs.lower.size()) throw DataError("encode_to_codes: length mismatch");
    return cs;
}

}  // namespace choreo
