// choreo: music-to-dance pipeline CLI. Subcommands cover corpus generation,
// the three training stages, generation, evaluation, and inspection.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical abort.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "choreo/actor_critic.hpp"
#include "choreo/checkpoint.hpp"
#include "choreo/config.hpp"
#include "choreo/gpt.hpp"
#include "choreo/metrics.hpp"
#include "choreo/motion.hpp"
#include "choreo/music.hpp"
#include "choreo/vqvae.hpp"

namespace fs = std::filesystem;
using namespace choreo;

namespace {

struct CommonOpts {
    std::string config_path;
    uint64_t seed_override = 0;
    bool has_seed = false;
};

PipelineConfig resolve_config(const CommonOpts& opts) {
    PipelineConfig cfg = opts.config_path.empty() ? PipelineConfig::desk_profile()
                                                  : load_pipeline_config(opts.config_path);
    if (opts.has_seed) cfg.seed = opts.seed_override;
    return cfg;
}

void log_config(const PipelineConfig& cfg) {
    std::cout << "config hash " << config_hash(cfg) << "\n" << config_to_json(cfg) << "\n";
}

std::string seq_stem(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "seq_%04d", index);
    return buf;
}

struct Corpus {
    std::vector<MotionSequence> motions;
    std::vector<MusicFeatureTrack> music;
    std::vector<std::vector<int64_t>> beats;
    std::vector<std::string> stems;
};

Corpus load_corpus(const std::string& dir) {
    Corpus c;
    if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir);
    std::vector<std::string> stems;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".motn") stems.push_back(e.path().stem().string());
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) throw DataError("no .motn sequences in " + dir);
    for (const auto& stem : stems) {
        fs::path base = fs::path(dir) / stem;
        c.motions.push_back(read_motion(base.string() + ".motn"));
        c.music.push_back(read_music(base.string() + ".mfeat"));
        c.beats.push_back(read_beats(base.string() + ".beats.json"));
        c.music.back().beats = c.beats.back();
        c.stems.push_back(stem);
    }
    return c;
}

HalfBodySplit split_for(const MotionSequence& m) {
    if (m.joints == 24) return default_smpl_split();
    HalfBodySplit s;
    for (int j = 0; j < m.joints; ++j)
        (j < (m.joints + 1) / 2 ? s.lower : s.upper).push_back(j);
    s.root_index = 0;
    return s;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path);
    f << header << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
        f << "\n";
    }
}

// ---------------------------------------------------------------------------
// gen-synth
// ---------------------------------------------------------------------------
int cmd_gen_synth(const CommonOpts& common, const std::string& out_dir) {
    PipelineConfig cfg = resolve_config(common);
    log_config(cfg);
    fs::create_directories(out_dir);
    auto corpus = generate_synthetic(cfg.synth_spec());
    nlohmann::json manifest = nlohmann::json::array();
    for (size_t i = 0; i < corpus.size(); ++i) {
        std::string stem = seq_stem(static_cast<int>(i));
        fs::path base = fs::path(out_dir) / stem;
        write_motion(base.string() + ".motn", corpus[i].motion);
        MusicFeatureTrack music =
            generate_synthetic_music(corpus[i], cfg.music_dim, cfg.seed + 7777 + i);
        write_music(base.string() + ".mfeat", music);
        write_beats(base.string() + ".beats.json", corpus[i].beats);
        manifest.push_back({{"stem", stem},
                            {"frames", corpus[i].motion.t()},
                            {"beat_period", corpus[i].beat_period}});
    }
    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    mf << nlohmann::json{{"seed", cfg.seed}, {"config_hash", config_hash(cfg)},
                         {"sequences", manifest}}
              .dump(2)
       << "\n";
    std::cout << "wrote " << corpus.size() << " sequences to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train-vqvae
// ---------------------------------------------------------------------------
struct PreparedHalves {
    std::vector<std::vector<float>> upper, lower, velocity;
    HalfBodySplit split;
    float fps = 30.f;
};

PreparedHalves prepare_halves(const Corpus& corpus) {
    PreparedHalves out;
    out.split = split_for(corpus.motions[0]);
    out.fps = corpus.motions[0].fps;
    for (const auto& m : corpus.motions) {
        auto [norm, vel] = normalize_root(m, out.split.root_index);
        auto [up, lo] = split_half_bodies(norm, out.split);
        out.upper.push_back(up.frames);
        out.lower.push_back(lo.frames);
        out.velocity.push_back(vel.values);
    }
    return out;
}

int cmd_train_vqvae(const CommonOpts& common, const std::string& corpus_dir,
                    const std::string& out_dir, bool resume) {
    PipelineConfig cfg = resolve_config(common);
    log_config(cfg);
    Corpus corpus = load_corpus(corpus_dir);
    PreparedHalves halves = prepare_halves(corpus);
    fs::create_directories(out_dir);
    const std::string hash = config_hash(cfg);

    auto train_half = [&](BodyHalf half, const std::vector<std::vector<float>>& seqs,
                          const std::string& name) {
        VqVaeModel model(cfg.vq_config(half, halves.split),
                         cfg.seed + (half == BodyHalf::upper ? 11 : 12));
        VqTrainConfig tc = cfg.vq_train_config();
        VqTrainState state;
        fs::path ckpt = fs::path(out_dir) / (name + ".ckpt");
        if (resume && fs::exists(ckpt)) {
            CheckpointData data = load_checkpoint(ckpt.string());
            state.adam = unpack_params(data, model.main_params());
            state.step = data.step;
            std::cout << name << ": resuming at step " << state.step << "\n";
        }
        auto stats = train_vqvae(model, seqs, tc, &state);
        if (half == BodyHalf::lower) {
            VqTrainState vstate;
            auto vstats = train_velocity_branch(model, halves.lower, halves.velocity,
                                                cfg.velocity_train_config(), &vstate);
            std::vector<std::vector<double>> rows;
            for (size_t i = 0; i < vstats.loss_curve.size(); ++i)
                rows.push_back({static_cast<double>(i), vstats.loss_curve[i]});
            write_csv((fs::path(out_dir) / (name + "_velocity_loss.csv")).string(), "step,loss",
                      rows);
        }
        CheckpointData data = pack_params(name, hash, tc.steps, model.registry().entries());
        save_checkpoint(ckpt.string(), data);
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < stats.loss_curve.size(); ++i) {
            const auto& p = stats.parts_curve[i];
            rows.push_back({static_cast<double>(i), p.total, p.rec, p.codebook, p.commit});
        }
        write_csv((fs::path(out_dir) / (name + "_loss.csv")).string(),
                  "step,total,rec,codebook,commit", rows);
        std::cout << name << ": final loss " << stats.loss_curve.back() << ", codes used "
                  << stats.codes_used << "/" << cfg.vqvae.codebook_size << "\n";
    };
    train_half(BodyHalf::upper, halves.upper, "vqvae_upper");
    train_half(BodyHalf::lower, halves.lower, "vqvae_lower");
    return 0;
}

// shared loader for later stages
struct LoadedVqvae {
    VqVaeModel upper, lower;
    HalfBodySplit split;
    LoadedVqvae(const PipelineConfig& cfg, const HalfBodySplit& s, const std::string& ckpt_dir)
        : upper(cfg.vq_config(BodyHalf::upper, s), 0),
          lower(cfg.vq_config(BodyHalf::lower, s), 0),
          split(s) {
        fs::path up = fs::path(ckpt_dir) / "vqvae_upper.ckpt";
        fs::path lo = fs::path(ckpt_dir) / "vqvae_lower.ckpt";
        if (!fs::exists(up) || !fs::exists(lo))
            throw DataError("stage order: train-vqvae must run first (missing " + up.string() +
                            " or " + lo.string() + ")");
        unpack_params(load_checkpoint(up.string()), upper.registry().entries());
        unpack_params(load_checkpoint(lo.string()), lower.registry().entries());
    }
};

std::vector<CodedSequence> build_coded_corpus(const PipelineConfig& cfg, const Corpus& corpus,
                                              const LoadedVqvae& vq) {
    std::vector<CodedSequence> coded;
    for (size_t i = 0; i < corpus.motions.size(); ++i) {
        auto [norm, vel] = normalize_root(corpus.motions[i], vq.split.root_index);
        CodedSequence cs;
        cs.codes = encode_to_codes(vq.upper, vq.lower, norm, vq.split);
        cs.music = downsample_features(corpus.music[i], cfg.vqvae.downsample, PoolMode::mean);
        coded.push_back(std::move(cs));
    }
    return coded;
}

// ---------------------------------------------------------------------------
// train-gpt
// ---------------------------------------------------------------------------
int cmd_train_gpt(const CommonOpts& common, const std::string& corpus_dir,
                  const std::string& ckpt_dir, bool resume) {
    PipelineConfig cfg = resolve_config(common);
    log_config(cfg);
    Corpus corpus = load_corpus(corpus_dir);
    HalfBodySplit split = split_for(corpus.motions[0]);
    LoadedVqvae vq(cfg, split, ckpt_dir);
    auto coded = build_coded_corpus(cfg, corpus, vq);
    save_code_corpus((fs::path(ckpt_dir) / "code_corpus.json").string(), corpus.stems,
                     [&] {
                         std::vector<CodeSequence> cs;
                         for (const auto& c : coded) cs.push_back(c.codes);
                         return cs;
                     }());

    GptModel gpt(cfg.gpt_config(), cfg.seed + 21);
    GptTrainConfig tc = cfg.gpt_train_config();
    GptTrainState state;
    fs::path ckpt = fs::path(ckpt_dir) / "gpt.ckpt";
    if (resume && fs::exists(ckpt)) {
        CheckpointData data = load_checkpoint(ckpt.string());
        state.adam = unpack_params(data, gpt.all_params());
        state.step = data.step;
        std::cout << "gpt: resuming at step " << state.step << "\n";
    }
    auto stats = train_gpt(gpt, coded, tc, &state);
    save_checkpoint(ckpt.string(),
                    pack_params("gpt", config_hash(cfg), tc.steps, gpt.all_params()));
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < stats.loss_curve.size(); ++i)
        rows.push_back({static_cast<double>(i), stats.loss_curve[i]});
    write_csv((fs::path(ckpt_dir) / "gpt_loss.csv").string(), "step,loss", rows);
    double acc = next_code_accuracy(gpt, coded);
    std::cout << "gpt: final loss " << stats.loss_curve.back() << ", next-code accuracy " << acc
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// finetune-ac
// ---------------------------------------------------------------------------
int cmd_finetune_ac(const CommonOpts& common, const std::string& corpus_dir,
                    const std::string& ckpt_dir) {
    PipelineConfig cfg = resolve_config(common);
    log_config(cfg);
    Corpus corpus = load_corpus(corpus_dir);
    HalfBodySplit split = split_for(corpus.motions[0]);
    LoadedVqvae vq(cfg, split, ckpt_dir);

    fs::path gpt_ckpt = fs::path(ckpt_dir) / "gpt.ckpt";
    if (!fs::exists(gpt_ckpt))
        throw DataError("stage order: train-gpt must run before finetune-ac (missing " +
                        gpt_ckpt.string() + ")");
    GptModel gpt(cfg.gpt_config(), cfg.seed + 21);
    unpack_params(load_checkpoint(gpt_ckpt.string()), gpt.all_params());

    CriticModel critic(cfg.gpt.channels, cfg.gpt.heads, cfg.gpt.block_size, 3, cfg.gpt.dropout,
                       cfg.seed + 31);

    auto coded = build_coded_corpus(cfg, corpus, vq);
    std::vector<FinetuneSequence> fseqs;
    for (size_t i = 0; i < coded.size(); ++i) {
        FinetuneSequence fs_;
        fs_.music = coded[i].music;
        fs_.music_beats = corpus.beats[i];
        fs_.start_upper = coded[i].codes.upper.front();
        fs_.start_lower = coded[i].codes.lower.front();
        fs_.fps = corpus.motions[i].fps;
        fseqs.push_back(std::move(fs_));
    }
    FinetuneConfig fc = cfg.finetune_config(corpus.motions[0].fps);
    FinetuneState state;
    auto stats = finetune(gpt, critic, vq.upper, vq.lower, split, fseqs, fc, &state);

    save_checkpoint((fs::path(ckpt_dir) / "gpt_ac.ckpt").string(),
                    pack_params("gpt_ac", config_hash(cfg), fc.epochs, gpt.all_params()));
    save_checkpoint((fs::path(ckpt_dir) / "critic.ckpt").string(),
                    pack_params("critic", config_hash(cfg), fc.epochs, critic.all_params()));
    std::vector<std::vector<double>> rows;
    for (size_t e = 0; e < stats.epochs.size(); ++e) {
        const auto& s = stats.epochs[e];
        rows.push_back({static_cast<double>(e), s.mean_rb, s.mean_rc, s.mean_reward,
                        s.mean_ac_loss, s.mean_critic_loss});
    }
    write_csv((fs::path(ckpt_dir) / "finetune_rewards.csv").string(),
              "epoch,mean_rb,mean_rc,mean_reward,ac_loss,critic_loss", rows);
    std::cout << "finetune: mean reward " << stats.epochs.front().mean_reward << " -> "
              << stats.epochs.back().mean_reward << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------
int cmd_generate(const CommonOpts& common, const std::string& ckpt_dir,
                 const std::string& music_path, int64_t length, const std::string& start_codes,
                 uint64_t start_seed, const std::string& out_path, const std::string& trace_path,
                 bool use_ac) {
    PipelineConfig cfg = resolve_config(common);
    MusicFeatureTrack music = read_music(music_path);

    // a 24-joint default split matches the desk and full profiles
    MotionSequence probe;
    probe.joints = cfg.synth.joints;
    HalfBodySplit split = split_for(probe);
    LoadedVqvae vq(cfg, split, ckpt_dir);
    GptModel gpt(cfg.gpt_config(), cfg.seed + 21);
    fs::path gpt_ckpt = fs::path(ckpt_dir) / (use_ac ? "gpt_ac.ckpt" : "gpt.ckpt");
    if (!fs::exists(gpt_ckpt))
        throw DataError("stage order: missing GPT checkpoint " + gpt_ckpt.string());
    unpack_params(load_checkpoint(gpt_ckpt.string()), gpt.all_params());

    int start_u, start_l;
    if (!start_codes.empty()) {
        auto comma = start_codes.find(',');
        if (comma == std::string::npos)
            throw ConfigError("--start-codes expects 'upper,lower'");
        start_u = std::stoi(start_codes.substr(0, comma));
        start_l = std::stoi(start_codes.substr(comma + 1));
    } else {
        RngEngine rng(start_seed);
        start_u = static_cast<int>(uniform_int(rng, 0, cfg.vqvae.codebook_size - 1));
        start_l = static_cast<int>(uniform_int(rng, 0, cfg.vqvae.codebook_size - 1));
    }

    CodeStepFeatures steps = downsample_features(music, cfg.vqvae.downsample, PoolMode::mean);
    CodeSequence codes = generate(gpt, steps, start_u, start_l, length);
    MotionSequence out = decode_codes_to_motion(vq.upper, vq.lower, split, codes, music.fps);
    write_motion(out_path, out);
    if (!trace_path.empty()) {
        nlohmann::json trace{{"upper", codes.upper},
                             {"lower", codes.lower},
                             {"d", cfg.vqvae.downsample},
                             {"start", {start_u, start_l}}};
        std::ofstream f(trace_path, std::ios::trunc);
        f << trace.dump(2) << "\n";
    }
    std::cout << "generated " << out.t() << " frames (" << codes.length() << " code steps) to "
              << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
int cmd_evaluate(const CommonOpts& common, const std::string& generated_dir,
                 const std::string& reference_dir, const std::string& out_path) {
    PipelineConfig cfg = resolve_config(common);
    auto load_motions = [](const std::string& dir) {
        std::vector<MotionSequence> out;
        std::vector<std::vector<int64_t>> beats;
        if (!fs::is_directory(dir)) throw DataError("directory not found: " + dir);
        std::vector<std::string> stems;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".motn") stems.push_back(e.path().stem().string());
        std::sort(stems.begin(), stems.end());
        for (const auto& stem : stems) {
            fs::path base = fs::path(dir) / stem;
            out.push_back(read_motion(base.string() + ".motn"));
            std::string side = base.string() + ".beats.json";
            beats.push_back(fs::exists(side) ? read_beats(side) : std::vector<int64_t>{});
        }
        return std::make_pair(out, beats);
    };
    auto [gen, gen_beats] = load_motions(generated_dir);
    auto [ref, ref_beats] = load_motions(reference_dir);
    EvalReport report = evaluate_suite(gen, gen_beats, ref, cfg.eval_config());
    report.config_hash = config_hash(cfg);
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + out_path);
    f << eval_report_to_json(report) << "\n";
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < report.per_sequence_bas.size(); ++i)
        rows.push_back({static_cast<double>(i), report.per_sequence_bas[i]});
    write_csv(out_path + ".per_sequence.csv", "sequence,bas", rows);
    std::cout << eval_report_to_json(report) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// inspect-codebook
// ---------------------------------------------------------------------------
int cmd_inspect_codebook(const CommonOpts& common, const std::string& ckpt_dir,
                         const std::string& code_arg, int64_t repeat_steps,
                         const std::string& out_dir) {
    PipelineConfig cfg = resolve_config(common);
    MotionSequence probe;
    probe.joints = cfg.synth.joints;
    HalfBodySplit split = split_for(probe);
    LoadedVqvae vq(cfg, split, ckpt_dir);
    fs::create_directories(out_dir);

    std::vector<int> codes;
    if (code_arg == "all")
        for (int i = 0; i < cfg.vqvae.codebook_size; ++i) codes.push_back(i);
    else
        codes.push_back(std::stoi(code_arg));
    for (int c : codes)
        if (c < 0 || c >= cfg.vqvae.codebook_size)
            throw ConfigError("code index " + std::to_string(c) + " out of range");

    // interior region: skip the decoder's boundary receptive field
    const int64_t d = cfg.vqvae.downsample;
    const int64_t margin = 6 * d;
    std::vector<std::vector<double>> rows;
    for (int c : codes) {
        CodeSequence cs;
        cs.upper.assign(repeat_steps, c);
        cs.lower.assign(repeat_steps, c);
        cs.step = d;
        MotionSequence motion = decode_codes_to_motion(vq.upper, vq.lower, split, cs, 30.f);
        write_motion((fs::path(out_dir) / ("code_" + std::to_string(c) + ".motn")).string(),
                     motion);
        // the frozen-pose property lives on the root-relative pose; the root
        // path from the velocity branch would otherwise dominate
        MotionSequence pose = decode_codes_to_motion(vq.upper, vq.lower, split, cs, 30.f,
                                                     /*with_root=*/false);
        double max_disp = 0;
        int64_t lo = margin, hi = pose.t() - margin;
        for (int64_t t = lo + 1; t < hi; ++t)
            for (int64_t j = 0; j < pose.joints; ++j)
                for (int k = 0; k < 3; ++k)
                    max_disp = std::max(max_disp, std::abs(static_cast<double>(
                                                      pose.at(t, j, k) - pose.at(t - 1, j, k))));
        double usage_u = static_cast<double>(vq.upper.usage_counters()[c]);
        double usage_l = static_cast<double>(vq.lower.usage_counters()[c]);
        rows.push_back({static_cast<double>(c), max_disp, usage_u, usage_l});
    }
    write_csv((fs::path(out_dir) / "codebook_report.csv").string(),
              "code,interior_frame_displacement,usage_upper,usage_lower", rows);
    std::cout << "inspected " << codes.size() << " code(s) into " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// export-anim
// ---------------------------------------------------------------------------
int cmd_export_anim(const std::string& motion_path, const std::string& out_path) {
    MotionSequence m = read_motion(motion_path);
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + out_path);
    f << "frame,joint,x,y,z\n";
    for (int64_t t = 0; t < m.t(); ++t)
        for (int64_t j = 0; j < m.joints; ++j)
            f << t << "," << j << "," << m.at(t, j, 0) << "," << m.at(t, j, 1) << ","
              << m.at(t, j, 2) << "\n";
    std::cout << "exported " << m.t() * m.joints << " rows to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"music-to-dance pipeline: quantized pose codebooks, a cross-conditional "
                 "code transformer, actor-critic finetuning, and evaluation metrics"};
    app.require_subcommand(1);

    CommonOpts common;
    auto add_common = [&common](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "pipeline config JSON");
        sub->add_option("--seed", common.seed_override, "seed override")
            ->each([&common](const std::string&) { common.has_seed = true; });
    };

    std::string out_dir, corpus_dir, ckpt_dir, music_path, start_codes, out_path, trace_path;
    std::string code_arg = "all", generated_dir, reference_dir, motion_path;
    int64_t length = 8, repeat_steps = 16;
    uint64_t start_seed = 0;
    bool resume = false, use_ac = false;

    auto* gen_synth = app.add_subcommand("gen-synth", "write a synthetic motion/music corpus");
    add_common(gen_synth);
    gen_synth->add_option("--out", out_dir, "output directory")->required();

    auto* train_vq = app.add_subcommand("train-vqvae", "train both half-body pose VQ-VAEs");
    add_common(train_vq);
    train_vq->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train_vq->add_option("--out", ckpt_dir, "checkpoint directory")->required();
    train_vq->add_flag("--resume", resume, "continue from an existing checkpoint");

    auto* train_g = app.add_subcommand("train-gpt", "train the code transformer");
    add_common(train_g);
    train_g->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train_g->add_option("--ckpts", ckpt_dir, "checkpoint directory (VQ-VAEs live here)")
        ->required();
    train_g->add_flag("--resume", resume, "continue from an existing checkpoint");

    auto* ft = app.add_subcommand("finetune-ac", "actor-critic finetuning of the transformer");
    add_common(ft);
    ft->add_option("--corpus", corpus_dir, "corpus directory")->required();
    ft->add_option("--ckpts", ckpt_dir, "checkpoint directory")->required();

    auto* gen = app.add_subcommand("generate", "decode a dance for a music track");
    add_common(gen);
    gen->add_option("--ckpts", ckpt_dir, "checkpoint directory")->required();
    gen->add_option("--music", music_path, ".mfeat feature file")->required();
    gen->add_option("--length", length, "code steps to generate");
    gen->add_option("--start-codes", start_codes, "explicit 'upper,lower' start pair");
    gen->add_option("--start-seed", start_seed, "seed for random start codes");
    gen->add_option("--out", out_path, "output .motn path")->required();
    gen->add_option("--trace", trace_path, "optional code trace JSON");
    gen->add_flag("--ac", use_ac, "use the finetuned checkpoint");

    auto* ev = app.add_subcommand("evaluate", "metric suite between two motion directories");
    add_common(ev);
    ev->add_option("--generated", generated_dir, "generated motions")->required();
    ev->add_option("--reference", reference_dir, "reference motions")->required();
    ev->add_option("--out", out_path, "report JSON path")->required();

    auto* insp = app.add_subcommand("inspect-codebook", "decode repeated single codes");
    add_common(insp);
    insp->add_option("--ckpts", ckpt_dir, "checkpoint directory")->required();
    insp->add_option("--code", code_arg, "code index or 'all'");
    insp->add_option("--steps", repeat_steps, "repeated code steps per decode");
    insp->add_option("--out", out_dir, "output directory")->required();

    auto* exp = app.add_subcommand("export-anim", "dump joint trajectories to CSV");
    exp->add_option("--motion", motion_path, ".motn file")->required();
    exp->add_option("--out", out_path, "CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen_synth->parsed()) return cmd_gen_synth(common, out_dir);
        if (train_vq->parsed()) return cmd_train_vqvae(common, corpus_dir, ckpt_dir, resume);
        if (train_g->parsed()) return cmd_train_gpt(common, corpus_dir, ckpt_dir, resume);
        if (ft->parsed()) return cmd_finetune_ac(common, corpus_dir, ckpt_dir);
        if (gen->parsed())
            return cmd_generate(common, ckpt_dir, music_path, length, start_codes, start_seed,
                                out_path, trace_path, use_ac);
        if (ev->parsed()) return cmd_evaluate(common, generated_dir, reference_dir, out_path);
        if (insp->parsed())
            return cmd_inspect_codebook(common, ckpt_dir, code_arg, repeat_steps, out_dir);
        if (exp->parsed()) return cmd_export_anim(motion_path, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
