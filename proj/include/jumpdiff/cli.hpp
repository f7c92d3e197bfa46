#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jumpdiff/config.hpp"
#include "jumpdiff/corpus.hpp"
#include "jumpdiff/forward.hpp"
#include "jumpdiff/io.hpp"
#include "jumpdiff/metrics.hpp"
#include "jumpdiff/models.hpp"
#include "jumpdiff/sampler.hpp"
#include "jumpdiff/score.hpp"
#include "jumpdiff/training.hpp"

namespace jumpdiff::cli {

namespace detail {

inline std::uint64_t require_seed(const std::optional<std::uint64_t>& flag_seed,
                                  const RunConfig& cfg) {
    if (flag_seed) return *flag_seed;
    if (cfg.seed) return *cfg.seed;
    throw std::invalid_argument("seed is required: pass --seed or set the config field 'seed'");
}

inline RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return load_run_config(path);
}

inline std::string synth_filename(std::size_t index) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "utt_%04zu_synth.jdsp", index);
    return buf;
}

inline std::string trace_filename(std::size_t index) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "utt_%04zu_trace.json", index);
    return buf;
}

struct PredictorBundle {
    std::unique_ptr<LocationModel> location;
    std::unique_ptr<ContentModel> content;
    std::shared_ptr<OracleState> oracle_state;  // set for oracle predictors
};

inline PredictorBundle make_predictors(const std::string& kind, const std::string& oracle_mode,
                                       const std::string& models_dir, const Utterance& u) {
    PredictorBundle b;
    if (kind == "uniform") {
        b.location = std::make_unique<UniformLocationModel>();
        b.content = std::make_unique<PriorContentModel>();
    } else if (kind == "oracle") {
        const OracleMode mode = [&] {
            if (oracle_mode == "earliest") return OracleMode::earliest;
            if (oracle_mode == "mass") return OracleMode::mass;
            throw std::invalid_argument("--oracle-mode must be earliest|mass, got '" + oracle_mode + "'");
        }();
        b.oracle_state = std::make_shared<OracleState>(
            u.x0, protected_from_alignment(u.alignment).indices());
        b.location = std::make_unique<OracleLocationModel>(b.oracle_state, mode);
        b.content = std::make_unique<OracleContentModel>(b.oracle_state, mode);
    } else if (kind == "trained") {
        if (models_dir.empty())
            throw std::invalid_argument("--models is required with --predictors trained");
        const std::filesystem::path dir(models_dir);
        b.location = std::make_unique<ConvLocationNet>(load_location_net(dir / "location.jdmp"));
        b.content = std::make_unique<ConvContentNet>(load_content_net(dir / "content.jdmp"));
    } else {
        throw std::invalid_argument("--predictors must be oracle|uniform|trained, got '" + kind + "'");
    }
    return b;
}

inline nlohmann::json trace_json(const SynthesisTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : trace.steps)
        steps.push_back({{"t", s.t},
                         {"length_before", s.length_before},
                         {"n_ins", s.n_ins},
                         {"slots", s.slots},
                         {"length_after", s.length_after}});
    return steps;
}

// ---- subcommand handlers ----

struct GenCorpusArgs {
    std::string out, config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> utterances;
    std::optional<double> silence_prob;
};

inline int run_gen_corpus(const GenCorpusArgs& a) {
    RunConfig cfg = load_config_or_default(a.config);
    const std::uint64_t seed = require_seed(a.seed, cfg);
    if (a.utterances) cfg.corpus.utterances = *a.utterances;
    if (a.silence_prob) cfg.corpus.silence_prob = *a.silence_prob;
    cfg.corpus.validate();
    RandomStream rng = RandomStream(seed).fork("corpus");
    const Corpus corpus = gen_corpus(cfg.corpus, rng);
    save_corpus(a.out, corpus, seed);
    std::size_t frames = 0;
    for (const auto& u : corpus.utterances) frames += u.x0.length();
    std::cout << "wrote " << corpus.utterances.size() << " utterances (" << frames
              << " frames) to " << a.out << "\n";
    return 0;
}

struct CorruptArgs {
    std::string corpus, out, config;
    std::size_t utt = 0;
    double t = 0.5;
    std::optional<std::uint64_t> seed;
};

inline int run_corrupt(const CorruptArgs& a) {
    RunConfig cfg = load_config_or_default(a.config);
    const std::uint64_t seed = require_seed(a.seed, cfg);
    const Corpus corpus = load_corpus(a.corpus);
    if (a.utt >= corpus.utterances.size())
        throw std::invalid_argument("--utt " + std::to_string(a.utt) + " out of range (corpus has " +
                                    std::to_string(corpus.utterances.size()) + " utterances)");
    const Utterance& u = corpus.utterances[a.utt];
    RandomStream rng = RandomStream(seed).fork("corrupt", a.utt);
    const DiffusionTime t{a.t};
    const ForwardSample fs = forward_sample(u.x0, u.mu, u.alignment, t, cfg.schedule, rng, cfg.t_min);

    std::filesystem::create_directories(a.out);
    const std::filesystem::path dir(a.out);
    write_jdsp(dir / "xt.jdsp", fs.x_t);
    write_jdsp(dir / "x_minus_k.jdsp", fs.target.x_minus_k);
    Spectrogram clean_col(fs.x_t.dim(), 1);
    clean_col.set_column(0, fs.target.clean_column);
    write_jdsp(dir / "clean_column.jdsp", clean_col);
    nlohmann::json sidecar{{"t", a.t}, {"kept", fs.kept}, {"s_target", fs.target.slot}};
    std::ofstream os(dir / "corrupt.json");
    os << sidecar.dump(2) << "\n";
    std::cout << "corrupted utterance " << a.utt << " at t=" << a.t << ": kept " << fs.kept.size()
              << "/" << u.x0.length() << " frames, target slot " << fs.target.slot << "\n";
    return 0;
}

struct TrainArgs {
    std::string corpus, out, config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
};

inline int run_train(const TrainArgs& a) {
    RunConfig cfg = load_config_or_default(a.config);
    const std::uint64_t seed = require_seed(a.seed, cfg);
    const Corpus corpus = load_corpus(a.corpus);
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.lr) cfg.train.learning_rate = *a.lr;
    if (a.batch) cfg.train.batch_size = *a.batch;
    cfg.train.seed = seed;
    cfg.train.validate();
    cfg.location_net.dim = corpus.config.dimension;
    cfg.content_net.dim = corpus.config.dimension;

    ConvLocationNet loc(cfg.location_net, RandomStream(seed).fork("init-location"));
    ConvContentNet cont(cfg.content_net, RandomStream(seed).fork("init-content"));
    const TrainingReport report = train(corpus.utterances, loc, cont, cfg.schedule, cfg.train);

    std::filesystem::create_directories(a.out);
    const std::filesystem::path dir(a.out);
    save_location_net(dir / "location.jdmp", loc);
    save_content_net(dir / "content.jdmp", cont);
    write_training_report(dir / "report.csv", report);
    if (!report.epochs.empty())
        std::cout << "trained " << report.epochs.size() << " epochs; final losses loc="
                  << report.epochs.back().location_loss
                  << " cont=" << report.epochs.back().content_loss << "\n";
    else
        std::cout << "trained 0 epochs; models saved at initialization\n";
    return 0;
}

struct SynthArgs {
    std::string corpus, out, config;
    std::optional<std::size_t> utt;  // absent = all utterances
    std::optional<std::uint64_t> seed;
    std::string mode = "tdd", solver = "ode", alloc = "sample";
    std::size_t steps = 50;
    double temperature = 1.0;
    double speed = 1.0;
    bool sequential = false;
    std::string predictors = "oracle", oracle_mode = "mass", models;
};

inline int run_synth_one(const SynthArgs& a, const RunConfig& cfg, const Corpus& corpus,
                         std::size_t index, std::uint64_t seed) {
    const Utterance& u = corpus.utterances[index];
    if (!(a.speed > 0.0)) throw std::invalid_argument("--speed must be > 0");
    const std::size_t target_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(u.x0.length()) / a.speed));
    if (a.predictors == "oracle" && a.speed != 1.0)
        throw std::invalid_argument("--predictors oracle requires --speed 1 (no ground truth beyond it)");

    SamplerConfig sampler = cfg.sampler;
    sampler.mode = sampler_mode_from_string(a.mode);
    sampler.solver = solver_from_string(a.solver);
    sampler.allocation = allocation_from_string(a.alloc);
    sampler.steps = a.steps;
    sampler.temperature = a.temperature;
    sampler.sequential_recompute = a.sequential;
    sampler.seed = seed;
    sampler.validate();

    PredictorBundle preds = make_predictors(a.predictors, a.oracle_mode, a.models, u);
    AnalyticGaussianScore score(cfg.schedule,
                                corpus.config.jitter_std * corpus.config.jitter_std);
    RandomStream rng = RandomStream(seed).fork("synth", index);
    const Spectrogram phone_means = phone_level_prior(u, corpus.inventory);
    const SynthesisResult result = synthesize(phone_means, target_len, *preds.location,
                                              *preds.content, score, cfg.schedule, sampler, rng);

    const std::filesystem::path dir(a.out);
    write_jdsp(dir / synth_filename(index), result.x);
    nlohmann::json trace{{"utterance", index},
                         {"seed", seed},
                         {"speed", a.speed},
                         {"mode", a.mode},
                         {"solver", a.solver},
                         {"alloc", a.alloc},
                         {"steps", a.steps},
                         {"temperature", a.temperature},
                         {"predictors", a.predictors},
                         {"target_length", target_len},
                         {"final_length", result.x.length()},
                         {"durations", ancestor_counts(result.final_state, u.phones.size())},
                         {"trace", trace_json(result.trace)}};
    std::ofstream os(dir / trace_filename(index));
    os << trace.dump(2) << "\n";
    return 0;
}

inline int run_synth(const SynthArgs& a) {
    RunConfig cfg = load_config_or_default(a.config);
    const std::uint64_t seed = require_seed(a.seed, cfg);
    const Corpus corpus = load_corpus(a.corpus);
    std::filesystem::create_directories(a.out);
    if (a.utt) {
        if (*a.utt >= corpus.utterances.size())
            throw std::invalid_argument("--utt " + std::to_string(*a.utt) + " out of range");
        run_synth_one(a, cfg, corpus, *a.utt, seed);
        std::cout << "synthesized utterance " << *a.utt << " to " << a.out << "\n";
    } else {
        for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
            run_synth_one(a, cfg, corpus, i, seed);
        std::cout << "synthesized " << corpus.utterances.size() << " utterances to " << a.out << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string corpus, hyp, out, heatmaps;
    std::optional<double> silence_threshold;
};

inline int run_eval(const EvalArgs& a) {
    const Corpus corpus = load_corpus(a.corpus);
    double threshold;
    if (a.silence_threshold) {
        threshold = *a.silence_threshold;
    } else {
        std::vector<const Spectrogram*> refs;
        for (const auto& u : corpus.utterances) refs.push_back(&u.x0);
        threshold = energy_percentile(refs, 0.10);
    }

    std::ofstream os(a.out);
    if (!os) throw std::invalid_argument("eval: cannot open output file " + a.out);
    os << "utterance,metric,value\n";
    char buf[96];
    auto emit = [&](std::size_t utt, const char* metric, double value) {
        std::snprintf(buf, sizeof buf, "%zu,%s,%.9g\n", utt, metric, value);
        os << buf;
    };

    if (!a.heatmaps.empty()) std::filesystem::create_directories(a.heatmaps);
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
        const std::filesystem::path hyp_path = std::filesystem::path(a.hyp) / synth_filename(i);
        if (!std::filesystem::exists(hyp_path)) continue;
        const Spectrogram hyp = read_jdsp(hyp_path);
        const Spectrogram& ref = corpus.utterances[i].x0;
        Spectrogram cost_matrix;
        const DtwResult dtw = dtw_path(ref, hyp, a.heatmaps.empty() ? nullptr : &cost_matrix);
        emit(i, "dtw_cost", dtw.cost);
        emit(i, "path_r2", path_linearity(dtw));
        emit(i, "max_vertical_run", static_cast<double>(max_vertical_run(dtw)));
        emit(i, "silence_ratio_ref", silence_ratio(ref, threshold).ratio);
        emit(i, "silence_ratio_hyp", silence_ratio(hyp, threshold).ratio);
        if (!a.heatmaps.empty()) {
            char name[48];
            std::snprintf(name, sizeof name, "utt_%04zu_dtw.pgm", i);
            write_pgm(std::filesystem::path(a.heatmaps) / name, cost_matrix);
        }
        ++evaluated;
    }
    std::cout << "evaluated " << evaluated << " utterances (silence threshold " << threshold
              << ") -> " << a.out << "\n";
    return 0;
}

int run_selftest();

}  // namespace detail

// Entry point. Exit codes: 0 success, 1 validation/usage error, 2 runtime or
// training error.
inline int run(std::vector<std::string> args) {
    CLI::App app{"jump-diffusion synthesis of variable-length spectrogram sequences"};
    app.require_subcommand(1);

    detail::GenCorpusArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--config", gen.config, "JSON run config");
    gen_cmd->add_option("--seed", gen.seed, "rng seed");
    gen_cmd->add_option("--utterances", gen.utterances, "override utterance count");
    gen_cmd->add_option("--silence-prob", gen.silence_prob, "override silence probability");

    detail::CorruptArgs cor;
    auto* cor_cmd = app.add_subcommand("corrupt", "forward-corrupt one utterance");
    cor_cmd->add_option("--corpus", cor.corpus, "corpus directory")->required();
    cor_cmd->add_option("--out", cor.out, "output directory")->required();
    cor_cmd->add_option("--config", cor.config, "JSON run config");
    cor_cmd->add_option("--utt", cor.utt, "utterance index")->required();
    cor_cmd->add_option("--t", cor.t, "diffusion time in [0,1]")->required();
    cor_cmd->add_option("--seed", cor.seed, "rng seed");

    detail::TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "train the location/content predictors");
    tr_cmd->add_option("--corpus", tr.corpus, "corpus directory")->required();
    tr_cmd->add_option("--out", tr.out, "output directory")->required();
    tr_cmd->add_option("--config", tr.config, "JSON run config");
    tr_cmd->add_option("--seed", tr.seed, "rng seed");
    tr_cmd->add_option("--epochs", tr.epochs, "override epoch count");
    tr_cmd->add_option("--lr", tr.lr, "override learning rate");
    tr_cmd->add_option("--batch", tr.batch, "override batch size");

    detail::SynthArgs sy;
    auto* sy_cmd = app.add_subcommand("synth", "synthesize utterances");
    sy_cmd->add_option("--corpus", sy.corpus, "corpus directory")->required();
    sy_cmd->add_option("--out", sy.out, "output directory")->required();
    sy_cmd->add_option("--config", sy.config, "JSON run config");
    sy_cmd->add_option("--utt", sy.utt, "utterance index (default: all)");
    sy_cmd->add_option("--seed", sy.seed, "rng seed");
    sy_cmd->add_option("--mode", sy.mode, "oneshot|tdd|udd");
    sy_cmd->add_option("--solver", sy.solver, "sde|ode");
    sy_cmd->add_option("--steps", sy.steps, "reverse grid steps");
    sy_cmd->add_option("--alloc", sy.alloc, "sample|argmax");
    sy_cmd->add_option("--temperature", sy.temperature, "softmax temperature");
    sy_cmd->add_option("--speed", sy.speed, "target length = round(true length / speed)");
    sy_cmd->add_flag("--sequential", sy.sequential, "re-query location model per insertion");
    sy_cmd->add_option("--predictors", sy.predictors, "oracle|uniform|trained");
    sy_cmd->add_option("--oracle-mode", sy.oracle_mode, "earliest|mass");
    sy_cmd->add_option("--models", sy.models, "trained model directory");

    detail::EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "alignment/silence metrics against a corpus");
    ev_cmd->add_option("--corpus", ev.corpus, "corpus directory")->required();
    ev_cmd->add_option("--hyp", ev.hyp, "directory of synthesized utterances")->required();
    ev_cmd->add_option("--out", ev.out, "output CSV file")->required();
    ev_cmd->add_option("--heatmaps", ev.heatmaps, "directory for DTW cost-matrix images");
    ev_cmd->add_option("--silence-threshold", ev.silence_threshold,
                       "energy threshold (default: 10th percentile of the corpus)");

    auto* st_cmd = app.add_subcommand("selftest", "run the built-in invariant suite");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen_cmd->parsed()) return detail::run_gen_corpus(gen);
        if (cor_cmd->parsed()) return detail::run_corrupt(cor);
        if (tr_cmd->parsed()) return detail::run_train(tr);
        if (sy_cmd->parsed()) return detail::run_synth(sy);
        if (ev_cmd->parsed()) return detail::run_eval(ev);
        if (st_cmd->parsed()) return detail::run_selftest();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

namespace detail {

// Fast invariant sweep over the core operations; independent of the unit
// suite so a packaged binary can check itself.
inline int run_selftest() {
    std::size_t checks = 0;
    auto expect = [&](bool ok, const char* what) {
        ++checks;
        if (!ok) throw std::runtime_error(std::string("selftest failed: ") + what);
    };

    expect(schedule_length(100, 20, DiffusionTime{1.0}) == 20, "schedule endpoint");
    expect(schedule_length(100, 20, DiffusionTime{0.1}) == 100, "schedule identity region");
    expect(schedule_length(100, 20, DiffusionTime{0.55}) == 60, "schedule midpoint");
    expect(schedule_length(73, 10, DiffusionTime{0.37}) == 54, "schedule worked example");

    NoiseSchedule sched;
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const KernelCoeffs c = vp_coefficients(sched, DiffusionTime{t});
        expect(std::abs(c.sigma * c.sigma + std::exp(-cum_beta(sched, DiffusionTime{t})) - 1.0) < 1e-12,
               "kernel variance identity");
        expect(std::abs(c.a + c.m - 1.0) < 1e-15, "kernel convexity");
    }

    RandomStream rng(1234);
    Spectrogram x(4, 7);
    for (double& v : x.raw()) v = rng.normal();
    for (std::size_t k = 1; k < x.length(); ++k) {
        const FrameColumn col = x.column_copy(k);
        expect(insert_column(delete_column(x, k), col, k) == x, "delete/insert round trip");
    }

    const std::vector<double> probs{0.5, 0.3, 0.2};
    auto slots = allocate_insertions(probs, 10, Allocation::argmax, rng);
    expect(std::count(slots.begin(), slots.end(), std::size_t{1}) == 5 &&
               std::count(slots.begin(), slots.end(), std::size_t{2}) == 3 &&
               std::count(slots.begin(), slots.end(), std::size_t{3}) == 2,
           "largest-remainder apportionment");

    expect(std::abs(wasserstein1({3, 9}, {6}) - 3.0) < 1e-12, "wasserstein point mass");
    const DtwResult self_path = dtw_path(x, x);
    expect(self_path.cost == 0.0 && path_linearity(self_path) == 1.0, "dtw self alignment");

    std::cout << "selftest: " << checks << " checks passed\n";
    return 0;
}

}  // namespace detail

}  // namespace jumpdiff::cli
