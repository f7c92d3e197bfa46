#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "jumpdiff/corpus.hpp"
#include "jumpdiff/io.hpp"
#include "jumpdiff/nets.hpp"
#include "jumpdiff/sampler.hpp"
#include "jumpdiff/schedule.hpp"
#include "jumpdiff/training.hpp"

namespace jumpdiff {

// Complete experiment description. Flags override file values; the file plus
// the command line is the entire input of a run (no environment state, no
// wall-clock seeding).
struct RunConfig {
    std::optional<std::uint64_t> seed;
    CorpusConfig corpus;
    NoiseSchedule schedule;
    double t_min = kDefaultTMin;
    TrainConfig train;
    SamplerConfig sampler;
    ConvNetConfig location_net{16, 32, 3, 5};
    ConvNetConfig content_net{16, 32, 2, 3};
};

inline SamplerMode sampler_mode_from_string(const std::string& s) {
    if (s == "oneshot") return SamplerMode::oneshot;
    if (s == "tdd") return SamplerMode::tdd;
    if (s == "udd") return SamplerMode::udd;
    throw std::invalid_argument("sampler.mode must be one of oneshot|tdd|udd, got '" + s + "'");
}

inline Solver solver_from_string(const std::string& s) {
    if (s == "sde") return Solver::sde;
    if (s == "ode") return Solver::ode;
    throw std::invalid_argument("sampler.solver must be one of sde|ode, got '" + s + "'");
}

inline Allocation allocation_from_string(const std::string& s) {
    if (s == "sample") return Allocation::sample;
    if (s == "argmax") return Allocation::argmax;
    throw std::invalid_argument("sampler.alloc must be one of sample|argmax, got '" + s + "'");
}

inline const char* to_string(SamplerMode m) {
    switch (m) {
        case SamplerMode::oneshot: return "oneshot";
        case SamplerMode::tdd: return "tdd";
        case SamplerMode::udd: return "udd";
    }
    return "?";
}

inline const char* to_string(Solver s) { return s == Solver::sde ? "sde" : "ode"; }

inline const char* to_string(Allocation a) { return a == Allocation::sample ? "sample" : "argmax"; }

namespace detail {

inline ConvNetConfig net_config_from_json(const nlohmann::json& j, const ConvNetConfig& base,
                                          const std::string& field) {
    ConvNetConfig cfg = base;
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.kernel = j.value("kernel", cfg.kernel);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(field + ": " + e.what());
    }
    return cfg;
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("corpus")) cfg.corpus = corpus_config_from_json(j.at("corpus"));
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        const double b0 = s.value("beta0", cfg.schedule.beta0);
        const double b1 = s.value("beta1", cfg.schedule.beta1);
        cfg.schedule = NoiseSchedule(b0, b1);
        cfg.t_min = s.value("t_min", cfg.t_min);
        if (!(cfg.t_min > 0.0 && cfg.t_min < 1.0))
            throw std::invalid_argument("schedule.t_min must lie in (0,1)");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.lambda_prior = t.value("lambda_prior", cfg.train.lambda_prior);
        cfg.train.adam_beta1 = t.value("adam_beta1", cfg.train.adam_beta1);
        cfg.train.adam_beta2 = t.value("adam_beta2", cfg.train.adam_beta2);
        cfg.train.adam_eps = t.value("adam_eps", cfg.train.adam_eps);
        cfg.train.validate();
        if (t.contains("location"))
            cfg.location_net = detail::net_config_from_json(t.at("location"), cfg.location_net,
                                                            "train.location");
        if (t.contains("content"))
            cfg.content_net = detail::net_config_from_json(t.at("content"), cfg.content_net,
                                                           "train.content");
    }
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        if (s.contains("mode")) cfg.sampler.mode = sampler_mode_from_string(s.at("mode"));
        if (s.contains("solver")) cfg.sampler.solver = solver_from_string(s.at("solver"));
        if (s.contains("alloc")) cfg.sampler.allocation = allocation_from_string(s.at("alloc"));
        cfg.sampler.steps = s.value("steps", cfg.sampler.steps);
        cfg.sampler.temperature = s.value("temperature", cfg.sampler.temperature);
        cfg.sampler.sequential_recompute =
            s.value("sequential_recompute", cfg.sampler.sequential_recompute);
        cfg.sampler.validate();
    }
    cfg.train.t_min = cfg.t_min;
    cfg.sampler.t_min = cfg.t_min;
    cfg.location_net.dim = cfg.corpus.dimension;
    cfg.content_net.dim = cfg.corpus.dimension;
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    try {
        return run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: " + path.string() + ": " + e.what());
    }
}

}  // namespace jumpdiff
