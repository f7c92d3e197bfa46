#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "jumpdiff/alignment.hpp"
#include "jumpdiff/rng.hpp"
#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// One duration component: a point mass or a rounded Gaussian (clamped >= 1
// when sampled).
struct DurationComponent {
    bool gaussian = false;
    double value = 3.0;   // point value, or mean when gaussian
    double stddev = 0.0;

    void validate(const std::string& field) const {
        if (value < 1.0)
            throw std::invalid_argument(field + ".value must be >= 1, got " + std::to_string(value));
        if (gaussian && stddev < 0.0)
            throw std::invalid_argument(field + ".stddev must be >= 0");
    }
};

struct DurationMixture {
    std::vector<double> weights{0.5, 0.5};
    std::vector<DurationComponent> components{{false, 3.0, 0.0}, {false, 9.0, 0.0}};

    void validate(const std::string& field) const {
        if (weights.empty() || weights.size() != components.size())
            throw std::invalid_argument(field + ": weights and components must be nonempty and equal-sized");
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument(field + ".weights must be nonnegative");
            total += w;
        }
        if (total <= 0.0) throw std::invalid_argument(field + ".weights must not all be zero");
        for (std::size_t i = 0; i < components.size(); ++i)
            components[i].validate(field + ".components[" + std::to_string(i) + "]");
    }

    std::size_t sample(RandomStream& rng) const {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = rng.real01() * total;
        std::size_t pick = weights.size() - 1;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (u < weights[i]) {
                pick = i;
                break;
            }
            u -= weights[i];
        }
        const auto& c = components[pick];
        if (!c.gaussian) return static_cast<std::size_t>(std::llround(c.value));
        const double v = std::round(c.value + c.stddev * rng.normal());
        return static_cast<std::size_t>(std::max(1.0, v));
    }
};

struct CorpusConfig {
    std::size_t dimension = 16;
    std::size_t num_phones = 8;    // regular inventory
    std::size_t num_silence = 1;
    double jitter_std = 0.1;       // frame noise around prototypes, shared by all phones
    double silence_scale = 0.01;   // silence prototype magnitude
    double min_regular_energy = 0.5;
    double silence_threshold = 0.25;
    DurationMixture durations;
    DurationMixture silence_durations;
    double silence_prob = 0.0;     // chance of a silence phone between words
    std::size_t word_min = 2, word_max = 3;
    std::size_t utterances = 200;
    std::size_t min_phones = 5, max_phones = 12;  // regular phones per utterance

    void validate() const {
        if (dimension == 0) throw std::invalid_argument("corpus.dimension must be positive");
        if (num_phones == 0) throw std::invalid_argument("corpus.num_phones must be positive");
        if (jitter_std < 0.0) throw std::invalid_argument("corpus.jitter_std must be >= 0");
        durations.validate("corpus.durations");
        silence_durations.validate("corpus.silence_durations");
        if (silence_prob < 0.0 || silence_prob > 1.0)
            throw std::invalid_argument("corpus.silence_prob must lie in [0,1]");
        if (word_min == 0 || word_max < word_min)
            throw std::invalid_argument("corpus.word_min/word_max must satisfy 1 <= min <= max");
        if (utterances == 0) throw std::invalid_argument("corpus.utterances must be positive");
        if (min_phones == 0 || max_phones < min_phones)
            throw std::invalid_argument("corpus.min_phones/max_phones must satisfy 1 <= min <= max");
        if (silence_prob > 0.0 && num_silence == 0)
            throw std::invalid_argument("corpus.num_silence must be positive when silence_prob > 0");
    }
};

// Phone prototypes plus which ids are silence. Frame jitter is Gaussian with
// one shared std so the per-column clean distribution is exactly
// N(prototype, jitter_std^2 I) for every phone.
struct PhoneInventory {
    Spectrogram prototypes;          // D x (num_phones + num_silence)
    std::vector<bool> silence_flag;  // per phone id
    double jitter_std = 0.1;

    std::size_t size() const { return prototypes.length(); }
    bool is_silence(int id) const { return silence_flag[static_cast<std::size_t>(id)]; }
};

struct Utterance {
    std::vector<int> phones;
    std::vector<std::size_t> durations;
    Spectrogram x0;  // clean frames
    Spectrogram mu;  // frame-level prior (prototype upsample)
    Alignment alignment;
};

struct Corpus {
    CorpusConfig config;
    PhoneInventory inventory;
    std::vector<Utterance> utterances;
};

namespace detail {

inline PhoneInventory gen_inventory(const CorpusConfig& cfg, RandomStream& rng) {
    const std::size_t total = cfg.num_phones + cfg.num_silence;
    Spectrogram protos(cfg.dimension, total);
    std::vector<bool> silent(total, false);
    for (std::size_t p = 0; p < cfg.num_phones; ++p) {
        // Regular prototypes keep their energy above the floor so silence and
        // speech stay separable under the corpus threshold.
        for (int attempt = 0; attempt < 1000; ++attempt) {
            FrameColumn col(cfg.dimension);
            for (double& v : col) v = rng.normal();
            if (frame_energy(col) >= cfg.min_regular_energy) {
                protos.set_column(p, col);
                break;
            }
            if (attempt == 999)
                throw std::runtime_error("gen_inventory: could not draw a prototype above the energy floor");
        }
    }
    for (std::size_t s = 0; s < cfg.num_silence; ++s) {
        FrameColumn col(cfg.dimension);
        for (double& v : col) v = cfg.silence_scale * rng.normal();
        protos.set_column(cfg.num_phones + s, col);
        silent[cfg.num_phones + s] = true;
    }
    return {std::move(protos), std::move(silent), cfg.jitter_std};
}

inline Utterance gen_utterance(const CorpusConfig& cfg, const PhoneInventory& inv,
                               RandomStream& rng) {
    const std::size_t n_regular =
        cfg.min_phones + rng.index(cfg.max_phones - cfg.min_phones + 1);
    std::vector<int> phones;
    std::vector<std::size_t> durations;
    std::size_t emitted = 0;
    while (emitted < n_regular) {
        std::size_t word = cfg.word_min + rng.index(cfg.word_max - cfg.word_min + 1);
        word = std::min(word, n_regular - emitted);
        for (std::size_t i = 0; i < word; ++i) {
            phones.push_back(static_cast<int>(rng.index(cfg.num_phones)));
            durations.push_back(cfg.durations.sample(rng));
        }
        emitted += word;
        if (emitted < n_regular && cfg.silence_prob > 0.0 && rng.real01() < cfg.silence_prob) {
            phones.push_back(static_cast<int>(cfg.num_phones + rng.index(cfg.num_silence)));
            durations.push_back(cfg.silence_durations.sample(rng));
        }
    }

    Spectrogram phone_means(cfg.dimension, phones.size());
    for (std::size_t i = 0; i < phones.size(); ++i)
        phone_means.set_column(i, inv.prototypes.column(static_cast<std::size_t>(phones[i])));
    Spectrogram mu = upsample_prior(phone_means, durations);
    Spectrogram x0 = mu;
    for (double& v : x0.raw()) v += cfg.jitter_std * rng.normal();
    Alignment align = Alignment::from_durations(phones, durations);
    return {std::move(phones), std::move(durations), std::move(x0), std::move(mu), std::move(align)};
}

}  // namespace detail

// Deterministic under the stream: per-utterance substreams keep generation
// order-independent.
inline Corpus gen_corpus(const CorpusConfig& cfg, RandomStream& rng) {
    cfg.validate();
    Corpus corpus;
    corpus.config = cfg;
    RandomStream inv_rng = rng.fork("inventory");
    corpus.inventory = detail::gen_inventory(cfg, inv_rng);
    corpus.utterances.reserve(cfg.utterances);
    for (std::size_t u = 0; u < cfg.utterances; ++u) {
        RandomStream utt_rng = rng.fork("utterance", u);
        corpus.utterances.push_back(detail::gen_utterance(cfg, corpus.inventory, utt_rng));
    }
    return corpus;
}

inline const std::vector<std::size_t>& duration_ground_truth(const Utterance& u) {
    return u.durations;
}

// Compressed phone-level prior of an utterance: one prototype column per
// phone, the start state of a reverse run.
inline Spectrogram phone_level_prior(const Utterance& u, const PhoneInventory& inv) {
    Spectrogram out(inv.prototypes.dim(), u.phones.size());
    for (std::size_t i = 0; i < u.phones.size(); ++i)
        out.set_column(i, inv.prototypes.column(static_cast<std::size_t>(u.phones[i])));
    return out;
}

}  // namespace jumpdiff
