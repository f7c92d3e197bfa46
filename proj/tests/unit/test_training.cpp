#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "jumpdiff/corpus.hpp"
#include "jumpdiff/losses.hpp"
#include "jumpdiff/metrics.hpp"
#include "jumpdiff/training.hpp"

using namespace jumpdiff;

namespace {

const ConvNetConfig kTinyCfg{4, 6, 2, 3};

Corpus tiny_corpus(std::uint64_t seed, std::size_t utterances, DurationMixture mix = {}) {
    CorpusConfig cfg;
    cfg.dimension = kTinyCfg.dim;
    cfg.num_phones = 3;
    cfg.num_silence = 0;
    cfg.silence_prob = 0.0;
    cfg.utterances = utterances;
    cfg.min_phones = 2;
    cfg.max_phones = 4;
    cfg.durations = mix;
    RandomStream rng = RandomStream(seed).fork("corpus");
    return gen_corpus(cfg, rng);
}

}  // namespace

TEST_CASE("zero epochs leave the models untouched") {
    const Corpus corpus = tiny_corpus(1, 4);
    ConvLocationNet loc(kTinyCfg, RandomStream(10));
    ConvContentNet cont(kTinyCfg, RandomStream(11));
    const std::vector<double> loc_before(loc.parameters().begin(), loc.parameters().end());

    TrainConfig tc;
    tc.epochs = 0;
    const TrainingReport rep = train(corpus.utterances, loc, cont, NoiseSchedule{}, tc);
    CHECK(rep.epochs.empty());
    CHECK(std::equal(loc_before.begin(), loc_before.end(), loc.parameters().begin()));
}

TEST_CASE("training is deterministic under a fixed seed") {
    const Corpus corpus = tiny_corpus(2, 6);
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 99;
    tc.learning_rate = 1e-3;

    ConvLocationNet loc_a(kTinyCfg, RandomStream(20)), loc_b(kTinyCfg, RandomStream(20));
    ConvContentNet cont_a(kTinyCfg, RandomStream(21)), cont_b(kTinyCfg, RandomStream(21));
    const TrainingReport a = train(corpus.utterances, loc_a, cont_a, NoiseSchedule{}, tc);
    const TrainingReport b = train(corpus.utterances, loc_b, cont_b, NoiseSchedule{}, tc);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t e = 0; e < a.epochs.size(); ++e) {
        CHECK(a.epochs[e].location_loss == b.epochs[e].location_loss);
        CHECK(a.epochs[e].content_loss == b.epochs[e].content_loss);
    }
    CHECK(std::equal(loc_a.parameters().begin(), loc_a.parameters().end(),
                     loc_b.parameters().begin()));
}

TEST_CASE("one small-step epoch on a fixed batch strictly decreases the batch loss") {
    const Corpus corpus = tiny_corpus(3, 1);
    const Utterance& u = corpus.utterances[0];
    const NoiseSchedule sched;

    RandomStream rng(30);
    std::vector<TrainSample> batch;
    for (int i = 0; i < 6; ++i) batch.push_back(draw_train_sample(u, sched, kDefaultTMin, rng));

    ConvLocationNet loc(kTinyCfg, RandomStream(31));
    auto batch_loss = [&] {
        double acc = 0.0;
        for (const auto& s : batch)
            acc += location_loss(loc.forward(s.x_minus, s.mu_minus, DiffusionTime{s.t}), s.slot);
        return acc;
    };

    const double before = batch_loss();
    loc.zero_gradients();
    for (const auto& s : batch) {
        const auto logits = loc.forward(s.x_minus, s.mu_minus, DiffusionTime{s.t});
        loc.backward(location_loss_grad(logits, s.slot));
    }
    AdamOptimizer opt(loc.parameters().size(), 1e-4);
    opt.step(loc.parameters(), loc.gradients());
    CHECK(batch_loss() < before);
}

TEST_CASE("single-deletable-position corpus drives location loss to zero") {
    // one phone of two frames: the corrupted state has exactly one deletable
    // column, so the slot distribution over the single remaining frame is
    // forced and the loss collapses quickly
    CorpusConfig cfg;
    cfg.dimension = kTinyCfg.dim;
    cfg.num_phones = 1;
    cfg.num_silence = 0;
    cfg.utterances = 4;
    cfg.min_phones = 1;
    cfg.max_phones = 1;
    cfg.durations = DurationMixture{{1.0}, {{false, 2.0, 0.0}}};
    RandomStream rng = RandomStream(4).fork("corpus");
    const Corpus corpus = gen_corpus(cfg, rng);

    ConvLocationNet loc(kTinyCfg, RandomStream(40));
    ConvContentNet cont(kTinyCfg, RandomStream(41));
    TrainConfig tc;
    tc.epochs = 200;
    tc.seed = 5;
    tc.learning_rate = 1e-3;
    const TrainingReport rep = train(corpus.utterances, loc, cont, NoiseSchedule{}, tc);
    CHECK(rep.epochs.back().location_loss < 0.01);
}

TEST_CASE("regression baseline predicts per-phone means clamped at one") {
    SECTION("constant corpus") {
        const DurationMixture constant{{1.0}, {{false, 5.0, 0.0}}};
        const Corpus corpus = tiny_corpus(6, 10, constant);
        const RegressionDurationBaseline base(corpus.utterances);
        for (int id = 0; id < 3; ++id) CHECK(base.predict(id) == Catch::Approx(5.0));
    }
    SECTION("bimodal corpus predicts near the mean") {
        const Corpus corpus = tiny_corpus(7, 400);
        const RegressionDurationBaseline base(corpus.utterances);
        for (int id = 0; id < 3; ++id) CHECK(base.predict(id) == Catch::Approx(6.0).margin(0.2));
    }
    SECTION("never below one frame") {
        const DurationMixture unit{{1.0}, {{false, 1.0, 0.0}}};
        const Corpus corpus = tiny_corpus(8, 5, unit);
        const RegressionDurationBaseline base(corpus.utterances);
        CHECK(base.predict(0) >= 1.0);
        CHECK(base.predict(999) >= 1.0);  // unseen phone falls back to the global mean
    }
}

TEST_CASE("draw_train_sample masks the content input in place") {
    const Corpus corpus = tiny_corpus(9, 2);
    const NoiseSchedule sched;
    RandomStream rng(90);
    const TrainSample s = draw_train_sample(corpus.utterances[0], sched, kDefaultTMin, rng);
    REQUIRE(s.x_masked.length() == s.mu_sub.length());
    CHECK(s.x_masked.length() == s.x_minus.length() + 1);
    for (std::size_t d = 0; d < s.x_masked.dim(); ++d) CHECK(s.x_masked(d, s.slot) == 0.0);
    CHECK(s.slot >= 1);
}
