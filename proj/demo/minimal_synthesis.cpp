// End-to-end library walkthrough: generate a tiny corpus, corrupt one
// utterance forward, then rebuild it with the oracle predictors and compare
// against the ground truth.

#include <cstdio>

#include "jumpdiff/jumpdiff.hpp"

using namespace jumpdiff;

int main() {
    CorpusConfig ccfg;
    ccfg.utterances = 4;
    ccfg.num_phones = 4;
    ccfg.min_phones = 3;
    ccfg.max_phones = 5;
    RandomStream rng(7);
    RandomStream corpus_rng = rng.fork("corpus");
    const Corpus corpus = gen_corpus(ccfg, corpus_rng);
    const Utterance& utt = corpus.utterances[0];
    std::printf("utterance 0: %zu phones, %zu frames\n", utt.phones.size(), utt.x0.length());

    NoiseSchedule sched;
    RandomStream fw_rng = rng.fork("forward");
    const ForwardSample fs = forward_sample(utt.x0, utt.mu, utt.alignment, DiffusionTime{0.6},
                                            sched, fw_rng);
    std::printf("forward corruption at t=0.6 kept %zu frames; jump target slot %zu\n",
                fs.kept.size(), fs.target.slot);

    auto oracle = std::make_shared<OracleState>(
        utt.x0, protected_from_alignment(utt.alignment).indices());
    OracleLocationModel loc(oracle, OracleMode::mass);
    OracleContentModel cont(oracle, OracleMode::mass);
    AnalyticGaussianScore score(sched, ccfg.jitter_std * ccfg.jitter_std);

    SamplerConfig scfg;
    scfg.mode = SamplerMode::tdd;
    scfg.solver = Solver::ode;
    scfg.steps = 50;
    scfg.allocation = Allocation::argmax;
    RandomStream synth_rng = rng.fork("synth");
    const SynthesisResult result =
        synthesize(phone_level_prior(utt, corpus.inventory), utt.x0.length(), loc, cont, score,
                   sched, scfg, synth_rng);

    const auto durations = ancestor_counts(result.final_state, utt.phones.size());
    std::printf("synthesized %zu frames; per-phone durations:", result.x.length());
    for (std::size_t d : durations) std::printf(" %zu", d);
    std::printf("\n");

    const DtwResult path = dtw_path(utt.x0, result.x);
    std::printf("dtw cost vs ground truth: %.3f, path linearity %.4f\n", path.cost,
                path_linearity(path));
    return 0;
}
