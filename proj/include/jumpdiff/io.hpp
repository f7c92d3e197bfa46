#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jumpdiff/corpus.hpp"
#include "jumpdiff/nets.hpp"
#include "jumpdiff/spectrogram.hpp"
#include "jumpdiff/training.hpp"

namespace jumpdiff {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    if (!is) throw std::runtime_error("unexpected end of file");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::string(buf, 4) != std::string(magic, 4))
        throw std::runtime_error(what + ": bad magic");
}

}  // namespace detail

// Binary spectrogram: "JDSP", u32 D, u32 L, then D*L little-endian f32
// row-major by frequency bin.
inline void write_jdsp(const std::filesystem::path& path, const Spectrogram& x) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_jdsp: cannot open " + path.string());
    os.write("JDSP", 4);
    detail::put_u32(os, static_cast<std::uint32_t>(x.dim()));
    detail::put_u32(os, static_cast<std::uint32_t>(x.length()));
    for (std::size_t d = 0; d < x.dim(); ++d)
        for (std::size_t l = 0; l < x.length(); ++l)
            detail::put_f32(os, static_cast<float>(x(d, l)));
    if (!os) throw std::runtime_error("write_jdsp: write failed for " + path.string());
}

inline Spectrogram read_jdsp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_jdsp: cannot open " + path.string());
    detail::expect_magic(is, "JDSP", "read_jdsp");
    const std::uint32_t dim = detail::get_u32(is);
    const std::uint32_t len = detail::get_u32(is);
    if (dim == 0) throw std::runtime_error("read_jdsp: zero dimension");
    Spectrogram x(dim, len);
    for (std::size_t d = 0; d < dim; ++d)
        for (std::size_t l = 0; l < len; ++l) {
            const double v = detail::get_f32(is);
            if (!std::isfinite(v)) throw std::runtime_error("read_jdsp: non-finite entry");
            x(d, l) = v;
        }
    return x;
}

// Min-max normalized grayscale export, one row per frequency bin.
inline void write_pgm(const std::filesystem::path& path, const Spectrogram& x) {
    if (x.empty()) throw std::invalid_argument("write_pgm: empty spectrogram");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : x.raw()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path.string());
    os << "P5\n" << x.length() << " " << x.dim() << "\n255\n";
    for (std::size_t d = 0; d < x.dim(); ++d)
        for (std::size_t l = 0; l < x.length(); ++l) {
            const double norm = (x(d, l) - lo) / span;
            os.put(static_cast<char>(static_cast<unsigned char>(norm * 255.0 + 0.5)));
        }
}

// Model checkpoint: "JDMP", u32 version, JSON meta block, then a shape table
// of named little-endian f32 tensors.
struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<double> data;
};

inline void write_jdmp(const std::filesystem::path& path, const nlohmann::json& meta,
                       const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_jdmp: cannot open " + path.string());
    os.write("JDMP", 4);
    detail::put_u32(os, 1);  // version
    const std::string meta_str = meta.dump();
    detail::put_u32(os, static_cast<std::uint32_t>(meta_str.size()));
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        detail::put_u32(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
        std::size_t count = 1;
        for (std::uint32_t d : t.dims) {
            detail::put_u32(os, d);
            count *= d;
        }
        if (count != t.data.size()) throw std::invalid_argument("write_jdmp: shape/data mismatch");
        for (double v : t.data) detail::put_f32(os, static_cast<float>(v));
    }
    if (!os) throw std::runtime_error("write_jdmp: write failed for " + path.string());
}

struct Checkpoint {
    nlohmann::json meta;
    std::vector<NamedTensor> tensors;
};

inline Checkpoint read_jdmp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_jdmp: cannot open " + path.string());
    detail::expect_magic(is, "JDMP", "read_jdmp");
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1) throw std::runtime_error("read_jdmp: unsupported version " + std::to_string(version));
    const std::uint32_t meta_len = detail::get_u32(is);
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), meta_len);
    Checkpoint ck;
    ck.meta = nlohmann::json::parse(meta_str);
    const std::uint32_t count = detail::get_u32(is);
    ck.tensors.resize(count);
    for (auto& t : ck.tensors) {
        const std::uint32_t name_len = detail::get_u32(is);
        t.name.resize(name_len);
        is.read(t.name.data(), name_len);
        const std::uint32_t rank = detail::get_u32(is);
        t.dims.resize(rank);
        std::size_t cells = 1;
        for (auto& d : t.dims) {
            d = detail::get_u32(is);
            cells *= d;
        }
        t.data.resize(cells);
        for (double& v : t.data) v = detail::get_f32(is);
    }
    if (!is) throw std::runtime_error("read_jdmp: truncated file");
    return ck;
}

namespace detail {

inline nlohmann::json net_meta(const char* kind, const ConvNetConfig& cfg) {
    return {{"kind", kind},
            {"dim", cfg.dim},
            {"hidden", cfg.hidden},
            {"layers", cfg.layers},
            {"kernel", cfg.kernel}};
}

inline ConvNetConfig net_config_from_meta(const nlohmann::json& meta) {
    ConvNetConfig cfg;
    cfg.dim = meta.at("dim").get<std::size_t>();
    cfg.hidden = meta.at("hidden").get<std::size_t>();
    cfg.layers = meta.at("layers").get<std::size_t>();
    cfg.kernel = meta.at("kernel").get<std::size_t>();
    return cfg;
}

inline void restore_params(Trainable& model, const Checkpoint& ck) {
    if (ck.tensors.size() != 1 || ck.tensors[0].name != "params")
        throw std::runtime_error("checkpoint: expected a single 'params' tensor");
    auto params = model.parameters();
    if (ck.tensors[0].data.size() != params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    std::copy(ck.tensors[0].data.begin(), ck.tensors[0].data.end(), params.begin());
}

}  // namespace detail

inline void save_location_net(const std::filesystem::path& path, const ConvLocationNet& net) {
    NamedTensor t{"params",
                  {static_cast<std::uint32_t>(net.parameters().size())},
                  {net.parameters().begin(), net.parameters().end()}};
    write_jdmp(path, detail::net_meta("conv_location", net.config()), {t});
}

inline void save_content_net(const std::filesystem::path& path, const ConvContentNet& net) {
    NamedTensor t{"params",
                  {static_cast<std::uint32_t>(net.parameters().size())},
                  {net.parameters().begin(), net.parameters().end()}};
    write_jdmp(path, detail::net_meta("conv_content", net.config()), {t});
}

inline ConvLocationNet load_location_net(const std::filesystem::path& path) {
    const Checkpoint ck = read_jdmp(path);
    if (ck.meta.at("kind") != "conv_location")
        throw std::runtime_error("load_location_net: wrong checkpoint kind");
    ConvLocationNet net(detail::net_config_from_meta(ck.meta), RandomStream(0));
    detail::restore_params(net, ck);
    return net;
}

inline ConvContentNet load_content_net(const std::filesystem::path& path) {
    const Checkpoint ck = read_jdmp(path);
    if (ck.meta.at("kind") != "conv_content")
        throw std::runtime_error("load_content_net: wrong checkpoint kind");
    ConvContentNet net(detail::net_config_from_meta(ck.meta), RandomStream(0));
    detail::restore_params(net, ck);
    return net;
}

inline void write_training_report(const std::filesystem::path& path, const TrainingReport& rep) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_training_report: cannot open " + path.string());
    os << "epoch,loc_loss,cont_loss\n";
    char buf[96];
    for (std::size_t e = 0; e < rep.epochs.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e, rep.epochs[e].location_loss,
                      rep.epochs[e].content_loss);
        os << buf;
    }
}

// ---- corpus persistence: one JDSP per utterance plus a JSON manifest ----

inline nlohmann::json duration_mixture_json(const DurationMixture& m) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m.components)
        comps.push_back({{"type", c.gaussian ? "gaussian" : "point"},
                         {"value", c.value},
                         {"stddev", c.stddev}});
    return {{"weights", m.weights}, {"components", comps}};
}

inline DurationMixture duration_mixture_from_json(const nlohmann::json& j) {
    DurationMixture m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.components.clear();
    for (const auto& c : j.at("components")) {
        DurationComponent dc;
        dc.gaussian = c.at("type").get<std::string>() == "gaussian";
        dc.value = c.at("value").get<double>();
        dc.stddev = c.value("stddev", 0.0);
        m.components.push_back(dc);
    }
    return m;
}

inline nlohmann::json corpus_config_json(const CorpusConfig& c) {
    return {{"dimension", c.dimension},
            {"num_phones", c.num_phones},
            {"num_silence", c.num_silence},
            {"jitter_std", c.jitter_std},
            {"silence_scale", c.silence_scale},
            {"min_regular_energy", c.min_regular_energy},
            {"silence_threshold", c.silence_threshold},
            {"durations", duration_mixture_json(c.durations)},
            {"silence_durations", duration_mixture_json(c.silence_durations)},
            {"silence_prob", c.silence_prob},
            {"word_min", c.word_min},
            {"word_max", c.word_max},
            {"utterances", c.utterances},
            {"min_phones", c.min_phones},
            {"max_phones", c.max_phones}};
}

inline CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
    CorpusConfig c;
    c.dimension = j.value("dimension", c.dimension);
    c.num_phones = j.value("num_phones", c.num_phones);
    c.num_silence = j.value("num_silence", c.num_silence);
    c.jitter_std = j.value("jitter_std", c.jitter_std);
    c.silence_scale = j.value("silence_scale", c.silence_scale);
    c.min_regular_energy = j.value("min_regular_energy", c.min_regular_energy);
    c.silence_threshold = j.value("silence_threshold", c.silence_threshold);
    if (j.contains("durations")) c.durations = duration_mixture_from_json(j.at("durations"));
    if (j.contains("silence_durations"))
        c.silence_durations = duration_mixture_from_json(j.at("silence_durations"));
    c.silence_prob = j.value("silence_prob", c.silence_prob);
    c.word_min = j.value("word_min", c.word_min);
    c.word_max = j.value("word_max", c.word_max);
    c.utterances = j.value("utterances", c.utterances);
    c.min_phones = j.value("min_phones", c.min_phones);
    c.max_phones = j.value("max_phones", c.max_phones);
    c.validate();
    return c;
}

inline std::string utterance_filename(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "utt_%04zu.jdsp", index);
    return buf;
}

inline void save_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                        std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["config"] = corpus_config_json(corpus.config);
    nlohmann::json protos = nlohmann::json::array();
    for (std::size_t p = 0; p < corpus.inventory.size(); ++p) {
        auto col = corpus.inventory.prototypes.column(p);
        protos.push_back(std::vector<double>(col.begin(), col.end()));
    }
    manifest["prototypes"] = protos;
    manifest["silence_flags"] = corpus.inventory.silence_flag;
    nlohmann::json utts = nlohmann::json::array();
    for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
        utts.push_back({{"id", u},
                        {"file", utterance_filename(u)},
                        {"phones", corpus.utterances[u].phones},
                        {"durations", corpus.utterances[u].durations}});
        write_jdsp(dir / utterance_filename(u), corpus.utterances[u].x0);
    }
    manifest["utterances"] = utts;
    std::ofstream os(dir / "manifest.json");
    if (!os) throw std::runtime_error("save_corpus: cannot open manifest in " + dir.string());
    os << manifest.dump(2) << "\n";
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw std::runtime_error("load_corpus: cannot open manifest in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(is);
    Corpus corpus;
    corpus.config = corpus_config_from_json(manifest.at("config"));
    const auto& protos = manifest.at("prototypes");
    if (protos.empty()) throw std::runtime_error("load_corpus: no prototypes");
    Spectrogram prototypes(corpus.config.dimension, protos.size());
    for (std::size_t p = 0; p < protos.size(); ++p) {
        const auto col = protos[p].get<std::vector<double>>();
        prototypes.set_column(p, col);
    }
    corpus.inventory = {std::move(prototypes),
                        manifest.at("silence_flags").get<std::vector<bool>>(),
                        corpus.config.jitter_std};
    for (const auto& entry : manifest.at("utterances")) {
        Utterance u{entry.at("phones").get<std::vector<int>>(),
                    entry.at("durations").get<std::vector<std::size_t>>(),
                    read_jdsp(dir / entry.at("file").get<std::string>()),
                    Spectrogram(corpus.config.dimension, 0),
                    Alignment::from_durations(entry.at("phones").get<std::vector<int>>(),
                                              entry.at("durations").get<std::vector<std::size_t>>())};
        Spectrogram phone_means(corpus.config.dimension, u.phones.size());
        for (std::size_t i = 0; i < u.phones.size(); ++i)
            phone_means.set_column(i,
                                   corpus.inventory.prototypes.column(static_cast<std::size_t>(u.phones[i])));
        u.mu = upsample_prior(phone_means, u.durations);
        if (u.mu.length() != u.x0.length())
            throw std::runtime_error("load_corpus: durations inconsistent with spectrogram length");
        corpus.utterances.push_back(std::move(u));
    }
    return corpus;
}

}  // namespace jumpdiff
