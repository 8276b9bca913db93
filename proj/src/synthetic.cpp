#include "disrank/synthetic.hpp"

#include "disrank/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <tuple>

namespace disrank::synthetic {

std::vector<double> fake_embedding(std::string_view text, std::uint32_t dim) {
    SplitMix64 rng(fnv1a64(text));
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = static_cast<double>(static_cast<float>(rng.uniform(-1.0, 1.0)));
    }
    return v;
}

EmbeddingStore fake_store(std::span<const UsePair> pairs, std::uint32_t dim) {
    EmbeddingStore store(dim);
    for (const auto& p : pairs) {
        store.insert(context_key(p.instance_id, 1), fake_embedding(p.context1, dim));
        store.insert(context_key(p.instance_id, 2), fake_embedding(p.context2, dim));
    }
    return store;
}

Corpus make_corpus(std::size_t n, std::span<const std::string> languages, std::uint64_t seed) {
    static constexpr std::string_view kWords[] = {
        "bank", "river", "money", "plant", "green", "factory", "light", "heavy", "bright",
        "record", "music", "history", "spring", "season", "water", "cell", "prison", "phone"};
    constexpr std::size_t kWordCount = std::size(kWords);
    SplitMix64 rng(seed);
    auto sentence = [&](std::string_view lemma) {
        std::string s;
        const auto len = 4 + rng.below(8);
        const auto target = rng.below(len);
        for (std::uint64_t i = 0; i < len; ++i) {
            if (!s.empty()) {
                s += ' ';
            }
            s += i == target ? lemma : kWords[rng.below(kWordCount)];
        }
        return std::pair{s, static_cast<std::int64_t>(target)};
    };

    Corpus c;
    for (std::size_t i = 0; i < n; ++i) {
        UsePair p;
        p.instance_id = fmt::format("inst{:04}", i);
        p.lemma = std::string(kWords[rng.below(kWordCount)]);
        p.language = languages.empty() ? std::string("en") : languages[i % languages.size()];
        std::tie(p.context1, p.target_index1) = sentence(p.lemma);
        std::tie(p.context2, p.target_index2) = sentence(p.lemma);

        // A per-pair "true" relatedness; annotators scatter around it.
        const double centre = rng.uniform(1.0, 4.0);
        const double spread = rng.uniform(0.0, 1.5);
        const auto annotators = 2 + rng.below(4);
        for (std::uint64_t a = 0; a < annotators; ++a) {
            const double raw = centre + spread * rng.normal();
            const int j = static_cast<int>(std::lround(std::clamp(raw, 1.0, 4.0)));
            c.judgments.push_back({p.instance_id, fmt::format("ann{}", a), j});
        }
        c.pairs.push_back(std::move(p));
    }
    return c;
}

RegressionFixture make_affine_fixture(std::size_t n, std::uint32_t dim, double noise_sigma,
                                      std::uint64_t seed) {
    SplitMix64 rng(seed);
    const std::size_t width = 2ULL * dim;
    std::vector<double> w(width);
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(width));
    for (auto& x : w) {
        x = w_scale * rng.normal();
    }

    RegressionFixture f{{}, EmbeddingStore(dim), {}};
    for (std::size_t i = 0; i < n; ++i) {
        LabeledInstance li;
        li.pair.instance_id = fmt::format("syn{:05}", i);
        li.pair.language = (i % 2 == 0) ? "xx" : "yy";
        li.pair.context1 = fmt::format("synthetic context {} seed {} first", i, seed);
        li.pair.context2 = fmt::format("synthetic context {} seed {} second", i, seed);
        auto e1 = fake_embedding(li.pair.context1, dim);
        auto e2 = fake_embedding(li.pair.context2, dim);
        double clean = 1.5;
        for (std::uint32_t k = 0; k < dim; ++k) {
            clean += w[k] * e1[k] + w[dim + k] * e2[k];
        }
        li.mean_disagreement = clean + noise_sigma * rng.normal();
        li.num_judgments = 2;
        f.store.insert(context_key(li.pair.instance_id, 1), std::move(e1));
        f.store.insert(context_key(li.pair.instance_id, 2), std::move(e2));
        f.clean_target.push_back(clean);
        f.instances.push_back(std::move(li));
    }
    return f;
}

} // namespace disrank::synthetic
