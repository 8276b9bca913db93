#pragma once

// Deterministic stand-ins for real corpora and encoder output, used by the
// test suites and the disrank-synth tool.

#include "disrank/dataset.hpp"
#include "disrank/embedding_store.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace disrank::synthetic {

/// Pseudo-random vector in [-1, 1)^dim seeded from a hash of `text`. Values
/// are float-representable so they survive an EMBS round trip unchanged.
std::vector<double> fake_embedding(std::string_view text, std::uint32_t dim);

/// Store with "<id>#1" / "<id>#2" keys from the two contexts of each pair.
EmbeddingStore fake_store(std::span<const UsePair> pairs, std::uint32_t dim);

struct Corpus {
    std::vector<UsePair> pairs;
    std::vector<JudgmentRecord> judgments;
};

/// `n` pairs spread round-robin over `languages`, each judged by 2-5
/// annotators on the 1-4 scale.
Corpus make_corpus(std::size_t n, std::span<const std::string> languages, std::uint64_t seed);

struct RegressionFixture {
    std::vector<LabeledInstance> instances;
    EmbeddingStore store;
    std::vector<double> clean_target; ///< affine part of each label, before noise
};

/// Contexts get distinct texts and fake_embedding vectors. Labels are an
/// affine function of the concatenated pair feature plus
/// Gaussian noise: y = 1.5 + w.x + noise_sigma * N(0, 1), with
/// w ~ N(0, 1/(2 dim)) so that w.x has variance about 1/3.
RegressionFixture make_affine_fixture(std::size_t n, std::uint32_t dim, double noise_sigma,
                                      std::uint64_t seed);

} // namespace disrank::synthetic
