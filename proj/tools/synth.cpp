// Synthetic corpora and hash-seeded fake embeddings for demos and tests.

#include "disrank/dataset.hpp"
#include "disrank/embedding_store.hpp"
#include "disrank/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Generate synthetic instances/judgments and fake embedding stores",
                 "disrank-synth"};
    app.require_subcommand(1);

    std::size_t n = 40;
    std::vector<std::string> languages{"en", "de"};
    std::uint64_t seed = 7;
    std::string instances, judgments, out;
    std::uint32_t dim = disrank::kDefaultEmbeddingDim;

    auto* corpus = app.add_subcommand("corpus", "Write an instances TSV and a judgments TSV");
    corpus->add_option("--n", n, "Number of use pairs")->capture_default_str();
    corpus->add_option("--languages", languages, "Language tags")->delimiter(',')
        ->capture_default_str();
    corpus->add_option("--seed", seed, "Generator seed")->capture_default_str();
    corpus->add_option("--instances", instances, "Instances TSV to write")->required();
    corpus->add_option("--judgments", judgments, "Judgments TSV to write")->required();

    auto* embed = app.add_subcommand("embed", "Fake EMBS store keyed <id>#1/<id>#2");
    embed->add_option("--instances", instances, "Instances TSV")->required();
    embed->add_option("--out", out, "EMBS file to write")->required();
    embed->add_option("--dim", dim, "Embedding dimension")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*corpus) {
            const auto c = disrank::synthetic::make_corpus(n, languages, seed);
            disrank::write_instances(instances, c.pairs);
            disrank::write_judgments(judgments, c.judgments);
        } else {
            const auto pairs = disrank::parse_instances(instances);
            disrank::write_store(disrank::synthetic::fake_store(pairs, dim), out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
