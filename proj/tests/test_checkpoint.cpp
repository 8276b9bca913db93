#include "disrank/checkpoint.hpp"
#include "disrank/error.hpp"
#include "disrank/optim.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

#include <charconv>
#include <cstring>

using namespace disrank;

namespace {

nn::NetConfig random_config(SplitMix64& rng) {
    nn::NetConfig c;
    c.input_width = 1 + rng.below(12);
    c.hidden_widths.assign(1 + rng.below(3), 0);
    for (auto& w : c.hidden_widths) w = 1 + rng.below(6);
    c.dropout_p = rng.uniform(0.0, 0.6);
    return c;
}

nn::RegressionNet trained_net(const nn::NetConfig& config, SplitMix64& rng, optim::AdamW& opt,
                              int steps) {
    auto net = nn::RegressionNet::initialize(config, rng.next());
    for (int s = 0; s < steps; ++s) {
        Matrix x(4, config.input_width);
        for (auto& v : x.data()) v = rng.normal();
        auto fwd = net.forward(x, rng);
        const auto g = net.backward(fwd.cache, std::vector<double>(4, 0.25));
        opt.step(net.parameters(), g.tensors);
    }
    return net;
}

Manifest sample_manifest() {
    Manifest m;
    m.set("seed", "42");
    m.set("note", "tab\\there");
    return m;
}

} // namespace

TEST(Manifest, RoundTripAndValidation) {
    const auto text = "# comment\n\na=1\nb=two words\r\n";
    const auto m = Manifest::parse(text);
    EXPECT_EQ(m.require("a"), "1");
    EXPECT_EQ(m.require("b"), "two words");
    EXPECT_FALSE(m.get("c").has_value());
    EXPECT_THROW(m.require("c"), FormatError);
    EXPECT_EQ(Manifest::parse(m.serialize()), m);
    EXPECT_THROW(Manifest::parse("a=1\na=2\n"), ValidationError);
    EXPECT_THROW(Manifest::parse("novalue\n"), ValidationError);
    EXPECT_THROW(Manifest::parse("=1\n"), ValidationError);
    Manifest w;
    EXPECT_THROW(w.set("a=b", "1"), ValidationError);
    EXPECT_THROW(w.set("a", "line\nbreak"), ValidationError);
}

TEST(FormatExact, RoundTripsRandomDoubles) {
    SplitMix64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
        const auto s = format_exact(v);
        double back = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        EXPECT_EQ(back, v) << s;
    }
    EXPECT_EQ(format_exact(0.5), "0.5");
    EXPECT_EQ(format_exact(1e-4), "0.0001");
}

TEST(NetDescription, RoundTrip) {
    SplitMix64 rng(6);
    for (int i = 0; i < 50; ++i) {
        const auto c = random_config(rng);
        Manifest m;
        describe_net(c, m);
        const auto back = net_config_from(m);
        EXPECT_EQ(back.input_width, c.input_width);
        EXPECT_EQ(back.hidden_widths, c.hidden_widths);
        EXPECT_EQ(back.dropout_p, c.dropout_p);
        EXPECT_EQ(back.bn_epsilon, c.bn_epsilon);
        EXPECT_EQ(back.bn_momentum, c.bn_momentum);
    }
    EXPECT_THROW(net_config_from(Manifest{}), FormatError);
}

TEST(Checkpoint, WriteReadWriteIsByteIdentical) {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const auto config = random_config(rng);
        optim::AdamW opt({.learning_rate = rng.uniform(1e-5, 1e-2)});
        const auto net = trained_net(config, rng, opt, static_cast<int>(rng.below(4)));
        const bool with_optim = trial % 2 == 0;
        const auto bytes = encode_checkpoint(net, sample_manifest(), with_optim ? &opt : nullptr);

        auto ck = decode_checkpoint(bytes);
        EXPECT_EQ(ck.manifest.require("seed"), "42");
        EXPECT_EQ(ck.manifest.require("note"), "tab\\there");
        EXPECT_EQ(ck.optimizer.has_value(), with_optim);
        std::string again;
        if (with_optim) {
            EXPECT_EQ(*ck.optimizer, opt.state());
            EXPECT_EQ(*ck.learning_rate, opt.learning_rate());
            optim::AdamW restored({.learning_rate = *ck.learning_rate});
            restored.restore(*ck.optimizer);
            again = encode_checkpoint(ck.net, ck.manifest, &restored);
        } else {
            again = encode_checkpoint(ck.net, ck.manifest);
        }
        EXPECT_EQ(again, bytes) << "trial " << trial;

        Matrix x(3, config.input_width);
        for (auto& v : x.data()) v = rng.normal();
        EXPECT_EQ(ck.net.predict(x), net.predict(x));
    }
}

TEST(Checkpoint, FileRoundTrip) {
    testing_support::TempDir dir;
    SplitMix64 rng(8);
    optim::AdamW opt({});
    const auto net = trained_net(random_config(rng), rng, opt, 2);
    write_checkpoint(dir / "c.nnck", net, sample_manifest(), &opt);
    const auto ck = read_checkpoint(dir / "c.nnck");
    EXPECT_EQ(encode_checkpoint(ck.net, ck.manifest, &opt), testing_support::slurp(dir / "c.nnck"));
    EXPECT_THROW(read_checkpoint(dir / "missing.nnck"), IoError);
}

TEST(Checkpoint, CorruptionIsDetected) {
    SplitMix64 rng(9);
    optim::AdamW opt({});
    const auto net = trained_net(random_config(rng), rng, opt, 1);
    const auto bytes = encode_checkpoint(net, sample_manifest(), &opt);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    try {
        decode_checkpoint(bad_magic);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }

    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_THROW(decode_checkpoint(bad_version), FormatError);

    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
        EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, cut)), FormatError)
            << "cut at " << cut;
    }
    EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
}

TEST(Checkpoint, NonFiniteParameterRejected) {
    nn::NetConfig c;
    c.input_width = 2;
    c.hidden_widths = {2};
    auto net = nn::RegressionNet::initialize(c, 1);
    auto bytes = encode_checkpoint(net, Manifest{});
    // The first weight follows the 4-byte magic, version, manifest length and manifest.
    std::uint32_t manifest_len = 0;
    std::memcpy(&manifest_len, bytes.data() + 6, 4);
    const double inf = std::numeric_limits<double>::infinity();
    std::memcpy(bytes.data() + 10 + manifest_len, &inf, 8);
    EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}
