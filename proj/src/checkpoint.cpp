#include "disrank/checkpoint.hpp"

#include "binary_io.hpp"
#include "disrank/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <charconv>
#include <cmath>
#include <limits>

namespace disrank {

namespace {

constexpr std::string_view kMagic = "NNCK";
constexpr std::uint16_t kVersion = 1;
constexpr std::string_view kOptimSection = "optim";

std::size_t parse_size(const std::string& text, std::string_view key) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw FormatError(fmt::format("manifest key {}: '{}' is not an unsigned integer", key, text),
                          0);
    }
    return value;
}

double parse_double(const std::string& text, std::string_view key) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
        throw FormatError(fmt::format("manifest key {}: '{}' is not a number", key, text), 0);
    }
    return v;
}

std::string encode_optim(const optim::AdamW& opt) {
    detail::ByteWriter w;
    const auto& st = opt.state();
    w.put_u64(st.step_count);
    w.put_f64(opt.learning_rate());
    w.put_u32(static_cast<std::uint32_t>(st.m.size()));
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        w.put_u64(st.m[i].size());
        for (double x : st.m[i]) {
            w.put_f64(x);
        }
        for (double x : st.v[i]) {
            w.put_f64(x);
        }
    }
    return w.take();
}

// Reads the optim payload occupying bytes [begin, end) of the whole file so
// that error offsets are absolute.
void decode_optim(std::string_view bytes, std::size_t begin, std::size_t end,
                  const nn::RegressionNet& net, Checkpoint& out) {
    detail::ByteReader r(bytes.substr(0, end));
    r.get_bytes(begin, "checkpoint prefix");
    optim::AdamWState st;
    st.step_count = r.get_u64("optim step");
    const double lr = r.get_f64("optim learning rate");
    const auto tensors = r.get_u32("optim tensor count");
    const auto params = net.parameters();
    if (tensors != 0 && tensors != params.size()) {
        throw FormatError(fmt::format("optim section has {} tensors, network has {}", tensors,
                                      params.size()),
                          r.offset());
    }
    for (std::uint32_t i = 0; i < tensors; ++i) {
        const auto len = r.get_u64("optim tensor length");
        if (len != params[i].values.size()) {
            throw FormatError(fmt::format("optim tensor {} length {} does not match {}", i,
                                          len, params[i].values.size()),
                              r.offset());
        }
        std::vector<double> m(len), v(len);
        for (auto& x : m) {
            x = r.get_f64("optim first moment");
        }
        for (auto& x : v) {
            x = r.get_f64("optim second moment");
        }
        st.m.push_back(std::move(m));
        st.v.push_back(std::move(v));
    }
    if (r.remaining() != 0) {
        throw FormatError("trailing bytes in optim section", r.offset());
    }
    out.optimizer = std::move(st);
    out.learning_rate = lr;
}

} // namespace

void Manifest::set(std::string key, std::string value) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
        throw ValidationError(fmt::format("manifest entry '{}' contains '=' or a newline", key));
    }
    for (auto& [k, v] : m_entries) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    m_entries.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> Manifest::get(std::string_view key) const {
    for (const auto& [k, v] : m_entries) {
        if (k == key) {
            return v;
        }
    }
    return std::nullopt;
}

std::string Manifest::require(std::string_view key) const {
    auto v = get(key);
    if (!v) {
        throw FormatError(fmt::format("manifest is missing key {}", key), 0);
    }
    return *v;
}

std::string Manifest::serialize() const {
    std::string out;
    for (const auto& [k, v] : m_entries) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

Manifest Manifest::parse(std::string_view text) {
    Manifest m;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw ValidationError(fmt::format("line {}: expected key=value, got '{}'", line_no, line));
        }
        if (m.get(line.substr(0, eq))) {
            throw ValidationError(
                fmt::format("line {}: key {} appears twice", line_no, line.substr(0, eq)));
        }
        m.set(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    return m;
}

std::string format_exact(double value) {
    return fmt::format("{}", value);
}

void describe_net(const nn::NetConfig& config, Manifest& manifest) {
    manifest.set("input_width", std::to_string(config.input_width));
    manifest.set("hidden_widths", fmt::format("{}", fmt::join(config.hidden_widths, ",")));
    manifest.set("dropout_p", format_exact(config.dropout_p));
    manifest.set("bn_epsilon", format_exact(config.bn_epsilon));
    manifest.set("bn_momentum", format_exact(config.bn_momentum));
}

nn::NetConfig net_config_from(const Manifest& manifest) {
    nn::NetConfig c;
    c.input_width = parse_size(manifest.require("input_width"), "input_width");
    c.hidden_widths.clear();
    const auto widths = manifest.require("hidden_widths");
    std::size_t start = 0;
    for (;;) {
        const auto comma = widths.find(',', start);
        c.hidden_widths.push_back(
            parse_size(widths.substr(start, comma - start), "hidden_widths"));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    c.dropout_p = parse_double(manifest.require("dropout_p"), "dropout_p");
    c.bn_epsilon = parse_double(manifest.require("bn_epsilon"), "bn_epsilon");
    c.bn_momentum = parse_double(manifest.require("bn_momentum"), "bn_momentum");
    try {
        nn::validate(c);
    } catch (const ValidationError& e) {
        throw FormatError(fmt::format("invalid architecture in manifest: {}", e.what()), 0);
    }
    return c;
}

std::string encode_checkpoint(const nn::RegressionNet& net, Manifest manifest,
                              const optim::AdamW* optimizer) {
    describe_net(net.config(), manifest);
    const auto text = manifest.serialize();
    if (text.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError("manifest too large");
    }
    detail::ByteWriter w;
    w.put_bytes(kMagic);
    w.put_u16(kVersion);
    w.put_u32(static_cast<std::uint32_t>(text.size()));
    w.put_bytes(text);
    for (auto tensor : net.state_tensors()) {
        for (double v : tensor) {
            w.put_f64(v);
        }
    }
    w.put_u32(optimizer != nullptr ? 1 : 0);
    if (optimizer != nullptr) {
        const auto payload = encode_optim(*optimizer);
        w.put_u16(static_cast<std::uint16_t>(kOptimSection.size()));
        w.put_bytes(kOptimSection);
        w.put_u64(payload.size());
        w.put_bytes(payload);
    }
    return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.get_bytes(kMagic.size(), "magic") != kMagic) {
        throw FormatError("bad magic, not an NNCK checkpoint", 0);
    }
    const auto version_at = r.offset();
    if (const auto version = r.get_u16("version"); version != kVersion) {
        throw FormatError(fmt::format("unsupported NNCK version {}", version), version_at);
    }
    const auto manifest_len = r.get_u32("manifest length");
    const auto manifest_at = r.offset();
    const auto text = r.get_bytes(manifest_len, "manifest");
    Manifest manifest;
    nn::NetConfig config;
    try {
        manifest = Manifest::parse(text);
        config = net_config_from(manifest);
    } catch (const Error& e) {
        throw FormatError(fmt::format("bad checkpoint manifest: {}", e.what()), manifest_at);
    }

    Checkpoint ck{manifest, nn::RegressionNet(config), std::nullopt, std::nullopt};
    for (auto tensor : ck.net.state_tensors()) {
        for (auto& v : tensor) {
            const auto at = r.offset();
            v = r.get_f64("parameters");
            if (!std::isfinite(v)) {
                throw FormatError("non-finite parameter", at);
            }
        }
    }
    for (const auto& block : ck.net.blocks()) {
        for (double v : block.norm.running_var) {
            if (v < 0.0) {
                throw FormatError("negative running variance", r.offset());
            }
        }
    }

    const auto sections = r.get_u32("section count");
    for (std::uint32_t s = 0; s < sections; ++s) {
        const auto name_len = r.get_u16("section name length");
        const std::string name(r.get_bytes(name_len, "section name"));
        const auto payload_len = r.get_u64("section length");
        const auto payload_at = r.offset();
        if (payload_len > r.remaining()) {
            throw FormatError(fmt::format("section {} is truncated", name), payload_at);
        }
        r.get_bytes(static_cast<std::size_t>(payload_len), "section payload");
        if (name == kOptimSection) {
            decode_optim(bytes, payload_at, r.offset(), ck.net, ck);
        }
        // Unknown sections are skipped so later writers stay readable.
    }
    if (r.remaining() != 0) {
        throw FormatError("trailing bytes after checkpoint sections", r.offset());
    }
    return ck;
}

void write_checkpoint(const std::filesystem::path& path, const nn::RegressionNet& net,
                      const Manifest& manifest, const optim::AdamW* optimizer) {
    detail::write_binary_file(path, encode_checkpoint(net, manifest, optimizer));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_binary_file(path));
}

} // namespace disrank
