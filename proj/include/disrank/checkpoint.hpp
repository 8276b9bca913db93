#pragma once

// NNCK container: magic "NNCK", u16 version, u32-length-prefixed UTF-8
// manifest (key=value lines), every network state tensor as f64, then a
// u32 count of named sections (u16 name length, name, u64 payload length,
// payload). The only section written today is "optim" (AdamW state).
// All integers and floats are little-endian.

#include "disrank/nn.hpp"
#include "disrank/optim.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace disrank {

/// Ordered key=value list; order is preserved so output bytes are stable.
class Manifest {
public:
    void set(std::string key, std::string value);
    std::optional<std::string> get(std::string_view key) const;
    /// Throws FormatError naming the key when absent.
    std::string require(std::string_view key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
        return m_entries;
    }

    std::string serialize() const;
    /// Accepts `#` comments and blank lines; rejects lines without '='.
    static Manifest parse(std::string_view text);

    bool operator==(const Manifest&) const = default;

private:
    std::vector<std::pair<std::string, std::string>> m_entries;
};

/// Shortest text that parses back to the same double.
std::string format_exact(double value);

/// Architecture keys every checkpoint manifest carries.
void describe_net(const nn::NetConfig& config, Manifest& manifest);
nn::NetConfig net_config_from(const Manifest& manifest);

struct Checkpoint {
    Manifest manifest;
    nn::RegressionNet net;
    std::optional<optim::AdamWState> optimizer;
    std::optional<double> learning_rate;
};

/// Architecture keys are added to (or overwrite) the manifest copy that is
/// written, so the file is always self-describing.
std::string encode_checkpoint(const nn::RegressionNet& net, Manifest manifest,
                              const optim::AdamW* optimizer = nullptr);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const nn::RegressionNet& net,
                      const Manifest& manifest, const optim::AdamW* optimizer = nullptr);
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace disrank
