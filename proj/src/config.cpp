#include "disrank/config.hpp"

#include "binary_io.hpp"
#include "disrank/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>

namespace disrank::config {

namespace {

double to_real(std::string_view key, const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
        throw ValidationError(fmt::format("config {}: '{}' is not a finite number", key, text));
    }
    return v;
}

template <typename Int>
Int to_int(std::string_view key, const std::string& text) {
    Int v{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw ValidationError(fmt::format("config {}: '{}' is not an integer", key, text));
    }
    return v;
}

std::vector<std::size_t> to_widths(std::string_view key, const std::string& text) {
    std::vector<std::size_t> widths;
    std::size_t start = 0;
    for (;;) {
        const auto comma = text.find(',', start);
        widths.push_back(to_int<std::size_t>(key, text.substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return widths;
}

} // namespace

const std::vector<KeyInfo>& known_keys() {
    static const std::vector<KeyInfo> keys = {
        {"epochs", "training epochs"},
        {"batch_size", "mini-batch size (>= 2)"},
        {"learning_rate", "initial AdamW learning rate"},
        {"split_ratio", "fraction of labeled data used for training"},
        {"seed", "seed for split, init, shuffling and dropout"},
        {"dropout_p", "dropout probability after each hidden block"},
        {"max_grad_norm", "global gradient-norm clipping threshold"},
        {"weight_decay", "decoupled weight decay (dense weights only)"},
        {"beta1", "AdamW first-moment decay"},
        {"beta2", "AdamW second-moment decay"},
        {"adam_epsilon", "AdamW denominator epsilon"},
        {"scheduler_factor", "plateau learning-rate reduction factor"},
        {"scheduler_patience", "non-improving epochs tolerated before reducing"},
        {"scheduler_threshold", "minimum validation-loss improvement"},
        {"min_lr", "learning-rate floor"},
        {"bn_epsilon", "batchnorm variance epsilon"},
        {"bn_momentum", "batchnorm running-statistics momentum"},
        {"input_width", "network input width (2 x embedding dim)"},
        {"hidden_widths", "comma-separated hidden layer widths"},
    };
    return keys;
}

TrainConfig apply(TrainConfig c, const Manifest& entries) {
    for (const auto& [key, value] : entries.entries()) {
        if (key == "epochs") c.epochs = to_int<std::int64_t>(key, value);
        else if (key == "batch_size") c.batch_size = to_int<std::int64_t>(key, value);
        else if (key == "learning_rate") c.adamw.learning_rate = to_real(key, value);
        else if (key == "split_ratio") c.split_ratio = to_real(key, value);
        else if (key == "seed") c.seed = to_int<std::uint64_t>(key, value);
        else if (key == "dropout_p") c.net.dropout_p = to_real(key, value);
        else if (key == "max_grad_norm") c.max_grad_norm = to_real(key, value);
        else if (key == "weight_decay") c.adamw.weight_decay = to_real(key, value);
        else if (key == "beta1") c.adamw.beta1 = to_real(key, value);
        else if (key == "beta2") c.adamw.beta2 = to_real(key, value);
        else if (key == "adam_epsilon") c.adamw.epsilon = to_real(key, value);
        else if (key == "scheduler_factor") c.scheduler.factor = to_real(key, value);
        else if (key == "scheduler_patience") c.scheduler.patience = to_int<std::int64_t>(key, value);
        else if (key == "scheduler_threshold") c.scheduler.threshold = to_real(key, value);
        else if (key == "min_lr") c.scheduler.min_lr = to_real(key, value);
        else if (key == "bn_epsilon") c.net.bn_epsilon = to_real(key, value);
        else if (key == "bn_momentum") c.net.bn_momentum = to_real(key, value);
        else if (key == "input_width") c.net.input_width = to_int<std::size_t>(key, value);
        else if (key == "hidden_widths") c.net.hidden_widths = to_widths(key, value);
        else throw ValidationError(fmt::format("unknown config key '{}'", key));
    }
    validate(c);
    return c;
}

Manifest read_file(const std::filesystem::path& path) {
    const auto text = detail::read_binary_file(path);
    try {
        return Manifest::parse(text);
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::pair<std::string, std::string> split_assignment(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ValidationError(fmt::format("expected key=value, got '{}'", text));
    }
    return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

Manifest resolved(const TrainConfig& config) {
    const auto full = run_manifest(config);
    Manifest out;
    for (const auto& k : known_keys()) {
        out.set(std::string(k.key), full.require(k.key));
    }
    return out;
}

} // namespace disrank::config
