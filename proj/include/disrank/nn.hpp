#pragma once

// Fixed-topology regression MLP:
//   input -> [Dense -> BatchNorm -> ReLU -> Dropout] x hidden -> Dense -> scalar
// with hand-written reverse-mode gradients. All arithmetic is 64-bit.

#include "disrank/matrix.hpp"
#include "disrank/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace disrank::nn {

struct NetConfig {
    std::size_t input_width = 1536;
    std::vector<std::size_t> hidden_widths = {512, 256, 128, 64};
    double dropout_p = 0.3;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.1;

    bool operator==(const NetConfig&) const = default;
};

/// Throws ValidationError for empty widths, p outside [0,1), and so on.
void validate(const NetConfig& config);

struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights; ///< out_dim x in_dim, row-major
    std::vector<double> bias;
};

struct BatchNormLayer {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;
};

struct HiddenBlock {
    DenseLayer dense;
    BatchNormLayer norm;
    double dropout_p = 0.0;
};

enum class Mode { train, eval };

/// Dropout multipliers per hidden block, B x width, each entry 0 or 1/(1-p).
using DropoutMasks = std::vector<Matrix>;

struct BlockCache {
    Matrix input;                ///< block input (dense layer input)
    Matrix normalized;           ///< x-hat, batch-normalized pre-affine values
    std::vector<double> inv_std; ///< 1/sqrt(var + eps) per feature
    Matrix bn_output;            ///< gamma * x-hat + beta, before ReLU
    Matrix mask;                 ///< dropout multipliers
};

struct ForwardCache {
    std::uint64_t generation = 0;
    bool train = false;
    std::vector<BlockCache> blocks;
    Matrix head_input;
};

struct ForwardResult {
    std::vector<double> predictions;
    ForwardCache cache;
};

/// One gradient tensor per entry of RegressionNet::parameters(), same order.
struct Gradients {
    std::vector<std::vector<double>> tensors;
    Matrix input; ///< dLoss/dInput, B x input_width
};

struct ParamTensor {
    std::string name;
    std::span<double> values;
    bool weight_decay = false;
};

struct ConstParamTensor {
    std::string name;
    std::span<const double> values;
    bool weight_decay = false;
};

class RegressionNet {
public:
    /// Zero-filled parameters with BN gamma = 1 and running_var = 1.
    explicit RegressionNet(NetConfig config);

    /// Scaled-uniform weights in +-sqrt(6/fan_in), zero biases.
    static RegressionNet initialize(const NetConfig& config, std::uint64_t seed);

    const NetConfig& config() const noexcept { return m_config; }
    Mode mode() const noexcept { return m_mode; }
    void set_mode(Mode mode) noexcept { m_mode = mode; }

    /// Train mode draws fresh dropout masks from `rng` and updates the BN
    /// running statistics. Eval mode ignores `rng` and changes nothing.
    ForwardResult forward(const Matrix& batch, SplitMix64& rng);

    /// Train-mode forward with caller-provided dropout masks.
    ForwardResult forward(const Matrix& batch, const DropoutMasks& masks);

    /// Eval-mode inference regardless of the current mode.
    std::vector<double> predict(const Matrix& batch) const;

    /// Reverse pass for the most recent train-mode forward.
    Gradients backward(const ForwardCache& cache, std::span<const double> loss_grad) const;

    std::vector<ParamTensor> parameters();
    std::vector<ConstParamTensor> parameters() const;
    std::size_t parameter_count() const;

    /// Every persisted tensor in checkpoint order: per block weights, bias,
    /// gamma, beta, running_mean, running_var; then head weights, bias.
    std::vector<std::span<double>> state_tensors();
    std::vector<std::span<const double>> state_tensors() const;

    std::vector<HiddenBlock>& blocks() noexcept { return m_blocks; }
    const std::vector<HiddenBlock>& blocks() const noexcept { return m_blocks; }
    DenseLayer& head() noexcept { return m_head; }
    const DenseLayer& head() const noexcept { return m_head; }

private:
    ForwardResult forward_train(const Matrix& batch, const DropoutMasks* masks, SplitMix64* rng);
    void check_input(const Matrix& batch) const;

    NetConfig m_config;
    std::vector<HiddenBlock> m_blocks;
    DenseLayer m_head;
    Mode m_mode = Mode::train;
    std::uint64_t m_generation = 0;
};

/// Inverted dropout over `values` in place; writes the multipliers to `mask`.
void apply_dropout(std::span<double> values, double p, SplitMix64& rng, std::span<double> mask);

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// d mse / d pred = 2 (pred - target) / N.
std::vector<double> mse_gradient(std::span<const double> pred, std::span<const double> target);

/// Row-stacks features into a batch matrix.
Matrix stack_rows(std::span<const std::vector<double>> rows);

} // namespace disrank::nn
