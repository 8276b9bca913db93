#pragma once

#include "disrank/nn.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace disrank::optim {

using GradientSet = std::vector<std::vector<double>>;

struct ClipConfig {
    double max_grad_norm = 1.0;
};

struct ClipResult {
    double norm = 0.0;  ///< global L2 norm before clipping
    double scale = 1.0; ///< factor applied to every component
};

/// L2 norm over all tensors concatenated.
double global_norm(const GradientSet& grads);

/// Scales every gradient by min(1, max_grad_norm / ||g||). A zero gradient is
/// left unchanged. Non-finite components raise ValidationError.
ClipResult clip_gradients(GradientSet& grads, const ClipConfig& config);

struct AdamWConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;

    bool operator==(const AdamWConfig&) const = default;
};

struct AdamWState {
    std::uint64_t step_count = 0;
    GradientSet m;
    GradientSet v;

    bool operator==(const AdamWState&) const = default;
};

/// AdamW with bias correction and decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// Decay applies only to tensors flagged `weight_decay`.
class AdamW {
public:
    explicit AdamW(AdamWConfig config);

    void step(std::span<const nn::ParamTensor> params, const GradientSet& grads);

    double learning_rate() const noexcept { return m_config.learning_rate; }
    void set_learning_rate(double lr);

    const AdamWConfig& config() const noexcept { return m_config; }
    const AdamWState& state() const noexcept { return m_state; }
    void restore(AdamWState state) { m_state = std::move(state); }

private:
    AdamWConfig m_config;
    AdamWState m_state;
};

struct PlateauConfig {
    double factor = 0.5;
    std::int64_t patience = 3;
    double threshold = 1e-8;
    double min_lr = 1e-6;

    bool operator==(const PlateauConfig&) const = default;
};

/// Reduce-on-plateau. A loss counts as an improvement only when it beats the
/// best so far by more than `threshold`; the learning rate is cut once the
/// run of non-improving epochs exceeds `patience`.
class PlateauScheduler {
public:
    explicit PlateauScheduler(PlateauConfig config);

    /// Call once per epoch. Returns the learning rate for the next epoch.
    double observe(double val_loss, double current_lr);

    double best_loss() const noexcept { return m_best; }
    std::int64_t bad_epochs() const noexcept { return m_bad_epochs; }
    const PlateauConfig& config() const noexcept { return m_config; }

private:
    PlateauConfig m_config;
    double m_best = std::numeric_limits<double>::infinity();
    std::int64_t m_bad_epochs = 0;
};

} // namespace disrank::optim
