#include "disrank/optim.hpp"

#include "disrank/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace disrank::optim {

double global_norm(const GradientSet& grads) {
    double sq = 0.0;
    for (const auto& t : grads) {
        for (double g : t) {
            sq += g * g;
        }
    }
    return std::sqrt(sq);
}

ClipResult clip_gradients(GradientSet& grads, const ClipConfig& config) {
    if (!(config.max_grad_norm > 0.0)) {
        throw ValidationError("max_grad_norm must be positive");
    }
    for (const auto& t : grads) {
        if (!std::all_of(t.begin(), t.end(), [](double g) { return std::isfinite(g); })) {
            throw ValidationError("non-finite gradient; the run has diverged");
        }
    }
    ClipResult result;
    result.norm = global_norm(grads);
    if (result.norm == 0.0) {
        return result;
    }
    result.scale = std::min(1.0, config.max_grad_norm / result.norm);
    if (result.scale < 1.0) {
        for (auto& t : grads) {
            for (auto& g : t) {
                g *= result.scale;
            }
        }
    }
    return result;
}

AdamW::AdamW(AdamWConfig config) : m_config(config) {
    set_learning_rate(config.learning_rate);
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
        throw ValidationError("AdamW betas must be in [0, 1)");
    }
    if (!(config.epsilon > 0.0) || !(config.weight_decay >= 0.0)) {
        throw ValidationError("AdamW needs epsilon > 0 and weight_decay >= 0");
    }
}

void AdamW::set_learning_rate(double lr) {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ValidationError(fmt::format("learning rate {} must be positive", lr));
    }
    m_config.learning_rate = lr;
}

void AdamW::step(std::span<const nn::ParamTensor> params, const GradientSet& grads) {
    if (params.size() != grads.size()) {
        throw ValidationError(fmt::format("AdamW: {} parameter tensors but {} gradient tensors",
                                          params.size(), grads.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].values.size() != grads[i].size()) {
            throw ValidationError(fmt::format("AdamW: shape mismatch for {}", params[i].name));
        }
    }
    if (m_state.m.empty()) {
        for (const auto& p : params) {
            m_state.m.emplace_back(p.values.size(), 0.0);
            m_state.v.emplace_back(p.values.size(), 0.0);
        }
    } else if (m_state.m.size() != params.size()) {
        throw ValidationError("AdamW: parameter list changed between steps");
    }

    const auto t = ++m_state.step_count;
    const double b1 = m_config.beta1;
    const double b2 = m_config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    const double lr = m_config.learning_rate;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].values;
        auto& m = m_state.m[i];
        auto& v = m_state.v[i];
        if (m.size() != theta.size()) {
            throw ValidationError(fmt::format("AdamW: state shape mismatch for {}", params[i].name));
        }
        const double wd = params[i].weight_decay ? m_config.weight_decay : 0.0;
        const auto& g = grads[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            theta[k] -= lr * (m_hat / (std::sqrt(v_hat) + m_config.epsilon) + wd * theta[k]);
        }
    }
}

PlateauScheduler::PlateauScheduler(PlateauConfig config) : m_config(config) {
    if (!(config.factor > 0.0 && config.factor < 1.0)) {
        throw ValidationError("scheduler factor must be in (0, 1)");
    }
    if (config.patience < 0 || !(config.threshold >= 0.0) || !(config.min_lr >= 0.0)) {
        throw ValidationError("scheduler needs patience >= 0, threshold >= 0, min_lr >= 0");
    }
}

double PlateauScheduler::observe(double val_loss, double current_lr) {
    if (!std::isfinite(val_loss)) {
        throw ValidationError("scheduler received a non-finite validation loss");
    }
    if (val_loss < m_best - m_config.threshold) {
        m_best = val_loss;
        m_bad_epochs = 0;
        return current_lr;
    }
    if (++m_bad_epochs > m_config.patience) {
        m_bad_epochs = 0;
        return std::min(current_lr, std::max(current_lr * m_config.factor, m_config.min_lr));
    }
    return current_lr;
}

} // namespace disrank::optim
