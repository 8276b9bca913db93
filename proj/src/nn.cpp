#include "disrank/nn.hpp"

#include "disrank/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace disrank::nn {

namespace {

DenseLayer make_dense(std::size_t in_dim, std::size_t out_dim) {
    DenseLayer d;
    d.in_dim = in_dim;
    d.out_dim = out_dim;
    d.weights.assign(in_dim * out_dim, 0.0);
    d.bias.assign(out_dim, 0.0);
    return d;
}

BatchNormLayer make_norm(std::size_t width, double momentum, double epsilon) {
    BatchNormLayer n;
    n.gamma.assign(width, 1.0);
    n.beta.assign(width, 0.0);
    n.running_mean.assign(width, 0.0);
    n.running_var.assign(width, 1.0);
    n.momentum = momentum;
    n.epsilon = epsilon;
    return n;
}

// out = x W^T + b
Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
    Matrix out(x.rows(), layer.out_dim);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        auto o = out.row(r);
        for (std::size_t j = 0; j < layer.out_dim; ++j) {
            const double* w = layer.weights.data() + j * layer.in_dim;
            double acc = 0.0;
            for (std::size_t k = 0; k < layer.in_dim; ++k) {
                acc += w[k] * in[k];
            }
            o[j] = acc + layer.bias[j];
        }
    }
    return out;
}

// Accumulates dW = dz^T x and db = sum(dz), returns dx = dz W.
Matrix dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dz,
                      std::vector<double>& dweights, std::vector<double>& dbias) {
    dweights.assign(layer.weights.size(), 0.0);
    dbias.assign(layer.out_dim, 0.0);
    Matrix dx(x.rows(), layer.in_dim);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        const auto g = dz.row(r);
        auto dxr = dx.row(r);
        for (std::size_t j = 0; j < layer.out_dim; ++j) {
            const double gj = g[j];
            dbias[j] += gj;
            double* dw = dweights.data() + j * layer.in_dim;
            const double* w = layer.weights.data() + j * layer.in_dim;
            for (std::size_t k = 0; k < layer.in_dim; ++k) {
                dw[k] += gj * in[k];
                dxr[k] += gj * w[k];
            }
        }
    }
    return dx;
}

} // namespace

void validate(const NetConfig& config) {
    if (config.input_width == 0) {
        throw ValidationError("input width must be positive");
    }
    if (config.hidden_widths.empty()) {
        throw ValidationError("at least one hidden layer is required");
    }
    for (auto w : config.hidden_widths) {
        if (w == 0) {
            throw ValidationError("hidden widths must be positive");
        }
    }
    if (!(config.dropout_p >= 0.0 && config.dropout_p < 1.0)) {
        throw ValidationError(fmt::format("dropout p {} is not in [0, 1)", config.dropout_p));
    }
    if (!(config.bn_epsilon > 0.0)) {
        throw ValidationError("batchnorm epsilon must be positive");
    }
    if (!(config.bn_momentum > 0.0 && config.bn_momentum < 1.0)) {
        throw ValidationError("batchnorm momentum must be in (0, 1)");
    }
}

RegressionNet::RegressionNet(NetConfig config) : m_config(std::move(config)) {
    validate(m_config);
    std::size_t in = m_config.input_width;
    for (auto width : m_config.hidden_widths) {
        HiddenBlock b;
        b.dense = make_dense(in, width);
        b.norm = make_norm(width, m_config.bn_momentum, m_config.bn_epsilon);
        b.dropout_p = m_config.dropout_p;
        m_blocks.push_back(std::move(b));
        in = width;
    }
    m_head = make_dense(in, 1);
}

RegressionNet RegressionNet::initialize(const NetConfig& config, std::uint64_t seed) {
    RegressionNet net(config);
    SplitMix64 rng(seed);
    auto fill = [&rng](DenseLayer& d) {
        const double bound = std::sqrt(6.0 / static_cast<double>(d.in_dim));
        for (auto& w : d.weights) {
            w = rng.uniform(-bound, bound);
        }
    };
    for (auto& b : net.m_blocks) {
        fill(b.dense);
    }
    fill(net.m_head);
    return net;
}

void RegressionNet::check_input(const Matrix& batch) const {
    if (batch.cols() != m_config.input_width) {
        throw ValidationError(fmt::format("batch width {} does not match input width {}",
                                          batch.cols(), m_config.input_width));
    }
    const auto data = batch.data();
    if (!std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); })) {
        throw ValidationError("batch contains a non-finite value");
    }
}

ForwardResult RegressionNet::forward(const Matrix& batch, SplitMix64& rng) {
    if (m_mode == Mode::eval) {
        ForwardResult r;
        r.predictions = predict(batch);
        return r;
    }
    return forward_train(batch, nullptr, &rng);
}

ForwardResult RegressionNet::forward(const Matrix& batch, const DropoutMasks& masks) {
    if (m_mode == Mode::eval) {
        throw ValidationError("explicit dropout masks are only meaningful in train mode");
    }
    if (masks.size() != m_blocks.size()) {
        throw ValidationError(fmt::format("expected {} dropout masks, got {}", m_blocks.size(),
                                          masks.size()));
    }
    return forward_train(batch, &masks, nullptr);
}

ForwardResult RegressionNet::forward_train(const Matrix& batch, const DropoutMasks* masks,
                                           SplitMix64* rng) {
    check_input(batch);
    const std::size_t n = batch.rows();
    if (n < 2) {
        throw ValidationError(
            fmt::format("train-mode batch needs at least 2 rows for batch statistics, got {}", n));
    }
    const double nd = static_cast<double>(n);

    ForwardResult result;
    auto& cache = result.cache;
    cache.train = true;
    cache.generation = ++m_generation;
    cache.blocks.reserve(m_blocks.size());

    Matrix x = batch;
    for (std::size_t bi = 0; bi < m_blocks.size(); ++bi) {
        auto& block = m_blocks[bi];
        auto& norm = block.norm;
        const std::size_t width = block.dense.out_dim;

        BlockCache bc;
        Matrix z = dense_forward(block.dense, x);
        bc.input = std::move(x);

        std::vector<double> mean(width, 0.0);
        std::vector<double> var(width, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const auto zr = z.row(r);
            for (std::size_t j = 0; j < width; ++j) {
                mean[j] += zr[j];
            }
        }
        for (auto& m : mean) {
            m /= nd;
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto zr = z.row(r);
            for (std::size_t j = 0; j < width; ++j) {
                const double d = zr[j] - mean[j];
                var[j] += d * d;
            }
        }
        for (auto& v : var) {
            v /= nd;
        }

        bc.inv_std.resize(width);
        for (std::size_t j = 0; j < width; ++j) {
            bc.inv_std[j] = 1.0 / std::sqrt(var[j] + norm.epsilon);
        }
        bc.normalized = Matrix(n, width);
        bc.bn_output = Matrix(n, width);
        for (std::size_t r = 0; r < n; ++r) {
            const auto zr = z.row(r);
            auto xh = bc.normalized.row(r);
            auto y = bc.bn_output.row(r);
            for (std::size_t j = 0; j < width; ++j) {
                xh[j] = (zr[j] - mean[j]) * bc.inv_std[j];
                y[j] = norm.gamma[j] * xh[j] + norm.beta[j];
            }
        }

        const double unbias = nd / (nd - 1.0);
        for (std::size_t j = 0; j < width; ++j) {
            norm.running_mean[j] =
                (1.0 - norm.momentum) * norm.running_mean[j] + norm.momentum * mean[j];
            norm.running_var[j] =
                (1.0 - norm.momentum) * norm.running_var[j] + norm.momentum * var[j] * unbias;
        }

        Matrix out = bc.bn_output;
        for (auto& v : out.data()) {
            v = std::max(v, 0.0);
        }
        if (masks != nullptr) {
            const Matrix& m = (*masks)[bi];
            if (m.rows() != n || m.cols() != width) {
                throw ValidationError(fmt::format("dropout mask {} has shape {}x{}, expected {}x{}",
                                                  bi, m.rows(), m.cols(), n, width));
            }
            bc.mask = m;
            const auto md = m.data();
            auto od = out.data();
            for (std::size_t i = 0; i < od.size(); ++i) {
                od[i] *= md[i];
            }
        } else {
            bc.mask = Matrix(n, width, 1.0);
            apply_dropout(out.data(), block.dropout_p, *rng, bc.mask.data());
        }
        cache.blocks.push_back(std::move(bc));
        x = std::move(out);
    }

    const Matrix head_out = dense_forward(m_head, x);
    cache.head_input = std::move(x);
    result.predictions.assign(head_out.data().begin(), head_out.data().end());
    return result;
}

std::vector<double> RegressionNet::predict(const Matrix& batch) const {
    check_input(batch);
    Matrix x = batch;
    for (const auto& block : m_blocks) {
        Matrix z = dense_forward(block.dense, x);
        const auto& norm = block.norm;
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto zr = z.row(r);
            for (std::size_t j = 0; j < zr.size(); ++j) {
                const double xh = (zr[j] - norm.running_mean[j]) /
                                  std::sqrt(norm.running_var[j] + norm.epsilon);
                zr[j] = std::max(norm.gamma[j] * xh + norm.beta[j], 0.0);
            }
        }
        x = std::move(z);
    }
    const Matrix out = dense_forward(m_head, x);
    return {out.data().begin(), out.data().end()};
}

Gradients RegressionNet::backward(const ForwardCache& cache,
                                  std::span<const double> loss_grad) const {
    if (!cache.train) {
        throw ValidationError("backward needs a train-mode forward cache");
    }
    if (cache.generation != m_generation || cache.blocks.size() != m_blocks.size()) {
        throw ValidationError("stale forward cache: backward must follow its own forward pass");
    }
    const std::size_t n = cache.head_input.rows();
    if (loss_grad.size() != n) {
        throw ValidationError(fmt::format("loss gradient has {} entries, batch has {}",
                                          loss_grad.size(), n));
    }
    const double nd = static_cast<double>(n);

    Gradients grads;
    grads.tensors.resize(4 * m_blocks.size() + 2);

    Matrix dy(n, 1);
    for (std::size_t r = 0; r < n; ++r) {
        dy(r, 0) = loss_grad[r];
    }
    Matrix upstream = dense_backward(m_head, cache.head_input, dy,
                                     grads.tensors[4 * m_blocks.size()],
                                     grads.tensors[4 * m_blocks.size() + 1]);

    for (std::size_t bi = m_blocks.size(); bi-- > 0;) {
        const auto& block = m_blocks[bi];
        const auto& bc = cache.blocks[bi];
        const std::size_t width = block.dense.out_dim;

        // Through dropout and ReLU.
        Matrix dbn(n, width);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < width; ++j) {
                const double pass = bc.bn_output(r, j) > 0.0 ? bc.mask(r, j) : 0.0;
                dbn(r, j) = upstream(r, j) * pass;
            }
        }

        auto& dgamma = grads.tensors[4 * bi + 2];
        auto& dbeta = grads.tensors[4 * bi + 3];
        dgamma.assign(width, 0.0);
        dbeta.assign(width, 0.0);
        std::vector<double> sum_dxh(width, 0.0);
        std::vector<double> sum_dxh_xh(width, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < width; ++j) {
                const double g = dbn(r, j);
                const double xh = bc.normalized(r, j);
                dbeta[j] += g;
                dgamma[j] += g * xh;
                const double dxh = g * block.norm.gamma[j];
                sum_dxh[j] += dxh;
                sum_dxh_xh[j] += dxh * xh;
            }
        }
        Matrix dz(n, width);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < width; ++j) {
                const double dxh = dbn(r, j) * block.norm.gamma[j];
                dz(r, j) = bc.inv_std[j] / nd *
                           (nd * dxh - sum_dxh[j] - bc.normalized(r, j) * sum_dxh_xh[j]);
            }
        }
        upstream = dense_backward(block.dense, bc.input, dz, grads.tensors[4 * bi],
                                  grads.tensors[4 * bi + 1]);
    }
    grads.input = std::move(upstream);
    return grads;
}

std::vector<ParamTensor> RegressionNet::parameters() {
    std::vector<ParamTensor> out;
    for (std::size_t i = 0; i < m_blocks.size(); ++i) {
        auto& b = m_blocks[i];
        out.push_back({fmt::format("block{}.weight", i), b.dense.weights, true});
        out.push_back({fmt::format("block{}.bias", i), b.dense.bias, false});
        out.push_back({fmt::format("block{}.gamma", i), b.norm.gamma, false});
        out.push_back({fmt::format("block{}.beta", i), b.norm.beta, false});
    }
    out.push_back({"head.weight", m_head.weights, true});
    out.push_back({"head.bias", m_head.bias, false});
    return out;
}

std::vector<ConstParamTensor> RegressionNet::parameters() const {
    std::vector<ConstParamTensor> out;
    for (auto& p : const_cast<RegressionNet*>(this)->parameters()) {
        out.push_back({std::move(p.name), p.values, p.weight_decay});
    }
    return out;
}

std::size_t RegressionNet::parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : parameters()) {
        total += p.values.size();
    }
    return total;
}

std::vector<std::span<double>> RegressionNet::state_tensors() {
    std::vector<std::span<double>> out;
    for (auto& b : m_blocks) {
        out.emplace_back(b.dense.weights);
        out.emplace_back(b.dense.bias);
        out.emplace_back(b.norm.gamma);
        out.emplace_back(b.norm.beta);
        out.emplace_back(b.norm.running_mean);
        out.emplace_back(b.norm.running_var);
    }
    out.emplace_back(m_head.weights);
    out.emplace_back(m_head.bias);
    return out;
}

std::vector<std::span<const double>> RegressionNet::state_tensors() const {
    std::vector<std::span<const double>> out;
    for (auto s : const_cast<RegressionNet*>(this)->state_tensors()) {
        out.emplace_back(s);
    }
    return out;
}

void apply_dropout(std::span<double> values, double p, SplitMix64& rng, std::span<double> mask) {
    if (mask.size() != values.size()) {
        throw ValidationError("dropout mask size does not match values");
    }
    if (p == 0.0) {
        std::fill(mask.begin(), mask.end(), 1.0);
        return;
    }
    const double scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < values.size(); ++i) {
        mask[i] = rng.uniform() < p ? 0.0 : scale;
        values[i] *= mask[i];
    }
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw ValidationError(fmt::format("mse: {} predictions vs {} targets", pred.size(),
                                          target.size()));
    }
    if (pred.empty()) {
        throw ValidationError("mse of an empty batch is undefined");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = target[i] - pred[i];
        total += d * d;
    }
    return total / static_cast<double>(pred.size());
}

std::vector<double> mse_gradient(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw ValidationError("mse gradient needs equal, non-empty inputs");
    }
    std::vector<double> g(pred.size());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        g[i] = scale * (pred[i] - target[i]);
    }
    return g;
}

Matrix stack_rows(std::span<const std::vector<double>> rows) {
    if (rows.empty()) {
        return {};
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) {
            throw ValidationError("stack_rows: ragged rows");
        }
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

} // namespace disrank::nn
