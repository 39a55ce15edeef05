#include "gridshed/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridshed {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_dims(const PolicyArch& arch, int input_dim, int output_dim) {
    if (input_dim <= 0 || output_dim <= 0)
        throw std::invalid_argument("policy dims must be positive");
    if (arch.kind == PolicyKind::lstm && arch.hidden_size <= 0)
        throw std::invalid_argument("lstm hidden size must be positive");
}

} // namespace

std::size_t param_count(const PolicyArch& arch, int input_dim, int output_dim) {
    check_dims(arch, input_dim, output_dim);
    const std::size_t in = input_dim, out = output_dim;
    if (arch.kind == PolicyKind::linear) return out * in + out;
    const std::size_t h = arch.hidden_size;
    return 4 * (h * in + h * h + h) + out * h + out;
}

PolicyParams make_policy(const PolicyArch& arch, int input_dim, int output_dim) {
    PolicyParams params;
    params.arch = arch;
    params.input_dim = input_dim;
    params.output_dim = output_dim;
    params.theta.assign(param_count(arch, input_dim, output_dim), 0.0);
    return params;
}

HiddenState initial_hidden(const PolicyParams& params) {
    HiddenState hidden;
    if (params.arch.kind == PolicyKind::lstm) {
        hidden.h.assign(params.arch.hidden_size, 0.0);
        hidden.c.assign(params.arch.hidden_size, 0.0);
    }
    return hidden;
}

std::vector<double> RunningStats::std_dev() const {
    std::vector<double> out(mean.size(), 1.0);
    if (count <= 1) return out;
    for (std::size_t i = 0; i < m2.size(); ++i) {
        const double var = std::max(0.0, m2[i] / static_cast<double>(count));
        out[i] = std::max(std::sqrt(var), kStdFloor);
    }
    return out;
}

void stats_update(RunningStats& stats, std::span<const double> obs) {
    if (obs.size() != stats.mean.size())
        throw std::invalid_argument("observation dimension does not match the stats");
    ++stats.count;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - stats.mean[i];
        stats.mean[i] += d / static_cast<double>(stats.count);
        stats.m2[i] += d * (obs[i] - stats.mean[i]);
    }
}

std::vector<double> normalize(std::span<const double> obs, const RunningStats& stats) {
    if (obs.size() != stats.mean.size())
        throw std::invalid_argument("observation dimension does not match the stats");
    const std::vector<double> sd = stats.std_dev();
    std::vector<double> out(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        out[i] = (obs[i] - stats.mean[i]) / sd[i];
    return out;
}

std::vector<double> policy_forward(const PolicyParams& params,
                                   std::span<const double> obs,
                                   HiddenState& hidden) {
    if (static_cast<int>(obs.size()) != params.input_dim)
        throw std::invalid_argument("observation dimension does not match the policy");
    if (params.theta.size() != param_count(params.arch, params.input_dim, params.output_dim))
        throw std::invalid_argument("theta length does not match the architecture");

    const std::size_t in = params.input_dim, out = params.output_dim;
    const double* th = params.theta.data();

    if (params.arch.kind == PolicyKind::linear) {
        std::vector<double> y(out);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = th[out * in + o]; // bias
            const double* row = th + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * obs[i];
            y[o] = acc;
        }
        return y;
    }

    const std::size_t h = params.arch.hidden_size;
    if (hidden.h.empty() && hidden.c.empty()) hidden = initial_hidden(params);
    if (hidden.h.size() != h || hidden.c.size() != h)
        throw std::invalid_argument("hidden state does not match the policy");

    // Gate order: input, forget, cell candidate, output.
    const std::size_t gate_span = h * in + h * h + h;
    std::vector<double> pre(4 * h);
    for (std::size_t g = 0; g < 4; ++g) {
        const double* wx = th + g * gate_span;
        const double* wh = wx + h * in;
        const double* b = wh + h * h;
        for (std::size_t k = 0; k < h; ++k) {
            double acc = b[k];
            const double* wx_row = wx + k * in;
            for (std::size_t i = 0; i < in; ++i) acc += wx_row[i] * obs[i];
            const double* wh_row = wh + k * h;
            for (std::size_t j = 0; j < h; ++j) acc += wh_row[j] * hidden.h[j];
            pre[g * h + k] = acc;
        }
    }
    for (std::size_t k = 0; k < h; ++k) {
        const double gi = sigmoid(pre[0 * h + k]);
        const double gf = sigmoid(pre[1 * h + k]);
        const double gc = std::tanh(pre[2 * h + k]);
        const double go = sigmoid(pre[3 * h + k]);
        hidden.c[k] = gf * hidden.c[k] + gi * gc;
        hidden.h[k] = go * std::tanh(hidden.c[k]);
    }

    const double* head_w = th + 4 * gate_span;
    const double* head_b = head_w + out * h;
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
        double acc = head_b[o];
        const double* row = head_w + o * h;
        for (std::size_t k = 0; k < h; ++k) acc += row[k] * hidden.h[k];
        y[o] = acc;
    }
    return y;
}

std::vector<double> squash_action(std::span<const double> raw, const ActionBounds& bounds) {
    if (!(bounds.lo < bounds.hi))
        throw std::invalid_argument("action bounds must satisfy lo < hi");
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        out[i] = bounds.lo + (std::tanh(raw[i]) + 1.0) / 2.0 * (bounds.hi - bounds.lo);
    return out;
}

PolicyParams perturb(const PolicyParams& params, std::span<const double> delta,
                     double nu, int sign) {
    if (delta.size() != params.theta.size())
        throw std::invalid_argument("delta length does not match theta");
    if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
    if (nu < 0.0) throw std::invalid_argument("nu must be non-negative");
    PolicyParams out = params;
    for (std::size_t i = 0; i < delta.size(); ++i)
        out.theta[i] += sign * nu * delta[i];
    return out;
}

} // namespace gridshed
