#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "image.hpp"

namespace rsf {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Cosine decay from `base` towards zero over `period` steps, restarting
/// every period.
inline double cosine_lr(double base, long step, long period)
{
    if (period <= 0)
        return base;
    double phase = static_cast<double>(step % period) / static_cast<double>(period);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
}

/// One bias-corrected Adam update of `params` in place. `lr` is the already
/// scheduled rate; `lr_scale`, when non-empty, multiplies it per parameter.
inline void adam_step(std::span<double> params, AdamState& state, std::span<const double> grad, double lr,
                      const AdamConfig& cfg = {}, std::span<const double> lr_scale = {})
{
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw Error("adam_step: parameter, gradient and state sizes differ");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw Error("non-finite gradient at parameter " + std::to_string(i) + " (step " +
                        std::to_string(state.step + 1) + ")");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        double m_hat = state.m[i] / c1;
        double v_hat = state.v[i] / c2;
        double rate = lr_scale.empty() ? lr : lr * lr_scale[i];
        params[i] -= rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

} // namespace rsf
