#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "image.hpp"

namespace rsf {

/// Gaussian window of fixed pixel extent whose standard deviation is free.
struct SmoothKernel {
    int max_size = 51;
    double sigma = 2.0;

    void validate() const
    {
        if (max_size < 1 || max_size % 2 == 0)
            throw Error("smoothing window must be a positive odd pixel count", "max_size");
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw Error("smoothing sigma must be positive", "sigma");
    }
};

inline constexpr int default_smooth_window = 51;

namespace detail {

struct Taps {
    std::vector<double> weight;      // normalized g_i, i in [-r, r]
    std::vector<double> dweight;     // d g_i / d sigma
    int radius = 0;
};

inline Taps gaussian_taps(const SmoothKernel& k, bool with_derivative)
{
    k.validate();
    Taps t;
    t.radius = k.max_size / 2;
    const int n = k.max_size;
    t.weight.resize(n);
    double sum = 0.0;
    for (int i = -t.radius; i <= t.radius; ++i) {
        double e = std::exp(-static_cast<double>(i) * i / (2.0 * k.sigma * k.sigma));
        t.weight[i + t.radius] = e;
        sum += e;
    }
    for (double& w : t.weight)
        w /= sum;
    if (with_derivative) {
        // g_i' = g_i (i^2 - sum_j g_j j^2) / sigma^3
        double second_moment = 0.0;
        for (int i = -t.radius; i <= t.radius; ++i)
            second_moment += t.weight[i + t.radius] * i * i;
        const double s3 = k.sigma * k.sigma * k.sigma;
        t.dweight.resize(n);
        for (int i = -t.radius; i <= t.radius; ++i)
            t.dweight[i + t.radius] = t.weight[i + t.radius] * (static_cast<double>(i) * i - second_moment) / s3;
    }
    return t;
}

// One separable pass with replicate padding. axis 0 = horizontal.
inline Mask convolve_axis(const Mask& in, const std::vector<double>& w, int radius, int axis)
{
    Mask out(in.width(), in.height());
    const int W = in.width(), H = in.height();
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                double g = w[i + radius];
                if (axis == 0)
                    acc += g * in.at(std::clamp(x + i, 0, W - 1), y);
                else
                    acc += g * in.at(x, std::clamp(y + i, 0, H - 1));
            }
            out.at(x, y) = acc;
        }
    return out;
}

inline Mask convolve_axis_adjoint(const Mask& grad, const std::vector<double>& w, int radius, int axis)
{
    Mask out(grad.width(), grad.height());
    const int W = grad.width(), H = grad.height();
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double g = grad.at(x, y);
            if (g == 0.0)
                continue;
            for (int i = -radius; i <= radius; ++i) {
                if (axis == 0)
                    out.at(std::clamp(x + i, 0, W - 1), y) += w[i + radius] * g;
                else
                    out.at(x, std::clamp(y + i, 0, H - 1)) += w[i + radius] * g;
            }
        }
    return out;
}

} // namespace detail

/// Normalized, truncated 2-D Gaussian blur with replicate borders.
inline Mask smooth_mask(const Mask& mask, const SmoothKernel& kernel)
{
    auto taps = detail::gaussian_taps(kernel, false);
    Mask out = detail::convolve_axis(detail::convolve_axis(mask, taps.weight, taps.radius, 0), taps.weight,
                                     taps.radius, 1);
    for (double& v : out.values())
        v = std::clamp(v, 0.0, 1.0);
    return out;
}

/// d smooth_mask / d sigma, per pixel.
inline Mask smooth_mask_dsigma(const Mask& mask, const SmoothKernel& kernel)
{
    auto taps = detail::gaussian_taps(kernel, true);
    const int r = taps.radius;
    Mask h = detail::convolve_axis(mask, taps.weight, r, 0);
    Mask dh = detail::convolve_axis(mask, taps.dweight, r, 0);
    Mask a = detail::convolve_axis(dh, taps.weight, r, 1);
    Mask b = detail::convolve_axis(h, taps.dweight, r, 1);
    for (std::size_t i = 0; i < a.raw().size(); ++i)
        a.raw()[i] += b.raw()[i];
    return a;
}

/// Transpose of the (unclamped) smoothing operator applied to a gradient.
inline Mask smooth_mask_adjoint(const Mask& grad, const SmoothKernel& kernel)
{
    auto taps = detail::gaussian_taps(kernel, false);
    return detail::convolve_axis_adjoint(detail::convolve_axis_adjoint(grad, taps.weight, taps.radius, 1),
                                         taps.weight, taps.radius, 0);
}

} // namespace rsf
