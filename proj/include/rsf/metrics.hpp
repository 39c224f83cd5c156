#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "color.hpp"
#include "image.hpp"

namespace rsf {

inline constexpr double psnr_cap_db = 99.0;

/// Peak 1.0; identical inputs (or anything above the cap) report psnr_cap_db.
inline double psnr(const Image& a, const Image& b)
{
    require_same_size(a, b, "psnr");
    double sse = 0.0;
    const auto& va = a.raw();
    const auto& vb = b.raw();
    for (std::size_t i = 0; i < va.size(); ++i) {
        double d = va[i] - vb[i];
        sse += d * d;
    }
    double mse = sse / static_cast<double>(va.size());
    if (mse == 0.0)
        return psnr_cap_db;
    return std::min(psnr_cap_db, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline constexpr int ssim_window = 11;
inline constexpr double ssim_sigma = 1.5;
inline constexpr double ssim_k1 = 0.01;
inline constexpr double ssim_k2 = 0.03;

inline std::array<double, ssim_window> ssim_weights()
{
    std::array<double, ssim_window> w{};
    double sum = 0.0;
    for (int i = 0; i < ssim_window; ++i) {
        double d = i - ssim_window / 2;
        w[i] = std::exp(-d * d / (2.0 * ssim_sigma * ssim_sigma));
        sum += w[i];
    }
    for (double& v : w)
        v /= sum;
    return w;
}

// Gaussian-weighted moments over every fully contained window of one
// channel; returns the mean SSIM over those windows.
inline double ssim_channel(const Image& a, const Image& b, int c)
{
    const auto w = ssim_weights();
    const int W = a.width(), H = a.height();
    const int ow = W - ssim_window + 1, oh = H - ssim_window + 1;
    // horizontal pass: 5 moment planes of size ow x H
    std::vector<double> h(static_cast<std::size_t>(ow) * H * 5, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < ow; ++x) {
            double m[5] = {};
            for (int i = 0; i < ssim_window; ++i) {
                double va = a.at(x + i, y, c), vb = b.at(x + i, y, c);
                m[0] += w[i] * va;
                m[1] += w[i] * vb;
                m[2] += w[i] * va * va;
                m[3] += w[i] * vb * vb;
                m[4] += w[i] * va * vb;
            }
            for (int k = 0; k < 5; ++k)
                h[(static_cast<std::size_t>(y) * ow + x) * 5 + k] = m[k];
        }
    const double c1 = (ssim_k1 * 1.0) * (ssim_k1 * 1.0);
    const double c2 = (ssim_k2 * 1.0) * (ssim_k2 * 1.0);
    double total = 0.0;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double m[5] = {};
            for (int i = 0; i < ssim_window; ++i)
                for (int k = 0; k < 5; ++k)
                    m[k] += w[i] * h[(static_cast<std::size_t>(y + i) * ow + x) * 5 + k];
            double mu_a = m[0], mu_b = m[1];
            double var_a = m[2] - mu_a * mu_a;
            double var_b = m[3] - mu_b * mu_b;
            double cov = m[4] - mu_a * mu_b;
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    return total / (static_cast<double>(ow) * oh);
}

} // namespace detail

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
/// peak 1, averaged over R, G and B.
inline double ssim(const Image& a, const Image& b)
{
    require_same_size(a, b, "ssim");
    if (std::min(a.width(), a.height()) < detail::ssim_window)
        throw Error("ssim needs images of at least 11x11 pixels");
    double s = 0.0;
    for (int c = 0; c < 3; ++c)
        s += detail::ssim_channel(a, b, c);
    return s / 3.0;
}

/// Soft Dice score 2<a,b> / (|a|^2 + |b|^2); two empty masks score 1.
inline double dice(const Mask& a, const Mask& b)
{
    require_same_size(a, b, "dice");
    double inter = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.raw().size(); ++i) {
        double va = a.raw()[i], vb = b.raw()[i];
        inter += va * vb;
        na += va * va;
        nb += vb * vb;
    }
    if (na + nb == 0.0)
        return 1.0;
    return 2.0 * inter / (na + nb);
}

struct MetricReport {
    double psnr = 0.0;
    std::optional<double> ssim;  ///< absent when the images are smaller than the SSIM window
    double delta_e = 0.0;
};

inline MetricReport compare(const Image& a, const Image& b)
{
    require_same_size(a, b, "metrics");
    MetricReport r;
    r.psnr = psnr(a, b);
    if (std::min(a.width(), a.height()) >= detail::ssim_window)
        r.ssim = ssim(a, b);
    r.delta_e = delta_e_ab(a, b);
    return r;
}

} // namespace rsf
