#pragma once

// Shared helpers for the test suites: deterministic image generators,
// fixture loading and an independent per-pixel evaluator of the compositing
// formula.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsf/rsf.hpp"

namespace rsf::test {

inline const nlohmann::json& oracles()
{
    static const nlohmann::json doc = [] {
        std::ifstream in(std::string(RSF_FIXTURE_DIR) + "/oracles.json");
        return nlohmann::json::parse(in);
    }();
    return doc;
}

inline Image image_from(const nlohmann::json& values, int w, int h)
{
    return Image(w, h, values.get<std::vector<double>>());
}

inline Mask mask_from(const nlohmann::json& values, int w, int h)
{
    return Mask(w, h, values.get<std::vector<double>>());
}

inline Image random_image(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h);
    for (double& v : img.values())
        v = u(rng);
    return img;
}

inline Mask random_mask(int w, int h, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mask m(w, h);
    for (double& v : m.values())
        v = u(rng);
    return m;
}

inline Image constant_image(int w, int h, double r, double g, double b)
{
    Image img(w, h);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        auto p = img.pixel(i);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
    return img;
}

/// Smooth colour gradients with a few soft blobs, values kept inside
/// [lo, hi]. Gives palette extraction distinct regions to find.
inline Image scene_image(int w, int h, std::uint64_t seed, double lo = 0.08, double hi = 0.92)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = 0.3 + 0.4 * u(rng);
        gx[c] = 0.3 * (u(rng) - 0.5);
        gy[c] = 0.3 * (u(rng) - 0.5);
    }
    struct Blob {
        double cx, cy, r, col[3];
    };
    std::vector<Blob> blobs(3);
    for (auto& b : blobs) {
        b.cx = u(rng) * w;
        b.cy = u(rng) * h;
        b.r = (0.15 + 0.2 * u(rng)) * std::min(w, h);
        for (double& c : b.col)
            c = u(rng);
    }
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = base[c] + gx[c] * (x / double(w) - 0.5) + gy[c] * (y / double(h) - 0.5);
                for (const auto& b : blobs) {
                    double d2 = ((x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy)) / (b.r * b.r);
                    double wgt = std::exp(-d2 * 2.0);
                    v = v * (1.0 - wgt) + b.col[c] * wgt;
                }
                v += 0.01 * (u(rng) - 0.5);
                img.at(x, y, c) = lo + (hi - lo) * std::clamp(v, 0.0, 1.0);
            }
    return img;
}

/// Direct, unoptimized evaluation of one pixel/channel of
/// clamp(X + sum_m sum_n (F(theta, X) - X) * M_m), written out filter by
/// filter without going through the library's filter code.
inline double naive_increment(FilterKind kind, double theta, const double* px, int c, double lum, double mean,
                              const FilterConstants& k)
{
    const double x = px[c];
    switch (kind) {
    case FilterKind::Contrast: return theta * (x - mean);
    case FilterKind::Saturation: return theta * (x - lum);
    case FilterKind::Hue: return c == 2 ? -0.5 * k.alpha_h * theta * x : k.alpha_h * theta * x;
    case FilterKind::Temperature:
        if (c == 0) return (theta >= 0 ? k.alpha_t[0] : k.alpha_t[1]) * theta * x;
        if (c == 1) return theta >= 0 ? 0.0 : k.alpha_t[2] * theta * x;
        return (theta >= 0 ? k.alpha_t[3] : k.alpha_t[4]) * theta * x;
    case FilterKind::Shadows: return theta * (1 - x);
    case FilterKind::Midtones: return theta * (0.25 - (x - 0.5) * (x - 0.5));
    case FilterKind::Highlights: return theta * x;
    case FilterKind::ShadowsR: return c == 0 ? theta * (1 - x) : 0.0;
    case FilterKind::ShadowsG: return c == 1 ? theta * (1 - x) : 0.0;
    case FilterKind::ShadowsB: return c == 2 ? theta * (1 - x) : 0.0;
    case FilterKind::MidtonesR: return c == 0 ? theta * (0.25 - (x - 0.5) * (x - 0.5)) : 0.0;
    case FilterKind::MidtonesG: return c == 1 ? theta * (0.25 - (x - 0.5) * (x - 0.5)) : 0.0;
    case FilterKind::MidtonesB: return c == 2 ? theta * (0.25 - (x - 0.5) * (x - 0.5)) : 0.0;
    case FilterKind::HighlightsR: return c == 0 ? theta * x : 0.0;
    case FilterKind::HighlightsG: return c == 1 ? theta * x : 0.0;
    case FilterKind::HighlightsB: return c == 2 ? theta * x : 0.0;
    case FilterKind::ShiftR: return c == 0 ? theta : 0.0;
    case FilterKind::ShiftG: return c == 1 ? theta : 0.0;
    case FilterKind::ShiftB: return c == 2 ? theta : 0.0;
    }
    return 0.0;
}

/// Naive renderer for masks already at image size (no smoothing).
inline Image naive_render(const Image& img, const std::vector<Layer>& layers, const FilterConstants& k)
{
    double mean = 0.0;
    for (double v : img.values())
        mean += v;
    mean /= img.values().size();
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double px[3] = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
            double lum = srgb_to_lab(Rgb{px[0], px[1], px[2]})[0] / 100.0;
            for (int c = 0; c < 3; ++c) {
                double v = px[c];
                for (const auto& l : layers) {
                    double m = l.mask ? l.mask->at(x, y) : 1.0;
                    for (const auto& a : l.args)
                        v += naive_increment(a.kind, a.theta, px, c, lum, mean, k) * m;
                }
                out.at(x, y, c) = std::min(1.0, std::max(0.0, v));
            }
        }
    return out;
}

template <int C>
double max_abs_diff(const Planar<C>& a, const Planar<C>& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.raw().size(); ++i)
        m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    return m;
}

inline double relative_error(double analytic, double numeric)
{
    return std::abs(analytic - numeric) / std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
}

} // namespace rsf::test
