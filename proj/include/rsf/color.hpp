#pragma once

#include <array>
#include <cmath>

#include "image.hpp"

namespace rsf {

namespace detail {

// sRGB primaries, D65, 2 degree observer.
inline constexpr double rgb_to_xyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

// Reference white as the image of sRGB (1,1,1), so white lands exactly on a=b=0.
inline constexpr double white_x = rgb_to_xyz[0][0] + rgb_to_xyz[0][1] + rgb_to_xyz[0][2];
inline constexpr double white_y = rgb_to_xyz[1][0] + rgb_to_xyz[1][1] + rgb_to_xyz[1][2];
inline constexpr double white_z = rgb_to_xyz[2][0] + rgb_to_xyz[2][1] + rgb_to_xyz[2][2];

inline constexpr double lab_delta = 6.0 / 29.0;

inline double srgb_decode(double v)
{
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double srgb_decode_derivative(double v)
{
    return v <= 0.04045 ? 1.0 / 12.92 : 2.4 / 1.055 * std::pow((v + 0.055) / 1.055, 1.4);
}

inline double lab_f(double t)
{
    return t > lab_delta * lab_delta * lab_delta ? std::cbrt(t) : t / (3.0 * lab_delta * lab_delta) + 4.0 / 29.0;
}

inline double lab_f_derivative(double t)
{
    return t > lab_delta * lab_delta * lab_delta ? 1.0 / (3.0 * std::cbrt(t) * std::cbrt(t))
                                                 : 1.0 / (3.0 * lab_delta * lab_delta);
}

} // namespace detail

using Rgb = std::array<double, 3>;
using Lab = std::array<double, 3>;

/// Inputs are clamped to [0,1] first.
inline Lab srgb_to_lab(const Rgb& rgb)
{
    double lin[3];
    for (int c = 0; c < 3; ++c)
        lin[c] = detail::srgb_decode(clamp01(rgb[c]));
    double xyz[3];
    for (int r = 0; r < 3; ++r)
        xyz[r] = detail::rgb_to_xyz[r][0] * lin[0] + detail::rgb_to_xyz[r][1] * lin[1] +
                 detail::rgb_to_xyz[r][2] * lin[2];
    double fx = detail::lab_f(xyz[0] / detail::white_x);
    double fy = detail::lab_f(xyz[1] / detail::white_y);
    double fz = detail::lab_f(xyz[2] / detail::white_z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// L of srgb_to_lab scaled to [0,1].
inline double luminance(const Rgb& rgb)
{
    double y = 0.0;
    for (int c = 0; c < 3; ++c)
        y += detail::rgb_to_xyz[1][c] * detail::srgb_decode(clamp01(rgb[c]));
    return (116.0 * detail::lab_f(y / detail::white_y) - 16.0) / 100.0;
}

/// d luminance / d rgb. Zero on a channel that sits outside [0,1], where the
/// input clamp is active.
inline Rgb luminance_gradient(const Rgb& rgb)
{
    double y = 0.0;
    for (int c = 0; c < 3; ++c)
        y += detail::rgb_to_xyz[1][c] * detail::srgb_decode(clamp01(rgb[c]));
    double outer = 1.16 * detail::lab_f_derivative(y / detail::white_y) / detail::white_y;
    Rgb g{};
    for (int c = 0; c < 3; ++c) {
        if (rgb[c] < 0.0 || rgb[c] > 1.0)
            continue;
        g[c] = outer * detail::rgb_to_xyz[1][c] * detail::srgb_decode_derivative(rgb[c]);
    }
    return g;
}

inline Rgb pixel_rgb(const Image& img, std::size_t i)
{
    auto p = img.pixel(i);
    return {p[0], p[1], p[2]};
}

inline LabImage srgb_to_lab(const Image& img)
{
    LabImage out(img.width(), img.height());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        Lab lab = srgb_to_lab(pixel_rgb(img, i));
        auto dst = out.pixel(i);
        dst[0] = lab[0];
        dst[1] = lab[1];
        dst[2] = lab[2];
    }
    return out;
}

/// L(X)/100 per pixel.
inline Mask luminance_map(const Image& img)
{
    Mask out(img.width(), img.height());
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        out.raw()[i] = luminance(pixel_rgb(img, i));
    return out;
}

inline double lab_distance(const Lab& a, const Lab& b)
{
    double dl = a[0] - b[0], da = a[1] - b[1], db = a[2] - b[2];
    return std::sqrt(dl * dl + da * da + db * db);
}

/// Mean CIE76 colour difference.
inline double delta_e_ab(const Image& a, const Image& b)
{
    require_same_size(a, b, "delta_e_ab");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i)
        sum += lab_distance(srgb_to_lab(pixel_rgb(a, i)), srgb_to_lab(pixel_rgb(b, i)));
    return sum / static_cast<double>(a.pixel_count());
}

} // namespace rsf
