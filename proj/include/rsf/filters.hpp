#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "color.hpp"
#include "image.hpp"

namespace rsf {

/// Closed set of filter kinds. The untagged Shadows/Midtones/Highlights are
/// the tied variants: one argument drives all three channels.
enum class FilterKind : int {
    Contrast,
    Saturation,
    Hue,
    Temperature,
    Shadows,
    ShadowsR,
    ShadowsG,
    ShadowsB,
    Midtones,
    MidtonesR,
    MidtonesG,
    MidtonesB,
    Highlights,
    HighlightsR,
    HighlightsG,
    HighlightsB,
    ShiftR,
    ShiftG,
    ShiftB,
};

inline constexpr std::array all_filter_kinds = {
    FilterKind::Contrast,    FilterKind::Saturation,  FilterKind::Hue,         FilterKind::Temperature,
    FilterKind::Shadows,     FilterKind::ShadowsR,    FilterKind::ShadowsG,    FilterKind::ShadowsB,
    FilterKind::Midtones,    FilterKind::MidtonesR,   FilterKind::MidtonesG,   FilterKind::MidtonesB,
    FilterKind::Highlights,  FilterKind::HighlightsR, FilterKind::HighlightsG, FilterKind::HighlightsB,
    FilterKind::ShiftR,      FilterKind::ShiftG,      FilterKind::ShiftB,
};

inline constexpr std::array<std::string_view, all_filter_kinds.size()> filter_kind_names = {
    "contrast",    "saturation",   "hue",          "temperature",  "shadows",
    "shadows_r",   "shadows_g",    "shadows_b",    "midtones",     "midtones_r",
    "midtones_g",  "midtones_b",   "highlights",   "highlights_r", "highlights_g",
    "highlights_b", "shift_r",     "shift_g",      "shift_b",
};

inline std::string_view to_string(FilterKind kind) { return filter_kind_names[static_cast<std::size_t>(kind)]; }

inline std::optional<FilterKind> parse_filter_kind(std::string_view name)
{
    for (std::size_t i = 0; i < filter_kind_names.size(); ++i)
        if (filter_kind_names[i] == name)
            return all_filter_kinds[i];
    return std::nullopt;
}

inline bool is_shift(FilterKind k)
{
    return k == FilterKind::ShiftR || k == FilterKind::ShiftG || k == FilterKind::ShiftB;
}

/// Channel addressed by a per-channel variant, or -1 for kinds that touch all
/// three channels.
inline int filter_channel(FilterKind k)
{
    switch (k) {
    case FilterKind::ShadowsR:
    case FilterKind::MidtonesR:
    case FilterKind::HighlightsR:
    case FilterKind::ShiftR:
        return 0;
    case FilterKind::ShadowsG:
    case FilterKind::MidtonesG:
    case FilterKind::HighlightsG:
    case FilterKind::ShiftG:
        return 1;
    case FilterKind::ShadowsB:
    case FilterKind::MidtonesB:
    case FilterKind::HighlightsB:
    case FilterKind::ShiftB:
        return 2;
    default:
        return -1;
    }
}

/// Gains for the hue and temperature filters. Temperature uses
/// alpha_t[0..1] on R (theta >= 0 / < 0), alpha_t[2] on G (theta < 0 only)
/// and alpha_t[3..4] on B.
struct FilterConstants {
    double alpha_h = 1.0;
    std::array<double, 5> alpha_t = {1.0, 1.0, 0.5, 1.0, 1.0};

    void validate() const
    {
        if (!(alpha_h > 0.0) || !std::isfinite(alpha_h))
            throw Error("alpha_h must be a positive finite number", "constants.alpha_h");
        for (double a : alpha_t)
            if (!(a > 0.0) || !std::isfinite(a))
                throw Error("alpha_t entries must be positive finite numbers", "constants.alpha_t");
    }

    friend bool operator==(const FilterConstants&, const FilterConstants&) = default;
};

inline constexpr double default_theta_bound = 1.0;

struct FilterArg {
    FilterKind kind = FilterKind::Highlights;
    double theta = 0.0;

    friend bool operator==(const FilterArg&, const FilterArg&) = default;
};

/// Image-wide quantities the filters read besides the pixel itself.
struct FilterContext {
    double image_mean = 0.0;
    Mask lum;  ///< luminance_map(img)

    static FilterContext of(const Image& img) { return {mean_value(img), luminance_map(img)}; }
};

/// Which linear branch a filter evaluates. Only temperature distinguishes
/// them; every other kind has a single branch.
enum class Branch { NonNegative, Negative };

inline Branch branch_of(double theta) { return theta >= 0.0 ? Branch::NonNegative : Branch::Negative; }

/// Increment per unit argument for one pixel: increment = theta * unit.
/// `mean` is the image mean, `lum` the pixel's L/100.
inline Rgb unit_increment(FilterKind kind, Branch branch, const Rgb& x, double lum, double mean,
                          const FilterConstants& k)
{
    const int ch = filter_channel(kind);
    Rgb u{0.0, 0.0, 0.0};
    switch (kind) {
    case FilterKind::Contrast:
        for (int c = 0; c < 3; ++c)
            u[c] = x[c] - mean;
        break;
    case FilterKind::Saturation:
        for (int c = 0; c < 3; ++c)
            u[c] = x[c] - lum;
        break;
    case FilterKind::Hue:
        u[0] = k.alpha_h * x[0];
        u[1] = k.alpha_h * x[1];
        u[2] = -0.5 * k.alpha_h * x[2];
        break;
    case FilterKind::Temperature:
        if (branch == Branch::NonNegative) {
            u[0] = k.alpha_t[0] * x[0];
            u[2] = k.alpha_t[3] * x[2];
        } else {
            u[0] = k.alpha_t[1] * x[0];
            u[1] = k.alpha_t[2] * x[1];
            u[2] = k.alpha_t[4] * x[2];
        }
        break;
    case FilterKind::Shadows:
        for (int c = 0; c < 3; ++c)
            u[c] = 1.0 - x[c];
        break;
    case FilterKind::Midtones:
        for (int c = 0; c < 3; ++c)
            u[c] = 0.25 - (x[c] - 0.5) * (x[c] - 0.5);
        break;
    case FilterKind::Highlights:
        u = x;
        break;
    case FilterKind::ShadowsR:
    case FilterKind::ShadowsG:
    case FilterKind::ShadowsB:
        u[ch] = 1.0 - x[ch];
        break;
    case FilterKind::MidtonesR:
    case FilterKind::MidtonesG:
    case FilterKind::MidtonesB:
        u[ch] = 0.25 - (x[ch] - 0.5) * (x[ch] - 0.5);
        break;
    case FilterKind::HighlightsR:
    case FilterKind::HighlightsG:
    case FilterKind::HighlightsB:
        u[ch] = x[ch];
        break;
    case FilterKind::ShiftR:
    case FilterKind::ShiftG:
    case FilterKind::ShiftB:
        u[ch] = 1.0;
        break;
    }
    return u;
}

/// Vector-Jacobian product of unit_increment with respect to the pixel, for
/// everything except the image-mean coupling of contrast (see
/// contrast_mean_coupling). `upstream` is dL/d(unit).
inline Rgb unit_increment_vjp(FilterKind kind, Branch branch, const Rgb& x, const Rgb& upstream,
                              const FilterConstants& k)
{
    const int ch = filter_channel(kind);
    Rgb g{0.0, 0.0, 0.0};
    switch (kind) {
    case FilterKind::Contrast:
        g = upstream;
        break;
    case FilterKind::Saturation: {
        Rgb dl = luminance_gradient(x);
        double s = upstream[0] + upstream[1] + upstream[2];
        for (int c = 0; c < 3; ++c)
            g[c] = upstream[c] - s * dl[c];
        break;
    }
    case FilterKind::Hue:
        g = {k.alpha_h * upstream[0], k.alpha_h * upstream[1], -0.5 * k.alpha_h * upstream[2]};
        break;
    case FilterKind::Temperature:
        if (branch == Branch::NonNegative)
            g = {k.alpha_t[0] * upstream[0], 0.0, k.alpha_t[3] * upstream[2]};
        else
            g = {k.alpha_t[1] * upstream[0], k.alpha_t[2] * upstream[1], k.alpha_t[4] * upstream[2]};
        break;
    case FilterKind::Shadows:
        for (int c = 0; c < 3; ++c)
            g[c] = -upstream[c];
        break;
    case FilterKind::Midtones:
        for (int c = 0; c < 3; ++c)
            g[c] = -2.0 * (x[c] - 0.5) * upstream[c];
        break;
    case FilterKind::Highlights:
        g = upstream;
        break;
    case FilterKind::ShadowsR:
    case FilterKind::ShadowsG:
    case FilterKind::ShadowsB:
        g[ch] = -upstream[ch];
        break;
    case FilterKind::MidtonesR:
    case FilterKind::MidtonesG:
    case FilterKind::MidtonesB:
        g[ch] = -2.0 * (x[ch] - 0.5) * upstream[ch];
        break;
    case FilterKind::HighlightsR:
    case FilterKind::HighlightsG:
    case FilterKind::HighlightsB:
        g[ch] = upstream[ch];
        break;
    case FilterKind::ShiftR:
    case FilterKind::ShiftG:
    case FilterKind::ShiftB:
        break;
    }
    return g;
}

namespace detail {

inline void check_theta(double theta)
{
    if (!std::isfinite(theta))
        throw Error("filter argument must be finite", "theta");
}

inline void check_context(const Image& img, const FilterContext& ctx)
{
    if (ctx.lum.size() != img.size())
        throw Error("luminance buffer does not match image dimensions");
}

} // namespace detail

/// F(theta, X) - X for every pixel. Not clamped.
inline Field3 filter_increment(FilterKind kind, double theta, const Image& img, const FilterConstants& consts,
                               const FilterContext& ctx)
{
    detail::check_theta(theta);
    detail::check_context(img, ctx);
    Field3 out(img.width(), img.height());
    const Branch br = branch_of(theta);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        Rgb u = unit_increment(kind, br, pixel_rgb(img, i), ctx.lum.raw()[i], ctx.image_mean, consts);
        auto dst = out.pixel(i);
        for (int c = 0; c < 3; ++c)
            dst[c] = theta * u[c];
    }
    return out;
}

/// d(F(theta, X) - X)/d theta. At theta == 0 temperature takes the
/// non-negative branch.
inline Field3 filter_dtheta(FilterKind kind, double theta, const Image& img, const FilterConstants& consts,
                            const FilterContext& ctx)
{
    detail::check_theta(theta);
    detail::check_context(img, ctx);
    Field3 out(img.width(), img.height());
    const Branch br = branch_of(theta);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        Rgb u = unit_increment(kind, br, pixel_rgb(img, i), ctx.lum.raw()[i], ctx.image_mean, consts);
        auto dst = out.pixel(i);
        for (int c = 0; c < 3; ++c)
            dst[c] = u[c];
    }
    return out;
}

inline Field3 filter_increment(FilterKind kind, double theta, const Image& img, const FilterConstants& consts = {})
{
    return filter_increment(kind, theta, img, consts, FilterContext::of(img));
}

inline Field3 filter_dtheta(FilterKind kind, double theta, const Image& img, const FilterConstants& consts = {})
{
    return filter_dtheta(kind, theta, img, consts, FilterContext::of(img));
}

} // namespace rsf
