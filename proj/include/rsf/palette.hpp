#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "color.hpp"
#include "image.hpp"
#include "smooth.hpp"

namespace rsf {

struct Palette {
    std::vector<Lab> colors;
    /// Set when the image had fewer distinct colours than requested.
    bool shortfall = false;
};

struct PaletteOptions {
    int max_iterations = 100;
    double tolerance = 1e-4;  ///< stop once no centre moves further (Lab units)
};

namespace detail {

struct WeightedColor {
    Lab lab;
    double weight;
};

// Distinct pixel colours in lexicographic RGB order, weighted by pixel count.
inline std::vector<WeightedColor> distinct_colors(const Image& img)
{
    std::vector<Rgb> px(img.pixel_count());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = pixel_rgb(img, i);
    std::sort(px.begin(), px.end());
    std::vector<WeightedColor> out;
    for (std::size_t i = 0; i < px.size();) {
        std::size_t j = i;
        while (j < px.size() && px[j] == px[i])
            ++j;
        out.push_back({srgb_to_lab(px[i]), static_cast<double>(j - i)});
        i = j;
    }
    return out;
}

inline double squared_distance(const Lab& a, const Lab& b)
{
    double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

} // namespace detail

/// Seeded K-means over pixel Lab values with D^2-weighted seeding.
inline Palette extract_palette(const Image& img, int k, std::uint64_t seed, const PaletteOptions& opts = {})
{
    if (k < 1)
        throw Error("palette size must be at least 1", "k");
    if (img.empty())
        throw Error("cannot extract a palette from an empty image");
    auto colors = detail::distinct_colors(img);
    Palette pal;
    if (static_cast<std::size_t>(k) >= colors.size()) {
        pal.shortfall = static_cast<std::size_t>(k) > colors.size();
        for (const auto& c : colors)
            pal.colors.push_back(c.lab);
        return pal;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = colors.size();
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

    auto pick_weighted = [&](const std::vector<double>& w) {
        double total = 0.0;
        for (double v : w)
            total += v;
        double r = unit(rng) * total;
        for (std::size_t i = 0; i < w.size(); ++i) {
            r -= w[i];
            if (r < 0.0 && w[i] > 0.0)
                return i;
        }
        for (std::size_t i = w.size(); i-- > 0;)
            if (w[i] > 0.0)
                return i;
        return std::size_t{0};
    };

    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i)
        weights[i] = colors[i].weight;
    std::vector<Lab> centers;
    centers.push_back(colors[pick_weighted(weights)].lab);
    while (centers.size() < static_cast<std::size_t>(k)) {
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], detail::squared_distance(colors[i].lab, centers.back()));
            weights[i] = colors[i].weight * nearest[i];
        }
        centers.push_back(colors[pick_weighted(weights)].lab);
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double d = detail::squared_distance(colors[i].lab, centers[c]);
                if (d < best) {
                    best = d;
                    assign[i] = c;
                }
            }
        }
        std::vector<Lab> sums(k, Lab{0, 0, 0});
        std::vector<double> mass(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < 3; ++d)
                sums[assign[i]][d] += colors[i].weight * colors[i].lab[d];
            mass[assign[i]] += colors[i].weight;
        }
        double moved = 0.0;
        for (int c = 0; c < k; ++c) {
            Lab next = centers[c];
            if (mass[c] > 0.0) {
                for (int d = 0; d < 3; ++d)
                    next[d] = sums[c][d] / mass[c];
            } else {
                // empty cluster: move it to the colour worst served by the others
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = detail::squared_distance(colors[i].lab, centers[assign[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next = colors[far].lab;
            }
            moved = std::max(moved, std::sqrt(detail::squared_distance(next, centers[c])));
            centers[c] = next;
        }
        if (moved < opts.tolerance)
            break;
    }
    pal.colors = std::move(centers);
    return pal;
}

struct PaletteMaskOptions {
    double temperature = 10.0;  ///< Lab units
    double sigma = 2.0;         ///< post-smoothing; 0 disables
    int window = default_smooth_window;
};

/// Soft assignment w_i = exp(-d_i^2 / T^2), normalized over the palette.
/// The returned masks sum to one at every pixel.
inline std::vector<Mask> palette_soft_assign(const Image& img, const Palette& palette, double temperature)
{
    if (palette.colors.empty())
        throw Error("palette is empty");
    if (!(temperature > 0.0))
        throw Error("palette temperature must be positive", "temperature");
    const std::size_t k = palette.colors.size();
    std::vector<Mask> masks(k, Mask(img.width(), img.height()));
    std::vector<double> e(k), sorted(k);
    const double t2 = temperature * temperature;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        Lab lab = srgb_to_lab(pixel_rgb(img, i));
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            e[c] = detail::squared_distance(lab, palette.colors[c]);
            dmin = std::min(dmin, e[c]);
        }
        for (std::size_t c = 0; c < k; ++c)
            e[c] = std::exp(-(e[c] - dmin) / t2);
        // Summed in value order so reordering the palette only reorders the masks.
        sorted = e;
        std::sort(sorted.begin(), sorted.end());
        double sum = 0.0;
        for (double v : sorted)
            sum += v;
        for (std::size_t c = 0; c < k; ++c)
            masks[c].raw()[i] = e[c] / sum;
    }
    return masks;
}

inline std::vector<Mask> palette_to_masks(const Image& img, const Palette& palette, const PaletteMaskOptions& opts = {})
{
    auto masks = palette_soft_assign(img, palette, opts.temperature);
    if (opts.sigma > 0.0)
        for (auto& m : masks)
            m = smooth_mask(m, SmoothKernel{opts.window, opts.sigma});
    return masks;
}

} // namespace rsf
