#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "filters.hpp"
#include "recipe.hpp"

namespace rsf {

namespace detail {

struct ResolvedLayer {
    const Layer* layer;
    std::optional<Mask> mask;
};

inline std::vector<ResolvedLayer> resolve_layers(std::span<const Layer> layers, Size size, int window)
{
    std::vector<ResolvedLayer> out;
    out.reserve(layers.size());
    for (const Layer& l : layers)
        out.push_back({&l, effective_mask(l, size, window)});
    return out;
}

/// clamp(X + sum of masked increments), every increment read from `src`.
/// Terms are added in ascending order of value so the result does not depend
/// on the order of layers or filters.
inline Image composite(const Image& src, std::span<const ResolvedLayer> layers, const FilterConstants& consts)
{
    const FilterContext ctx = FilterContext::of(src);
    Image out(src.width(), src.height());
    std::size_t n_terms = 0;
    for (const auto& rl : layers)
        n_terms += rl.layer->args.size();
    std::vector<double> terms[3];
    for (auto& t : terms)
        t.reserve(n_terms);

    for (std::size_t i = 0; i < src.pixel_count(); ++i) {
        const Rgb x = pixel_rgb(src, i);
        const double lum = ctx.lum.raw()[i];
        for (auto& t : terms)
            t.clear();
        for (const auto& rl : layers) {
            const double m = rl.mask ? rl.mask->raw()[i] : 1.0;
            for (const FilterArg& a : rl.layer->args) {
                Rgb u = unit_increment(a.kind, branch_of(a.theta), x, lum, ctx.image_mean, consts);
                for (int c = 0; c < 3; ++c)
                    terms[c].push_back(a.theta * u[c] * m);
            }
        }
        auto dst = out.pixel(i);
        for (int c = 0; c < 3; ++c) {
            std::sort(terms[c].begin(), terms[c].end());
            double sum = 0.0;
            for (double t : terms[c])
                sum += t;
            dst[c] = clamp01(x[c] + sum);
        }
    }
    return out;
}

inline void check_canvas(const Image& img, const Recipe& recipe)
{
    if (recipe.canvas && *recipe.canvas != img.size())
        throw Error("recipe canvas " + std::to_string(recipe.canvas->width) + "x" +
                        std::to_string(recipe.canvas->height) + " does not match image " +
                        std::to_string(img.width()) + "x" + std::to_string(img.height()),
                    "canvas");
}

} // namespace detail

/// Parallel compositing: Y = clamp(X + sum_l sum_n dF(theta, X) * M_l).
inline Image render(const Image& img, const Recipe& recipe)
{
    recipe.validate();
    detail::check_canvas(img, recipe);
    auto resolved = detail::resolve_layers(recipe.layers, img.size(), recipe.smooth_window);
    return detail::composite(img, resolved, recipe.constants);
}

/// Cascaded baseline: each layer reads the previous layer's clamped output.
inline Image render_sequential(const Image& img, std::span<const Layer> ordered_layers,
                               const FilterConstants& consts = {}, int window = default_smooth_window)
{
    Recipe check{{ordered_layers.begin(), ordered_layers.end()}, consts, std::nullopt, window};
    check.validate();
    Image y = img;
    for (const Layer& l : ordered_layers) {
        detail::ResolvedLayer rl{&l, effective_mask(l, img.size(), window)};
        y = detail::composite(y, std::span<const detail::ResolvedLayer>(&rl, 1), consts);
    }
    return y;
}

inline Image render_sequential(const Image& img, const Recipe& recipe)
{
    detail::check_canvas(img, recipe);
    return render_sequential(img, recipe.layers, recipe.constants, recipe.smooth_window);
}

} // namespace rsf
