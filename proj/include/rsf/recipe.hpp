#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "filters.hpp"
#include "image.hpp"
#include "smooth.hpp"

namespace rsf {

/// One region and the filters applied inside it. A layer without a mask is
/// global (M = 1 everywhere).
struct Layer {
    std::optional<Mask> mask;
    /// Where the mask came from when read from or written to a recipe file.
    std::string mask_source;
    std::vector<FilterArg> args;
    /// Gaussian smoothing of the mask in pixels; 0 disables it.
    double sigma = 0.0;

    bool is_global() const { return !mask.has_value(); }

    static Layer global(std::vector<FilterArg> args) { return Layer{std::nullopt, {}, std::move(args), 0.0}; }

    static Layer masked(Mask m, std::vector<FilterArg> args, double sigma = 0.0)
    {
        return Layer{std::move(m), {}, std::move(args), sigma};
    }
};

/// The complete white-box edit.
struct Recipe {
    std::vector<Layer> layers;
    FilterConstants constants;
    /// Expected image size; nullopt accepts any size.
    std::optional<Size> canvas;
    int smooth_window = default_smooth_window;
    double theta_bound = default_theta_bound;

    void validate() const
    {
        constants.validate();
        if (!(theta_bound > 0.0) || !std::isfinite(theta_bound))
            throw Error("theta bound must be positive", "theta_bound");
        if (smooth_window < 1 || smooth_window % 2 == 0)
            throw Error("smoothing window must be odd", "smooth_window");
        for (std::size_t li = 0; li < layers.size(); ++li) {
            const Layer& l = layers[li];
            const std::string where = "layers[" + std::to_string(li) + "]";
            if (l.args.empty())
                throw Error(where + " has no filters", where + ".filters");
            if (!std::isfinite(l.sigma) || l.sigma < 0.0)
                throw Error(where + ".sigma must be a finite value >= 0", where + ".sigma");
            for (std::size_t ai = 0; ai < l.args.size(); ++ai) {
                const std::string f = where + ".filters[" + std::to_string(ai) + "].theta";
                double t = l.args[ai].theta;
                if (!std::isfinite(t))
                    throw Error(f + " is not finite", f);
                if (std::abs(t) > theta_bound)
                    throw Error(f + " = " + std::to_string(t) + " exceeds bound " + std::to_string(theta_bound), f);
            }
            if (l.mask) {
                for (double v : l.mask->values())
                    if (!(v >= 0.0 && v <= 1.0))
                        throw Error(where + ".mask has values outside [0,1]", where + ".mask");
            }
        }
    }

    std::size_t filter_count() const
    {
        std::size_t n = 0;
        for (const auto& l : layers)
            n += l.args.size();
        return n;
    }
};

/// Mask resized to `size` and smoothed with the layer's sigma. Global layers
/// yield nullopt.
inline std::optional<Mask> effective_mask(const Layer& layer, Size size, int window = default_smooth_window)
{
    if (!layer.mask)
        return std::nullopt;
    Mask m = resize_bilinear(*layer.mask, size.width, size.height);
    if (layer.sigma > 0.0)
        m = smooth_mask(m, SmoothKernel{window, layer.sigma});
    return m;
}

} // namespace rsf
