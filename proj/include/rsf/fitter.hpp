#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "adam.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "render.hpp"

namespace rsf {

enum class MaskMode { FixedMasks, FreeMasks };

struct FitConfig {
    double lr = 0.02;
    int iterations = 2000;
    AdamConfig adam;
    /// Cosine restart period in steps; 0 decays once over `iterations`.
    int decay_period = 0;
    double theta_bound = default_theta_bound;
    MaskMode mode = MaskMode::FixedMasks;
    int grid = 32;
    int free_masks = 5;
    LossKind loss = LossKind::L1;
    std::uint64_t seed = 0;
    /// Uniform jitter added to the initial arguments.
    double theta_jitter = 0.01;
    /// Filters given to every masked layer.
    std::vector<FilterKind> layer_filters = {FilterKind::Highlights};
    /// Filters of the extra global layer; empty adds no global layer.
    std::vector<FilterKind> global_filters = {FilterKind::ShiftR, FilterKind::ShiftG, FilterKind::ShiftB};
    /// Initial smoothing of masked layers (0 = none).
    double sigma = 0.0;
    bool learn_sigma = false;
    double mask_lr_scale = 10.0;
    double sigma_lr_scale = 10.0;
    int window = default_smooth_window;
    FilterConstants constants;
    Composition composition = Composition::Parallel;
    std::vector<std::size_t> order;

    void validate() const
    {
        if (!(lr > 0.0))
            throw Error("learning rate must be positive", "lr");
        if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) || !(adam.beta2 > 0.0 && adam.beta2 < 1.0))
            throw Error("Adam betas must lie in (0,1)", "adam");
        if (grid < 2)
            throw Error("free-mask grid must be at least 2", "grid");
        if (iterations < 0)
            throw Error("iteration count must be non-negative", "iterations");
        if (!(theta_bound > 0.0))
            throw Error("theta bound must be positive", "theta_bound");
    }
};

struct FitReport {
    Recipe recipe;
    std::vector<double> loss_history;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    MetricReport metrics;
    int iterations_run = 0;
};

/// Optimizes a prepared model against `target` with projected Adam and a
/// cosine-decayed learning rate. The returned parameters have the lowest loss
/// seen, so the final loss never exceeds the initial one.
inline std::vector<double> optimize(const CompositeModel& model, const Image& target, const FitConfig& cfg,
                                    FitReport& report)
{
    cfg.validate();
    std::vector<double> p = model.initial_parameters(cfg.seed, cfg.theta_jitter);
    std::vector<double> scale(p.size(), 1.0);
    for (std::size_t li = 0; li < model.layers().size(); ++li) {
        if (auto g = model.grid_index(li))
            for (int i = 0; i < cfg.grid * cfg.grid; ++i)
                scale[*g + i] = cfg.mask_lr_scale;
        if (auto s = model.sigma_index(li))
            scale[*s] = cfg.sigma_lr_scale;
    }
    AdamState state(p.size());
    std::vector<double> grad;
    std::vector<double> best = p;
    double best_loss = std::numeric_limits<double>::infinity();
    const long period = cfg.decay_period > 0 ? cfg.decay_period : cfg.iterations;

    report.loss_history.clear();
    for (int it = 0; it < cfg.iterations; ++it) {
        double loss = model.evaluate(p, target, cfg.loss, &grad);
        if (it == 0)
            report.initial_loss = loss;
        report.loss_history.push_back(loss);
        if (loss < best_loss) {
            best_loss = loss;
            best = p;
        }
        adam_step(p, state, grad, cosine_lr(cfg.lr, it, period), cfg.adam, scale);
        model.project(p);
    }
    double last = model.evaluate(p, target, cfg.loss);
    if (cfg.iterations == 0)
        report.initial_loss = last;
    report.loss_history.push_back(last);
    if (last <= best_loss) {
        best_loss = last;
        best = p;
    }
    report.final_loss = best_loss;
    report.iterations_run = cfg.iterations;
    return best;
}

/// Fits arbitrary layer templates.
inline FitReport fit_layers(const Image& input, const Image& target, std::vector<ModelLayer> layers,
                            const FitConfig& cfg)
{
    require_same_size(input, target, "fit");
    cfg.validate();
    ModelOptions opts;
    opts.grid = cfg.grid;
    opts.window = cfg.window;
    opts.learn_sigma = cfg.learn_sigma;
    opts.composition = cfg.composition;
    opts.order = cfg.order;
    opts.theta_bound = cfg.theta_bound;
    CompositeModel model(input, std::move(layers), cfg.constants, opts);
    FitReport report;
    auto p = optimize(model, target, cfg, report);
    report.recipe = model.to_recipe(p);
    Image out = cfg.composition == Composition::Parallel ? render(input, report.recipe)
                                                         : render_sequential(input, report.recipe);
    report.metrics = compare(out, target);
    return report;
}

/// Builds the layer set from `masks` (FixedMasks) or cfg.free_masks logit
/// grids (FreeMasks), each carrying cfg.layer_filters, plus an optional
/// global layer with cfg.global_filters.
inline std::vector<ModelLayer> fit_layout(const Image& input, const std::optional<std::vector<Mask>>& masks,
                                          const FitConfig& cfg)
{
    std::vector<ModelLayer> layers;
    if (cfg.mode == MaskMode::FixedMasks) {
        if (!masks)
            throw Error("fixed-mask fitting needs masks", "masks");
        for (const auto& m : *masks) {
            ModelLayer l;
            l.source = MaskSource::Fixed;
            l.fixed = resize_bilinear(m, input.width(), input.height());
            l.kinds = cfg.layer_filters;
            l.sigma = cfg.sigma;
            layers.push_back(std::move(l));
        }
    } else {
        if (masks)
            throw Error("free-mask fitting does not take masks", "masks");
        for (int i = 0; i < cfg.free_masks; ++i) {
            ModelLayer l;
            l.source = MaskSource::Free;
            l.kinds = cfg.layer_filters;
            l.sigma = cfg.sigma;
            layers.push_back(std::move(l));
        }
    }
    if (!cfg.global_filters.empty()) {
        ModelLayer g;
        g.kinds = cfg.global_filters;
        layers.push_back(std::move(g));
    }
    for (const auto& l : layers)
        if (l.kinds.empty())
            throw Error("every layer needs at least one filter", "filters");
    return layers;
}

inline FitReport fit(const Image& input, const Image& target, const std::optional<std::vector<Mask>>& masks,
                     const FitConfig& cfg)
{
    require_same_size(input, target, "fit");
    return fit_layers(input, target, fit_layout(input, masks, cfg), cfg);
}

} // namespace rsf
