#pragma once

// Differentiable form of the compositor used by the fitter. Parameters are a
// flat vector: every filter argument, then each free layer's logit grid, then
// each learnable smoothing sigma.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "filters.hpp"
#include "recipe.hpp"
#include "smooth.hpp"

namespace rsf {

enum class LossKind { L1, L2 };
enum class Composition { Parallel, Sequential };

enum class MaskSource { Global, Fixed, Free };

struct ModelLayer {
    MaskSource source = MaskSource::Global;
    Mask fixed;  ///< Fixed layers only; resized to the image by the model
    std::vector<FilterKind> kinds;
    std::vector<double> theta_init;  ///< empty means all zeros
    double sigma = 0.0;              ///< 0 disables smoothing
};

struct ModelOptions {
    int grid = 32;
    int window = default_smooth_window;
    bool learn_sigma = false;
    double sigma_min = 0.25;
    Composition composition = Composition::Parallel;
    /// Layer order for sequential composition; empty means as given.
    std::vector<std::size_t> order;
    double theta_bound = default_theta_bound;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double loss_value(LossKind kind, double r) { return kind == LossKind::L1 ? std::abs(r) : r * r; }

/// d loss / d residual, with the L1 subgradient at 0 taken as 0.
inline double loss_derivative(LossKind kind, double r)
{
    if (kind == LossKind::L2)
        return 2.0 * r;
    return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}

class CompositeModel {
public:
    CompositeModel(Image input, std::vector<ModelLayer> layers, FilterConstants consts, ModelOptions opts = {})
        : input_(std::move(input)), layers_(std::move(layers)), consts_(consts), opts_(std::move(opts)),
          ctx0_(FilterContext::of(input_))
    {
        consts_.validate();
        if (opts_.grid < 2)
            throw Error("free-mask grid must be at least 2", "grid");
        const Size size = input_.size();
        std::size_t offset = 0;
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            auto& l = layers_[li];
            if (l.kinds.empty())
                throw Error("layer " + std::to_string(li) + " has no filters");
            if (!l.theta_init.empty() && l.theta_init.size() != l.kinds.size())
                throw Error("layer " + std::to_string(li) + ": theta_init does not match its filters");
            if (l.source == MaskSource::Fixed)
                l.fixed = resize_bilinear(l.fixed, size.width, size.height);
            if (l.source == MaskSource::Global && l.sigma != 0.0)
                l.sigma = 0.0;
            theta_offset_.push_back(offset);
            offset += l.kinds.size();
        }
        theta_count_ = offset;
        for (auto& l : layers_) {
            grid_offset_.push_back(l.source == MaskSource::Free ? offset : npos);
            if (l.source == MaskSource::Free)
                offset += static_cast<std::size_t>(opts_.grid) * opts_.grid;
        }
        for (auto& l : layers_) {
            bool learn = opts_.learn_sigma && l.source != MaskSource::Global && l.sigma > 0.0;
            sigma_offset_.push_back(learn ? offset : npos);
            if (learn)
                ++offset;
        }
        param_count_ = offset;

        if (opts_.composition == Composition::Sequential) {
            std::vector<std::size_t> order = opts_.order;
            if (order.empty()) {
                order.resize(layers_.size());
                std::iota(order.begin(), order.end(), std::size_t{0});
            }
            std::vector<std::size_t> sorted = order;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i)
                if (sorted.size() != layers_.size() || sorted[i] != i)
                    throw Error("sequential order must be a permutation of the layers");
            for (auto li : order)
                stages_.push_back({li});
        } else {
            std::vector<std::size_t> all(layers_.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            stages_.push_back(all);
        }

        // Masks that never change are smoothed once.
        cached_.resize(layers_.size());
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            const auto& l = layers_[li];
            if (l.source == MaskSource::Fixed && sigma_offset_[li] == npos)
                cached_[li] = l.sigma > 0.0 ? smooth_mask(l.fixed, SmoothKernel{opts_.window, l.sigma}) : l.fixed;
        }
    }

    std::size_t parameter_count() const { return param_count_; }
    std::size_t theta_count() const { return theta_count_; }
    const std::vector<ModelLayer>& layers() const { return layers_; }
    const Image& input() const { return input_; }

    std::size_t theta_index(std::size_t layer, std::size_t arg) const { return theta_offset_[layer] + arg; }
    std::optional<std::size_t> grid_index(std::size_t layer) const
    {
        return grid_offset_[layer] == npos ? std::nullopt : std::optional(grid_offset_[layer]);
    }
    std::optional<std::size_t> sigma_index(std::size_t layer) const
    {
        return sigma_offset_[layer] == npos ? std::nullopt : std::optional(sigma_offset_[layer]);
    }

    /// Starting point: theta_init plus uniform jitter, small random logits
    /// for free grids, and each layer's sigma.
    std::vector<double> initial_parameters(std::uint64_t seed, double theta_jitter = 0.0, double logit_scale = 0.1) const
    {
        std::vector<double> p(param_count_, 0.0);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> jitter(-1.0, 1.0);
        std::normal_distribution<double> logits(0.0, 1.0);
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            const auto& l = layers_[li];
            for (std::size_t a = 0; a < l.kinds.size(); ++a) {
                double base = l.theta_init.empty() ? 0.0 : l.theta_init[a];
                p[theta_offset_[li] + a] = base + theta_jitter * jitter(rng);
            }
        }
        for (std::size_t li = 0; li < layers_.size(); ++li)
            if (grid_offset_[li] != npos)
                for (int i = 0; i < opts_.grid * opts_.grid; ++i)
                    p[grid_offset_[li] + i] = logit_scale * logits(rng);
        for (std::size_t li = 0; li < layers_.size(); ++li)
            if (sigma_offset_[li] != npos)
                p[sigma_offset_[li]] = layers_[li].sigma;
        project(p);
        return p;
    }

    /// Keeps arguments inside the bound and sigmas inside [sigma_min, window/2].
    void project(std::span<double> p) const
    {
        for (std::size_t i = 0; i < theta_count_; ++i)
            p[i] = std::clamp(p[i], -opts_.theta_bound, opts_.theta_bound);
        const double sigma_max = std::max(opts_.sigma_min, opts_.window / 2.0);
        for (auto off : sigma_offset_)
            if (off != npos)
                p[off] = std::clamp(p[off], opts_.sigma_min, sigma_max);
    }

    double sigma_of(std::span<const double> p, std::size_t li) const
    {
        return sigma_offset_[li] == npos ? layers_[li].sigma : p[sigma_offset_[li]];
    }

    /// Layer mask before smoothing, at image resolution. Global layers give
    /// an empty optional.
    std::optional<Mask> raw_mask(std::span<const double> p, std::size_t li) const
    {
        const auto& l = layers_[li];
        if (l.source == MaskSource::Global)
            return std::nullopt;
        if (l.source == MaskSource::Fixed)
            return l.fixed;
        Mask grid(opts_.grid, opts_.grid);
        for (int i = 0; i < opts_.grid * opts_.grid; ++i)
            grid.raw()[i] = sigmoid(p[grid_offset_[li] + i]);
        return resize_bilinear(grid, input_.width(), input_.height());
    }

    std::optional<Mask> effective_mask(std::span<const double> p, std::size_t li) const
    {
        if (cached_[li])
            return cached_[li];
        auto raw = raw_mask(p, li);
        double s = sigma_of(p, li);
        if (raw && s > 0.0)
            return smooth_mask(*raw, SmoothKernel{opts_.window, s});
        return raw;
    }

    Image forward(std::span<const double> p) const
    {
        Trace t = run(p);
        return t.stage_input.back();
    }

    /// Mean per-value loss against `target`; fills `grad` (resized to
    /// parameter_count) when given. Clamped values pass no gradient.
    double evaluate(std::span<const double> p, const Image& target, LossKind loss,
                    std::vector<double>* grad = nullptr) const
    {
        require_same_size(input_, target, "fit");
        Trace t = run(p);
        const Image& y = t.stage_input.back();
        const double n = static_cast<double>(y.raw().size());
        double total = 0.0;
        Field3 g(y.width(), y.height());
        for (std::size_t i = 0; i < y.raw().size(); ++i) {
            double r = y.raw()[i] - target.raw()[i];
            total += loss_value(loss, r);
            g.raw()[i] = loss_derivative(loss, r) / n;
        }
        if (grad)
            backward(p, t, std::move(g), *grad);
        return total / n;
    }

    /// Recipe equivalent to the parameters. Free masks are written at image
    /// resolution.
    Recipe to_recipe(std::span<const double> p) const
    {
        Recipe r;
        r.constants = consts_;
        r.smooth_window = opts_.window;
        r.theta_bound = opts_.theta_bound;
        const auto emit = [&](std::size_t li) {
            const auto& l = layers_[li];
            Layer out;
            out.mask = raw_mask(p, li);
            out.sigma = out.mask ? sigma_of(p, li) : 0.0;
            for (std::size_t a = 0; a < l.kinds.size(); ++a)
                out.args.push_back({l.kinds[a], p[theta_offset_[li] + a]});
            r.layers.push_back(std::move(out));
        };
        for (const auto& stage : stages_)
            for (auto li : stage)
                emit(li);
        return r;
    }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    struct Trace {
        std::vector<std::optional<Mask>> raw;
        std::vector<std::optional<Mask>> mask;
        std::vector<Image> stage_input;  // stages + 1 entries, last is the output
        std::vector<Field3> pre;         // unclamped stage outputs
        std::vector<FilterContext> ctx;
    };

    Trace run(std::span<const double> p) const
    {
        if (p.size() != param_count_)
            throw Error("parameter vector has the wrong length");
        Trace t;
        t.raw.resize(layers_.size());
        t.mask.resize(layers_.size());
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            if (cached_[li]) {
                t.mask[li] = cached_[li];
                continue;
            }
            t.raw[li] = raw_mask(p, li);
            double s = sigma_of(p, li);
            t.mask[li] = (t.raw[li] && s > 0.0) ? smooth_mask(*t.raw[li], SmoothKernel{opts_.window, s}) : t.raw[li];
        }
        t.stage_input.push_back(input_);
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            const Image& x = t.stage_input.back();
            t.ctx.push_back(s == 0 ? ctx0_ : FilterContext::of(x));
            const FilterContext& ctx = t.ctx.back();
            Field3 pre(x.width(), x.height());
            for (std::size_t i = 0; i < x.pixel_count(); ++i) {
                const Rgb xi = pixel_rgb(x, i);
                Rgb acc{0.0, 0.0, 0.0};
                for (auto li : stages_[s]) {
                    const double m = t.mask[li] ? t.mask[li]->raw()[i] : 1.0;
                    const auto& l = layers_[li];
                    for (std::size_t a = 0; a < l.kinds.size(); ++a) {
                        double theta = p[theta_offset_[li] + a];
                        Rgb u = unit_increment(l.kinds[a], branch_of(theta), xi, ctx.lum.raw()[i], ctx.image_mean,
                                               consts_);
                        for (int c = 0; c < 3; ++c)
                            acc[c] += theta * u[c] * m;
                    }
                }
                for (int c = 0; c < 3; ++c)
                    pre.raw()[i * 3 + c] = xi[c] + acc[c];
            }
            Image out(x.width(), x.height());
            for (std::size_t i = 0; i < pre.raw().size(); ++i)
                out.raw()[i] = clamp01(pre.raw()[i]);
            t.pre.push_back(std::move(pre));
            t.stage_input.push_back(std::move(out));
        }
        return t;
    }

    void backward(std::span<const double> p, const Trace& t, Field3 g, std::vector<double>& grad) const
    {
        grad.assign(param_count_, 0.0);
        std::vector<std::optional<Mask>> gmask(layers_.size());
        for (std::size_t li = 0; li < layers_.size(); ++li)
            if (t.mask[li])
                gmask[li] = Mask(input_.width(), input_.height());

        for (std::size_t s = stages_.size(); s-- > 0;) {
            const Image& x = t.stage_input[s];
            const Field3& pre = t.pre[s];
            const FilterContext& ctx = t.ctx[s];
            const bool need_input_grad = s > 0;
            Field3 gx(x.width(), x.height());
            double contrast_coupling = 0.0;
            const double n_values = static_cast<double>(x.raw().size());

            for (std::size_t i = 0; i < x.pixel_count(); ++i) {
                Rgb gp;
                for (int c = 0; c < 3; ++c) {
                    double v = pre.raw()[i * 3 + c];
                    gp[c] = (v < 0.0 || v > 1.0) ? 0.0 : g.raw()[i * 3 + c];
                }
                if (gp[0] == 0.0 && gp[1] == 0.0 && gp[2] == 0.0) {
                    continue;
                }
                const Rgb xi = pixel_rgb(x, i);
                Rgb gxi = gp;
                for (auto li : stages_[s]) {
                    const double m = t.mask[li] ? t.mask[li]->raw()[i] : 1.0;
                    const auto& l = layers_[li];
                    double gm = 0.0;
                    for (std::size_t a = 0; a < l.kinds.size(); ++a) {
                        const double theta = p[theta_offset_[li] + a];
                        const Branch br = branch_of(theta);
                        Rgb u = unit_increment(l.kinds[a], br, xi, ctx.lum.raw()[i], ctx.image_mean, consts_);
                        double dot = gp[0] * u[0] + gp[1] * u[1] + gp[2] * u[2];
                        grad[theta_offset_[li] + a] += dot * m;
                        gm += theta * dot;
                        if (need_input_grad) {
                            Rgb up{gp[0] * theta * m, gp[1] * theta * m, gp[2] * theta * m};
                            Rgb v = unit_increment_vjp(l.kinds[a], br, xi, up, consts_);
                            for (int c = 0; c < 3; ++c)
                                gxi[c] += v[c];
                            if (l.kinds[a] == FilterKind::Contrast)
                                contrast_coupling += up[0] + up[1] + up[2];
                        }
                    }
                    if (gmask[li])
                        gmask[li]->raw()[i] += gm;
                }
                if (need_input_grad)
                    for (int c = 0; c < 3; ++c)
                        gx.raw()[i * 3 + c] = gxi[c];
            }
            if (need_input_grad) {
                // contrast reads the image mean: d(-mean)/dx = -1/N for every value
                const double shift = contrast_coupling / n_values;
                for (double& v : gx.raw())
                    v -= shift;
                g = std::move(gx);
            }
        }

        for (std::size_t li = 0; li < layers_.size(); ++li) {
            if (!gmask[li] || cached_[li])
                continue;
            const auto& l = layers_[li];
            const double s = sigma_of(p, li);
            Mask graw = *gmask[li];
            if (s > 0.0) {
                SmoothKernel k{opts_.window, s};
                if (sigma_offset_[li] != npos) {
                    Mask d = smooth_mask_dsigma(*t.raw[li], k);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < d.raw().size(); ++i)
                        acc += graw.raw()[i] * d.raw()[i];
                    grad[sigma_offset_[li]] = acc;
                }
                graw = smooth_mask_adjoint(graw, k);
            }
            if (l.source == MaskSource::Free) {
                Mask ggrid = resize_bilinear_adjoint(graw, opts_.grid, opts_.grid);
                for (int i = 0; i < opts_.grid * opts_.grid; ++i) {
                    double sgm = sigmoid(p[grid_offset_[li] + i]);
                    grad[grid_offset_[li] + i] = ggrid.raw()[i] * sgm * (1.0 - sgm);
                }
            }
        }
    }

    Image input_;
    std::vector<ModelLayer> layers_;
    FilterConstants consts_;
    ModelOptions opts_;
    FilterContext ctx0_;
    std::vector<std::vector<std::size_t>> stages_;
    std::vector<std::size_t> theta_offset_, grid_offset_, sigma_offset_;
    std::size_t theta_count_ = 0, param_count_ = 0;
    std::vector<std::optional<Mask>> cached_;
};

} // namespace rsf
