#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsf {

/// Processing failure. `field` names the offending input when one is known
/// (a recipe key, a CLI flag, an HTTP parameter).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, std::string field = {})
        : std::runtime_error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct Size {
    int width = 0;
    int height = 0;

    friend bool operator==(const Size&, const Size&) = default;
    std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

/// Row-major H x W x C buffer of doubles.
template <int Channels>
class Planar {
public:
    static constexpr int channels = Channels;

    Planar() = default;

    Planar(int width, int height, double fill = 0.0)
        : size_{width, height}
    {
        if (width < 1 || height < 1)
            throw Error("image dimensions must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
        data_.assign(size_.pixels() * Channels, fill);
    }

    Planar(int width, int height, std::vector<double> data)
        : size_{width, height}, data_(std::move(data))
    {
        if (width < 1 || height < 1)
            throw Error("image dimensions must be positive");
        if (data_.size() != size_.pixels() * Channels)
            throw Error("buffer length " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(Channels));
        for (double v : data_)
            if (!std::isfinite(v))
                throw Error("image buffer contains a non-finite value");
    }

    int width() const { return size_.width; }
    int height() const { return size_.height; }
    Size size() const { return size_; }
    std::size_t pixel_count() const { return size_.pixels(); }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::span<double> pixel(std::size_t i) { return {data_.data() + i * Channels, Channels}; }
    std::span<const double> pixel(std::size_t i) const { return {data_.data() + i * Channels, Channels}; }

    std::span<double> values() & { return data_; }
    std::span<const double> values() const& { return data_; }
    // Temporaries hand over their storage so range-for over them stays valid.
    std::vector<double> values() && { return std::move(data_); }
    std::vector<double>& raw() & { return data_; }
    const std::vector<double>& raw() const& { return data_; }
    std::vector<double> raw() && { return std::move(data_); }

    friend bool operator==(const Planar&, const Planar&) = default;

private:
    std::size_t index(int x, int y, int c) const
    {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) + static_cast<std::size_t>(x)) *
                   Channels +
               static_cast<std::size_t>(c);
    }

    Size size_{};
    std::vector<double> data_;
};

/// sRGB-encoded RGB, nominal range [0,1].
using Image = Planar<3>;
/// CIELAB, L in [0,100].
using LabImage = Planar<3>;
/// Single-channel soft weights in [0,1]; also used for unbounded scalar maps
/// such as derivatives.
using Mask = Planar<1>;

/// 3-channel per-pixel buffer that is not an image (increments, gradients).
using Field3 = Planar<3>;

template <int C>
inline void require_same_size(const Planar<C>& a, const Planar<C>& b, const char* what)
{
    if (a.size() != b.size())
        throw Error(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()) + ")");
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline Image clamped(Image img)
{
    for (double& v : img.values())
        v = clamp01(v);
    return img;
}

/// Scalar mean over all pixels and all channels.
template <int C>
inline double mean_value(const Planar<C>& img)
{
    double sum = 0.0;
    for (double v : img.values())
        sum += v;
    return sum / static_cast<double>(img.values().size());
}

/// Bilinear resample with half-pixel centres and edge clamping. Same-size input
/// is returned unchanged.
template <int C>
Planar<C> resize_bilinear(const Planar<C>& src, int width, int height)
{
    if (src.width() == width && src.height() == height)
        return src;
    Planar<C> dst(width, height);
    const double sx = static_cast<double>(src.width()) / width;
    const double sy = static_cast<double>(src.height()) / height;
    for (int y = 0; y < height; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
        int y0 = static_cast<int>(std::floor(fy));
        int y1 = std::min(y0 + 1, src.height() - 1);
        double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
            int x0 = static_cast<int>(std::floor(fx));
            int x1 = std::min(x0 + 1, src.width() - 1);
            double wx = fx - x0;
            for (int c = 0; c < C; ++c) {
                double top = src.at(x0, y0, c) * (1.0 - wx) + src.at(x1, y0, c) * wx;
                double bottom = src.at(x0, y1, c) * (1.0 - wx) + src.at(x1, y1, c) * wx;
                dst.at(x, y, c) = top * (1.0 - wy) + bottom * wy;
            }
        }
    }
    return dst;
}

/// Adjoint of resize_bilinear: scatters a gradient on the resized grid back
/// onto the source grid.
template <int C>
Planar<C> resize_bilinear_adjoint(const Planar<C>& grad, int src_width, int src_height)
{
    if (grad.width() == src_width && grad.height() == src_height)
        return grad;
    Planar<C> out(src_width, src_height);
    const int width = grad.width();
    const int height = grad.height();
    const double sx = static_cast<double>(src_width) / width;
    const double sy = static_cast<double>(src_height) / height;
    for (int y = 0; y < height; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_height - 1));
        int y0 = static_cast<int>(std::floor(fy));
        int y1 = std::min(y0 + 1, src_height - 1);
        double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_width - 1));
            int x0 = static_cast<int>(std::floor(fx));
            int x1 = std::min(x0 + 1, src_width - 1);
            double wx = fx - x0;
            for (int c = 0; c < C; ++c) {
                double g = grad.at(x, y, c);
                out.at(x0, y0, c) += g * (1.0 - wx) * (1.0 - wy);
                out.at(x1, y0, c) += g * wx * (1.0 - wy);
                out.at(x0, y1, c) += g * (1.0 - wx) * wy;
                out.at(x1, y1, c) += g * wx * wy;
            }
        }
    }
    return out;
}

} // namespace rsf
