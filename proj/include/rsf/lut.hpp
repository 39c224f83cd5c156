#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "filters.hpp"
#include "image_io.hpp"
#include "recipe.hpp"

namespace rsf {

/// RGB -> RGB lattice over [0,1]^3, red varying fastest.
struct Lut3D {
    int size = 0;
    std::vector<double> table;  ///< size^3 RGB triples
    std::string title = "rsf";

    std::size_t index(int r, int g, int b) const
    {
        return (static_cast<std::size_t>(b) * size + g) * size + r;
    }

    Rgb entry(int r, int g, int b) const
    {
        const double* e = table.data() + index(r, g, b) * 3;
        return {e[0], e[1], e[2]};
    }

    void validate() const
    {
        if (size < 2)
            throw Error("LUT size must be at least 2", "size");
        if (table.size() != static_cast<std::size_t>(size) * size * size * 3)
            throw Error("LUT table length does not match its size");
        for (double v : table)
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw Error("LUT entries must be finite values in [0,1]");
    }
};

inline constexpr int default_lut_size = 33;

/// Lattice of clamp(X + sum dF(theta, X)). Contrast reads the frozen
/// `ref_mean` in place of the image mean; saturation's L comes from the
/// lattice colour itself.
inline Lut3D bake(std::span<const FilterArg> args, const FilterConstants& consts, int size = default_lut_size,
                  double ref_mean = 0.5)
{
    if (size < 2)
        throw Error("LUT size must be at least 2", "size");
    if (!std::isfinite(ref_mean))
        throw Error("reference mean must be finite", "ref_mean");
    consts.validate();
    for (const auto& a : args)
        if (!std::isfinite(a.theta))
            throw Error("filter argument must be finite", "theta");
    Lut3D lut;
    lut.size = size;
    lut.table.resize(static_cast<std::size_t>(size) * size * size * 3);
    std::vector<double> terms[3];
    const double step = 1.0 / (size - 1);
    for (int b = 0; b < size; ++b)
        for (int g = 0; g < size; ++g)
            for (int r = 0; r < size; ++r) {
                const Rgb x{r * step, g * step, b * step};
                const double lum = luminance(x);
                for (auto& t : terms)
                    t.clear();
                for (const auto& a : args) {
                    Rgb u = unit_increment(a.kind, branch_of(a.theta), x, lum, ref_mean, consts);
                    for (int c = 0; c < 3; ++c)
                        terms[c].push_back(a.theta * u[c]);
                }
                double* e = lut.table.data() + lut.index(r, g, b) * 3;
                for (int c = 0; c < 3; ++c) {
                    std::sort(terms[c].begin(), terms[c].end());
                    double s = 0.0;
                    for (double t : terms[c])
                        s += t;
                    e[c] = clamp01(x[c] + s);
                }
            }
    return lut;
}

/// Bakes every layer of a global-only recipe. Masked layers are rejected.
inline Lut3D bake(const Recipe& recipe, int size = default_lut_size, double ref_mean = 0.5)
{
    recipe.validate();
    std::vector<FilterArg> args;
    for (std::size_t li = 0; li < recipe.layers.size(); ++li) {
        const auto& l = recipe.layers[li];
        if (!l.is_global())
            throw Error("layers[" + std::to_string(li) + "] is bound to a mask; only global layers can be baked",
                        "layers[" + std::to_string(li) + "].mask");
        args.insert(args.end(), l.args.begin(), l.args.end());
    }
    return bake(args, recipe.constants, size, ref_mean);
}

/// Trilinear interpolation of every pixel.
inline Image apply_lut(const Lut3D& lut, const Image& img)
{
    if (lut.size < 2 || lut.table.size() != static_cast<std::size_t>(lut.size) * lut.size * lut.size * 3)
        throw Error("invalid LUT");
    Image out(img.width(), img.height());
    const int last = lut.size - 1;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        auto px = img.pixel(i);
        int lo[3];
        double t[3];
        for (int c = 0; c < 3; ++c) {
            double f = clamp01(px[c]) * last;
            lo[c] = std::min(static_cast<int>(std::floor(f)), last - 1);
            t[c] = f - lo[c];
        }
        double acc[3] = {0.0, 0.0, 0.0};
        for (int corner = 0; corner < 8; ++corner) {
            int dr = corner & 1, dg = (corner >> 1) & 1, db = (corner >> 2) & 1;
            double w = (dr ? t[0] : 1.0 - t[0]) * (dg ? t[1] : 1.0 - t[1]) * (db ? t[2] : 1.0 - t[2]);
            if (w == 0.0)
                continue;
            const double* e = lut.table.data() + lut.index(lo[0] + dr, lo[1] + dg, lo[2] + db) * 3;
            for (int c = 0; c < 3; ++c)
                acc[c] += w * e[c];
        }
        auto dst = out.pixel(i);
        for (int c = 0; c < 3; ++c)
            dst[c] = acc[c];
    }
    return out;
}

inline std::string to_cube(const Lut3D& lut)
{
    std::string s;
    s += "TITLE \"" + lut.title + "\"\n";
    s += "LUT_3D_SIZE " + std::to_string(lut.size) + "\n";
    s += "DOMAIN_MIN 0 0 0\nDOMAIN_MAX 1 1 1\n";
    char line[96];
    for (std::size_t i = 0; i < lut.table.size(); i += 3) {
        std::snprintf(line, sizeof line, "%.6f %.6f %.6f\n", lut.table[i], lut.table[i + 1], lut.table[i + 2]);
        s += line;
    }
    return s;
}

inline Lut3D parse_cube(const std::string& text)
{
    Lut3D lut;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        std::istringstream ls(line.substr(first));
        std::string head;
        ls >> head;
        if (head == "TITLE") {
            auto q0 = line.find('"'), q1 = line.rfind('"');
            lut.title = (q0 != std::string::npos && q1 > q0) ? line.substr(q0 + 1, q1 - q0 - 1) : "";
        } else if (head == "LUT_3D_SIZE") {
            if (!(ls >> lut.size) || lut.size < 2)
                throw Error("cube line " + std::to_string(line_no) + ": invalid LUT_3D_SIZE", "LUT_3D_SIZE");
            lut.table.reserve(static_cast<std::size_t>(lut.size) * lut.size * lut.size * 3);
        } else if (head == "DOMAIN_MIN" || head == "DOMAIN_MAX") {
            double v[3];
            if (!(ls >> v[0] >> v[1] >> v[2]))
                throw Error("cube line " + std::to_string(line_no) + ": malformed " + head, head);
            double want = head == "DOMAIN_MIN" ? 0.0 : 1.0;
            if (v[0] != want || v[1] != want || v[2] != want)
                throw Error("only the [0,1] domain is supported", head);
        } else if (head == "LUT_1D_SIZE") {
            throw Error("1-D LUTs are not supported", "LUT_1D_SIZE");
        } else {
            std::istringstream vs(line.substr(first));
            double r, g, b;
            if (!(vs >> r >> g >> b))
                throw Error("cube line " + std::to_string(line_no) + ": expected three numbers");
            lut.table.insert(lut.table.end(), {r, g, b});
        }
    }
    if (lut.size == 0)
        throw Error("cube file has no LUT_3D_SIZE", "LUT_3D_SIZE");
    if (lut.table.size() != static_cast<std::size_t>(lut.size) * lut.size * lut.size * 3)
        throw Error("cube file has " + std::to_string(lut.table.size() / 3) + " entries, expected " +
                    std::to_string(static_cast<std::size_t>(lut.size) * lut.size * lut.size));
    lut.validate();
    return lut;
}

inline void write_cube(const std::filesystem::path& path, const Lut3D& lut)
{
    write_file_atomic(path, to_cube(lut));
}

inline Lut3D read_cube(const std::filesystem::path& path)
{
    auto bytes = read_file(path);
    return parse_cube(std::string(bytes.begin(), bytes.end()));
}

} // namespace rsf
