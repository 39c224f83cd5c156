#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "image_io.hpp"
#include "recipe.hpp"

namespace rsf {

using json = nlohmann::json;

inline constexpr int recipe_version = 1;

/// Turns a layer's `mask` string into pixels.
using MaskResolver = std::function<Mask(const std::string&)>;

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            known = known || it.key() == a;
        if (!known) {
            std::string f = where.empty() ? it.key() : where + "." + it.key();
            throw Error("unknown field '" + f + "'", f);
        }
    }
}

inline const json& require(const json& obj, const char* key, const std::string& where)
{
    std::string f = where.empty() ? key : where + "." + key;
    auto it = obj.find(key);
    if (it == obj.end())
        throw Error("missing field '" + f + "'", f);
    return *it;
}

inline double number(const json& v, const std::string& field)
{
    if (!v.is_number())
        throw Error("field '" + field + "' must be a number", field);
    return v.get<double>();
}

} // namespace detail

inline FilterConstants constants_from_json(const json& j)
{
    if (!j.is_object())
        throw Error("field 'constants' must be an object", "constants");
    detail::reject_unknown(j, {"alpha_h", "alpha_t"}, "constants");
    FilterConstants k;
    if (j.contains("alpha_h"))
        k.alpha_h = detail::number(j["alpha_h"], "constants.alpha_h");
    if (j.contains("alpha_t")) {
        const json& a = j["alpha_t"];
        if (!a.is_array() || a.size() != 5)
            throw Error("field 'constants.alpha_t' must be an array of 5 numbers", "constants.alpha_t");
        for (std::size_t i = 0; i < 5; ++i)
            k.alpha_t[i] = detail::number(a[i], "constants.alpha_t");
    }
    k.validate();
    return k;
}

inline json constants_to_json(const FilterConstants& k)
{
    return {{"alpha_h", k.alpha_h}, {"alpha_t", k.alpha_t}};
}

/// Parses and validates a recipe document. Masks named by path are loaded
/// through `resolve`.
inline Recipe recipe_from_json(const json& doc, const MaskResolver& resolve)
{
    if (!doc.is_object())
        throw Error("recipe must be a JSON object");
    detail::reject_unknown(doc, {"version", "constants", "layers"}, "");
    const json& version = detail::require(doc, "version", "");
    if (!version.is_number_integer() || version.get<int>() != recipe_version)
        throw Error("unsupported recipe version (expected " + std::to_string(recipe_version) + ")", "version");

    Recipe r;
    if (doc.contains("constants"))
        r.constants = constants_from_json(doc["constants"]);

    const json& layers = detail::require(doc, "layers", "");
    if (!layers.is_array())
        throw Error("field 'layers' must be an array", "layers");
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const std::string where = "layers[" + std::to_string(li) + "]";
        const json& jl = layers[li];
        if (!jl.is_object())
            throw Error(where + " must be an object", where);
        detail::reject_unknown(jl, {"mask", "sigma", "filters"}, where);
        Layer layer;
        const json& mask = detail::require(jl, "mask", where);
        if (!mask.is_string())
            throw Error(where + ".mask must be a string", where + ".mask");
        const auto source = mask.get<std::string>();
        if (source != "global") {
            try {
                layer.mask = resolve(source);
            } catch (const Error& e) {
                throw Error(where + ".mask: " + e.what(), where + ".mask");
            }
            layer.mask_source = source;
        }
        if (jl.contains("sigma"))
            layer.sigma = detail::number(jl["sigma"], where + ".sigma");
        const json& filters = detail::require(jl, "filters", where);
        if (!filters.is_array())
            throw Error(where + ".filters must be an array", where + ".filters");
        for (std::size_t fi = 0; fi < filters.size(); ++fi) {
            const std::string fw = where + ".filters[" + std::to_string(fi) + "]";
            const json& jf = filters[fi];
            if (!jf.is_object())
                throw Error(fw + " must be an object", fw);
            detail::reject_unknown(jf, {"kind", "theta"}, fw);
            const json& kind = detail::require(jf, "kind", fw);
            auto parsed = kind.is_string() ? parse_filter_kind(kind.get<std::string>()) : std::nullopt;
            if (!parsed)
                throw Error(fw + ".kind is not a known filter kind", fw + ".kind");
            double theta = detail::number(detail::require(jf, "theta", fw), fw + ".theta");
            layer.args.push_back({*parsed, theta});
        }
        r.layers.push_back(std::move(layer));
    }
    r.validate();
    return r;
}

/// Serializes a recipe. Masked layers must carry a mask_source.
inline json recipe_to_json(const Recipe& r)
{
    json layers = json::array();
    for (std::size_t li = 0; li < r.layers.size(); ++li) {
        const Layer& l = r.layers[li];
        json filters = json::array();
        for (const auto& a : l.args)
            filters.push_back({{"kind", std::string(to_string(a.kind))}, {"theta", a.theta}});
        std::string mask = "global";
        if (!l.is_global()) {
            if (l.mask_source.empty())
                throw Error("layers[" + std::to_string(li) + "] has no mask file name to serialize",
                            "layers[" + std::to_string(li) + "].mask");
            mask = l.mask_source;
        }
        layers.push_back({{"mask", mask}, {"sigma", l.sigma}, {"filters", filters}});
    }
    return {{"version", recipe_version}, {"constants", constants_to_json(r.constants)}, {"layers", layers}};
}

inline Recipe load_recipe(const std::filesystem::path& path)
{
    auto bytes = read_file(path);
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw Error(path.string() + ": malformed JSON: " + e.what(), path.string());
    }
    const auto base = path.parent_path();
    return recipe_from_json(doc, [&](const std::string& src) {
        std::filesystem::path p(src);
        return read_mask(p.is_absolute() ? p : base / p);
    });
}

inline std::string mask_file_name(std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "mask_%02zu.png", index);
    return buf;
}

/// Writes every masked layer's mask as mask_NN.png next to `recipe_path`
/// and the recipe itself, referencing those files by relative name.
inline void save_recipe(const std::filesystem::path& recipe_path, Recipe r)
{
    const auto dir = recipe_path.parent_path();
    std::size_t n = 0;
    for (auto& l : r.layers) {
        if (l.is_global())
            continue;
        l.mask_source = mask_file_name(n++);
        write_mask(dir / l.mask_source, *l.mask);
    }
    write_file_atomic(recipe_path, recipe_to_json(r).dump(2) + "\n");
}

} // namespace rsf
