#pragma once

// HTTP editing sessions over cpp-httplib: upload an image, edit its recipe
// with small patches, fetch capped-size previews, undo, export.
//
//   POST  /sessions                   multipart (image, target, recipe, masks,
//                                     palette_k, seed, auto_fit, iterations)
//                                     or a raw PNG/JPEG body
//   GET   /sessions/{id}/preview?rev= PNG, X-Revision header
//   PATCH /sessions/{id}/recipe       {"patches":[{layer,kind,theta}|{layer,sigma}]}
//   GET   /sessions/{id}/masks        JSON with base64 thumbnails
//   GET   /sessions/{id}/masks/{n}    full-resolution mask PNG
//   GET   /sessions/{id}/recipe       recipe JSON (masks named mask_NN.png)
//   POST  /sessions/{id}/undo
//   GET   /sessions/{id}/export       PNG; full=1 renders at source size
//
// Errors are JSON {code, message, field?}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "fitter.hpp"
#include "image_io.hpp"
#include "palette.hpp"
#include "recipe_json.hpp"
#include "render.hpp"

namespace rsf::service {

struct ServiceOptions {
    int preview_cap = 480;                    ///< long edge of previews, pixels
    std::size_t max_pixels = 24'000'000;      ///< uploads above this get 413
    std::size_t undo_limit = 64;
    int thumbnail_cap = 128;
    int fit_iterations = 300;                 ///< auto-fit budget
    std::optional<std::filesystem::path> root;  ///< persistence directory
};

/// Failure with an HTTP status. `code` is a short machine-readable slug.
struct HttpError : Error {
    int status;
    std::string code;

    HttpError(int status, std::string code, const std::string& message, std::string field = {})
        : Error(message, std::move(field)), status(status), code(std::move(code))
    {
    }
};

/// The seven tied kinds every editable layer offers.
inline const std::vector<FilterKind>& editable_kinds()
{
    static const std::vector<FilterKind> kinds = {FilterKind::Contrast, FilterKind::Saturation, FilterKind::Hue,
                                                  FilterKind::Temperature, FilterKind::Shadows, FilterKind::Midtones,
                                                  FilterKind::Highlights};
    return kinds;
}

/// Zero-argument recipe: a global layer with the tied kinds plus the three
/// shifts, and one layer with the tied kinds per mask.
inline Recipe identity_recipe(const std::vector<Mask>& masks)
{
    Recipe r;
    std::vector<FilterArg> global;
    for (FilterKind k : editable_kinds())
        global.push_back({k, 0.0});
    for (FilterKind k : {FilterKind::ShiftR, FilterKind::ShiftG, FilterKind::ShiftB})
        global.push_back({k, 0.0});
    r.layers.push_back(Layer::global(global));
    for (const auto& m : masks) {
        std::vector<FilterArg> args;
        for (FilterKind k : editable_kinds())
            args.push_back({k, 0.0});
        r.layers.push_back(Layer::masked(m, std::move(args)));
    }
    return r;
}

inline Size preview_size(Size full, int cap)
{
    const int long_edge = std::max(full.width, full.height);
    if (long_edge <= cap)
        return full;
    const double s = static_cast<double>(cap) / long_edge;
    return {std::max(1, static_cast<int>(std::lround(full.width * s))),
            std::max(1, static_cast<int>(std::lround(full.height * s)))};
}

/// The recipe as seen at preview resolution: smoothing sigma and window
/// scale with the image.
inline Recipe scaled_recipe(const Recipe& r, double ratio)
{
    if (ratio == 1.0)
        return r;
    Recipe out = r;
    int window = static_cast<int>(std::lround(r.smooth_window * ratio));
    out.smooth_window = std::max(1, window | 1);
    for (auto& l : out.layers)
        l.sigma *= ratio;
    return out;
}

struct Session {
    std::string id;
    Image image;
    Image preview_source;
    Image target;  ///< empty unless one was uploaded
    Recipe recipe;
    std::deque<Recipe> undo;
    long revision = 0;
    std::mutex mutex;

    // last rendered preview, keyed by revision
    long cached_revision = -1;
    Bytes cached_preview;

    double preview_ratio() const
    {
        return static_cast<double>(preview_source.width()) / image.width();
    }
};

/// Parsed POST /sessions input.
struct CreateRequest {
    Bytes image;
    std::optional<Bytes> target;
    std::optional<std::string> recipe;
    std::vector<std::pair<std::string, Bytes>> masks;  ///< (file name, bytes)
    int palette_k = 0;
    std::uint64_t seed = 0;
    bool auto_fit = false;
    std::optional<int> iterations;
};

class EditService {
public:
    explicit EditService(ServiceOptions opts = {}) : opts_(std::move(opts))
    {
        if (opts_.preview_cap < 1)
            throw Error("preview cap must be positive", "preview_cap");
        if (opts_.root)
            load_persisted();
    }

    const ServiceOptions& options() const { return opts_; }

    // -- operations ------------------------------------------------------

    json create(const CreateRequest& req)
    {
        auto session = std::make_shared<Session>();
        session->image = decode_upload(req.image, "image");
        if (req.target) {
            session->target = decode_upload(*req.target, "target");
            if (session->target.size() != session->image.size())
                throw HttpError(422, "size_mismatch", "target size differs from the image", "target");
        }
        if (req.palette_k < 0 || req.palette_k > 32)
            throw HttpError(422, "invalid_field", "palette_k must be in [0, 32]", "palette_k");
        const Size full = session->image.size();
        session->preview_source = resize_bilinear(session->image, preview_size(full, opts_.preview_cap).width,
                                                  preview_size(full, opts_.preview_cap).height);

        if (req.recipe) {
            session->recipe = parse_uploaded_recipe(*req.recipe, req.masks, full);
        } else {
            std::vector<Mask> masks;
            for (const auto& [name, bytes] : req.masks)
                masks.push_back(ingest_mask(bytes, full, "masks"));
            if (req.palette_k > 0) {
                auto palette = extract_palette(session->image, req.palette_k, req.seed);
                for (auto& m : palette_to_masks(session->image, palette))
                    masks.push_back(quantized(std::move(m)));
            }
            session->recipe = identity_recipe(masks);
        }
        if (req.auto_fit) {
            if (session->target.empty())
                throw HttpError(422, "missing_field", "auto_fit needs a target image", "target");
            auto_fit(*session, req.iterations.value_or(opts_.fit_iterations), req.seed);
        }
        name_masks(session->recipe);

        {
            std::unique_lock lock(sessions_mutex_);
            do
                session->id = new_id();
            while (sessions_.count(session->id));
            sessions_[session->id] = session;
        }
        std::lock_guard lock(session->mutex);
        persist(*session, true);
        json out = state_json(*session);
        out["width"] = full.width;
        out["height"] = full.height;
        out["preview_width"] = session->preview_source.width();
        out["preview_height"] = session->preview_source.height();
        out["masks"] = masks_json(*session);
        out["preview"] = httplib::detail::base64_encode(as_string(preview_png(*session)));
        return out;
    }

    /// Applies every patch or none of them.
    json patch(const std::string& id, const json& body)
    {
        auto s = find(id);
        std::lock_guard lock(s->mutex);
        Recipe next = s->recipe;
        if (!body.is_object() || !body.contains("patches") || !body["patches"].is_array())
            throw HttpError(422, "invalid_field", "body must be {\"patches\": [...]}", "patches");
        const json& patches = body["patches"];
        for (std::size_t pi = 0; pi < patches.size(); ++pi)
            apply_patch(next, patches[pi], "patches[" + std::to_string(pi) + "]");
        try {
            next.validate();
        } catch (const Error& e) {
            throw HttpError(422, "invalid_field", e.what(), e.field());
        }
        s->undo.push_back(std::move(s->recipe));
        if (s->undo.size() > opts_.undo_limit)
            s->undo.pop_front();
        s->recipe = std::move(next);
        ++s->revision;
        persist(*s, false);
        json out = state_json(*s);
        out["preview"] = httplib::detail::base64_encode(as_string(preview_png(*s)));
        return out;
    }

    json undo(const std::string& id)
    {
        auto s = find(id);
        std::lock_guard lock(s->mutex);
        if (s->undo.empty())
            throw HttpError(409, "nothing_to_undo", "undo stack is empty");
        s->recipe = std::move(s->undo.back());
        s->undo.pop_back();
        ++s->revision;
        persist(*s, false);
        json out = state_json(*s);
        out["preview"] = httplib::detail::base64_encode(as_string(preview_png(*s)));
        return out;
    }

    /// PNG preview and the revision it shows. A `rev` other than the current
    /// one is a conflict.
    std::pair<Bytes, long> preview(const std::string& id, std::optional<long> rev)
    {
        auto s = find(id);
        std::lock_guard lock(s->mutex);
        if (rev && *rev != s->revision)
            throw HttpError(409, "stale_revision",
                            "revision " + std::to_string(*rev) + " is not current (" + std::to_string(s->revision) +
                                ")",
                            "rev");
        return {preview_png(*s), s->revision};
    }

    std::pair<Bytes, long> export_image(const std::string& id, bool full)
    {
        auto s = find(id);
        std::lock_guard lock(s->mutex);
        if (!full)
            return {preview_png(*s), s->revision};
        return {encode_png(render(s->image, s->recipe)), s->revision};
    }

    json recipe(const std::string& id)
    {
        auto s = find(id);
        std::lock_guard lock(s->mutex);
        return recipe_to_json(s->recipe);
    }

    json masks(const std::string& id)
    {
        auto s = find(id);
        std::lock_guard lock(s->mutex);
        return {{"revision", s->revision}, {"masks", masks_json(*s)}};
    }

    Bytes mask_png(const std::string& id, std::size_t index)
    {
        auto s = find(id);
        std::lock_guard lock(s->mutex);
        std::size_t n = 0;
        for (const auto& l : s->recipe.layers)
            if (!l.is_global() && n++ == index)
                return encode_png(*l.mask);
        throw HttpError(404, "not_found", "no mask " + std::to_string(index), "mask");
    }

    std::size_t session_count() const
    {
        std::shared_lock lock(sessions_mutex_);
        return sessions_.size();
    }

    // -- HTTP ------------------------------------------------------------

    void mount(httplib::Server& server)
    {
        server.set_payload_max_length(512u << 20);
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what(), {});
            } catch (...) {
                send_error(res, 500, "internal", "unknown failure", {});
            }
        });
        server.set_pre_routing_handler([](const httplib::Request& req, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_header("Access-Control-Expose-Headers", "X-Revision");
            if (req.method == "OPTIONS") {
                res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS");
                res.set_header("Access-Control-Allow-Headers", "Content-Type");
                res.status = 204;
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });

        const std::string sid = "/sessions/([0-9a-f]+)";
        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, 201, create(parse_create(req)));
                    }));
        server.Get(sid + "/preview", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       std::optional<long> rev;
                       if (req.has_param("rev"))
                           rev = parse_long(req.get_param_value("rev"), "rev");
                       auto [png, r] = preview(req.matches[1], rev);
                       send_png(res, png, r);
                   }));
        server.Patch(sid + "/recipe", guarded([this](const httplib::Request& req, httplib::Response& res) {
                         send_json(res, 200, patch(req.matches[1], parse_json_body(req.body)));
                     }));
        server.Get(sid + "/recipe", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, recipe(req.matches[1]));
                   }));
        server.Get(sid + "/masks", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, masks(req.matches[1]));
                   }));
        server.Get(sid + "/masks/([0-9]+)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_png(res, mask_png(req.matches[1], std::stoul(req.matches[2])), std::nullopt);
                   }));
        server.Post(sid + "/undo", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, 200, undo(req.matches[1]));
                    }));
        server.Get(sid + "/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       bool full = req.has_param("full") && req.get_param_value("full") != "0";
                       auto [png, r] = export_image(req.matches[1], full);
                       send_png(res, png, r);
                   }));
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty())
                send_error(res, res.status, res.status == 404 ? "not_found" : "error",
                           res.status == 404 ? "no such endpoint" : "request failed", {});
        });
    }

    static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                           const std::string& field)
    {
        json body = {{"code", code}, {"message", message}};
        if (!field.empty())
            body["field"] = field;
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

private:
    // -- helpers ---------------------------------------------------------

    static std::string as_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

    static Bytes as_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

    static void send_json(httplib::Response& res, int status, const json& body)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_png(httplib::Response& res, const Bytes& png, std::optional<long> rev)
    {
        res.status = 200;
        if (rev)
            res.set_header("X-Revision", std::to_string(*rev));
        res.set_content(as_string(png), "image/png");
    }

    template <typename Fn>
    static httplib::Server::Handler guarded(Fn fn)
    {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const HttpError& e) {
                send_error(res, e.status, e.code, e.what(), e.field());
            } catch (const Error& e) {
                send_error(res, 422, "invalid_request", e.what(), e.field());
            } catch (const json::exception& e) {
                send_error(res, 400, "malformed_json", e.what(), {});
            }
        };
    }

    static long parse_long(const std::string& s, const char* field)
    {
        try {
            std::size_t used = 0;
            long v = std::stol(s, &used);
            if (used == s.size())
                return v;
        } catch (const std::exception&) {
        }
        throw HttpError(400, "invalid_field", std::string(field) + " must be an integer", field);
    }

    static json parse_json_body(const std::string& body)
    {
        try {
            return json::parse(body);
        } catch (const json::parse_error& e) {
            throw HttpError(400, "malformed_json", std::string("malformed JSON: ") + e.what());
        }
    }

    static CreateRequest parse_create(const httplib::Request& req)
    {
        CreateRequest c;
        auto field = [&](const char* name) -> std::optional<std::string> {
            if (req.is_multipart_form_data() && req.has_file(name))
                return req.get_file_value(name).content;
            if (req.has_param(name))
                return req.get_param_value(name);
            return std::nullopt;
        };
        if (req.is_multipart_form_data()) {
            if (!req.has_file("image"))
                throw HttpError(400, "missing_field", "multipart upload needs an 'image' part", "image");
            c.image = as_bytes(req.get_file_value("image").content);
            if (req.has_file("target"))
                c.target = as_bytes(req.get_file_value("target").content);
            for (const auto& part : req.get_file_values("masks"))
                c.masks.emplace_back(part.filename, as_bytes(part.content));
        } else {
            c.image = as_bytes(req.body);
        }
        c.recipe = field("recipe");
        if (auto v = field("palette_k"))
            c.palette_k = static_cast<int>(parse_long(*v, "palette_k"));
        if (auto v = field("seed"))
            c.seed = static_cast<std::uint64_t>(parse_long(*v, "seed"));
        if (auto v = field("iterations")) {
            long n = parse_long(*v, "iterations");
            if (n < 0 || n > 100000)
                throw HttpError(422, "invalid_field", "iterations must be in [0, 100000]", "iterations");
            c.iterations = static_cast<int>(n);
        }
        if (auto v = field("auto_fit"))
            c.auto_fit = *v == "1" || *v == "true";
        return c;
    }

    Image decode_upload(const Bytes& bytes, const char* field) const
    {
        Image img;
        try {
            img = decode_image(bytes);
        } catch (const Error& e) {
            throw HttpError(400, "invalid_image", std::string(field) + ": " + e.what(), field);
        }
        if (img.pixel_count() > opts_.max_pixels)
            throw HttpError(413, "too_large",
                            std::string(field) + " has " + std::to_string(img.pixel_count()) +
                                " pixels; the limit is " + std::to_string(opts_.max_pixels),
                            field);
        return img;
    }

    // 8-bit and at image size, so an exported recipe reproduces renders exactly.
    static Mask ingest_mask(const Bytes& bytes, Size size, const std::string& field)
    {
        Mask m;
        try {
            m = decode_mask(bytes);
        } catch (const Error& e) {
            throw HttpError(400, "invalid_mask", field + ": " + e.what(), field);
        }
        return quantized(resize_bilinear(m, size.width, size.height));
    }

    static Recipe parse_uploaded_recipe(const std::string& text, const std::vector<std::pair<std::string, Bytes>>& masks,
                                        Size size)
    {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw HttpError(400, "malformed_json", std::string("recipe: ") + e.what(), "recipe");
        }
        try {
            return recipe_from_json(doc, [&](const std::string& name) {
                for (const auto& [file, bytes] : masks)
                    if (file == name || std::filesystem::path(file).filename() == std::filesystem::path(name).filename())
                        return ingest_mask(bytes, size, "masks");
                throw Error("mask '" + name + "' was not uploaded");
            });
        } catch (const HttpError&) {
            throw;
        } catch (const Error& e) {
            throw HttpError(422, "invalid_recipe", e.what(), e.field().empty() ? "recipe" : e.field());
        }
    }

    static void name_masks(Recipe& r)
    {
        std::size_t n = 0;
        for (auto& l : r.layers)
            if (!l.is_global())
                l.mask_source = mask_file_name(n++);
    }

    void apply_patch(Recipe& r, const json& p, const std::string& where) const
    {
        if (!p.is_object())
            throw HttpError(422, "invalid_field", where + " must be an object", where);
        for (auto it = p.begin(); it != p.end(); ++it)
            if (it.key() != "layer" && it.key() != "kind" && it.key() != "theta" && it.key() != "sigma")
                throw HttpError(422, "invalid_field", "unknown field '" + where + "." + it.key() + "'",
                                where + "." + it.key());
        if (!p.contains("layer") || !p["layer"].is_number_integer())
            throw HttpError(422, "invalid_field", where + ".layer must be an integer", where + ".layer");
        const long li = p["layer"].get<long>();
        if (li < 0 || li >= static_cast<long>(r.layers.size()))
            throw HttpError(422, "bad_index", where + ".layer " + std::to_string(li) + " is out of range",
                            where + ".layer");
        Layer& layer = r.layers[static_cast<std::size_t>(li)];
        bool touched = false;
        if (p.contains("sigma")) {
            if (!p["sigma"].is_number() || !std::isfinite(p["sigma"].get<double>()) || p["sigma"].get<double>() < 0.0)
                throw HttpError(422, "invalid_field", where + ".sigma must be a number >= 0", where + ".sigma");
            if (layer.is_global())
                throw HttpError(422, "invalid_field", "global layers have no mask to smooth", where + ".sigma");
            layer.sigma = p["sigma"].get<double>();
            touched = true;
        }
        if (p.contains("kind") || p.contains("theta")) {
            if (!p.contains("kind") || !p["kind"].is_string())
                throw HttpError(422, "invalid_field", where + ".kind must be a filter name", where + ".kind");
            auto kind = parse_filter_kind(p["kind"].get<std::string>());
            if (!kind)
                throw HttpError(422, "invalid_field", where + ".kind is not a known filter kind", where + ".kind");
            if (!p.contains("theta") || !p["theta"].is_number())
                throw HttpError(422, "invalid_field", where + ".theta must be a number", where + ".theta");
            const double theta = p["theta"].get<double>();
            if (!std::isfinite(theta) || std::abs(theta) > r.theta_bound)
                throw HttpError(422, "out_of_range",
                                where + ".theta must lie in [-" + std::to_string(r.theta_bound) + ", " +
                                    std::to_string(r.theta_bound) + "]",
                                where + ".theta");
            auto it = std::find_if(layer.args.begin(), layer.args.end(),
                                   [&](const FilterArg& a) { return a.kind == *kind; });
            if (it == layer.args.end())
                layer.args.push_back({*kind, theta});
            else
                it->theta = theta;
            touched = true;
        }
        if (!touched)
            throw HttpError(422, "invalid_field", where + " changes nothing (give kind+theta or sigma)", where);
    }

    // Fits the session recipe's arguments at preview resolution.
    void auto_fit(Session& s, int iterations, std::uint64_t seed) const
    {
        const Size ps = s.preview_source.size();
        Image target = resize_bilinear(s.target, ps.width, ps.height);
        std::vector<ModelLayer> layers;
        for (const auto& l : s.recipe.layers) {
            ModelLayer m;
            m.source = l.is_global() ? MaskSource::Global : MaskSource::Fixed;
            if (l.mask)
                m.fixed = *l.mask;
            for (const auto& a : l.args) {
                m.kinds.push_back(a.kind);
                m.theta_init.push_back(a.theta);
            }
            m.sigma = l.sigma * s.preview_ratio();
            layers.push_back(std::move(m));
        }
        FitConfig cfg;
        cfg.iterations = iterations;
        cfg.seed = seed;
        cfg.constants = s.recipe.constants;
        cfg.theta_bound = s.recipe.theta_bound;
        FitReport rep = fit_layers(s.preview_source, target, std::move(layers), cfg);
        for (std::size_t li = 0; li < s.recipe.layers.size(); ++li)
            for (std::size_t ai = 0; ai < s.recipe.layers[li].args.size(); ++ai)
                s.recipe.layers[li].args[ai].theta = rep.recipe.layers[li].args[ai].theta;
    }

    std::shared_ptr<Session> find(const std::string& id) const
    {
        std::shared_lock lock(sessions_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end())
            throw HttpError(404, "not_found", "no session " + id, "id");
        return it->second;
    }

    // Caller holds s.mutex.
    Bytes preview_png(Session& s) const
    {
        if (s.cached_revision != s.revision) {
            s.cached_preview = encode_png(render(s.preview_source, scaled_recipe(s.recipe, s.preview_ratio())));
            s.cached_revision = s.revision;
        }
        return s.cached_preview;
    }

    static json state_json(const Session& s)
    {
        return {{"id", s.id},
                {"revision", s.revision},
                {"preview_url", "/sessions/" + s.id + "/preview?rev=" + std::to_string(s.revision)},
                {"undo_depth", s.undo.size()},
                {"recipe", recipe_to_json(s.recipe)}};
    }

    json masks_json(const Session& s) const
    {
        json list = json::array();
        std::size_t n = 0;
        for (std::size_t li = 0; li < s.recipe.layers.size(); ++li) {
            const Layer& l = s.recipe.layers[li];
            if (l.is_global())
                continue;
            Size t = preview_size(l.mask->size(), opts_.thumbnail_cap);
            Bytes thumb = encode_png(resize_bilinear(*l.mask, t.width, t.height));
            list.push_back({{"id", n},
                            {"layer", li},
                            {"name", l.mask_source},
                            {"width", l.mask->width()},
                            {"height", l.mask->height()},
                            {"url", "/sessions/" + s.id + "/masks/" + std::to_string(n)},
                            {"thumbnail", "data:image/png;base64," + httplib::detail::base64_encode(as_string(thumb))}});
            ++n;
        }
        return list;
    }

    static std::string new_id()
    {
        static std::mutex m;
        static std::mt19937_64 rng{std::random_device{}()};
        std::lock_guard lock(m);
        char buf[33];
        std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                      static_cast<unsigned long long>(rng()));
        return buf;
    }

    // Directory layout: root/<id>/{image.png, target.png, recipe.json, mask_NN.png}.
    void persist(const Session& s, bool with_images) const
    {
        if (!opts_.root)
            return;
        const auto dir = *opts_.root / s.id;
        std::filesystem::create_directories(dir);
        if (with_images) {
            write_image(dir / "image.png", s.image);
            if (!s.target.empty())
                write_image(dir / "target.png", s.target);
        }
        save_recipe(dir / "recipe.json", s.recipe);
    }

    void load_persisted()
    {
        std::filesystem::create_directories(*opts_.root);
        for (const auto& entry : std::filesystem::directory_iterator(*opts_.root)) {
            const auto dir = entry.path();
            if (!entry.is_directory() || !std::filesystem::exists(dir / "recipe.json") ||
                !std::filesystem::exists(dir / "image.png"))
                continue;
            auto s = std::make_shared<Session>();
            s->id = dir.filename().string();
            s->image = read_image(dir / "image.png");
            if (std::filesystem::exists(dir / "target.png"))
                s->target = read_image(dir / "target.png");
            s->recipe = load_recipe(dir / "recipe.json");
            Size p = preview_size(s->image.size(), opts_.preview_cap);
            s->preview_source = resize_bilinear(s->image, p.width, p.height);
            sessions_[s->id] = s;
        }
    }

    ServiceOptions opts_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

} // namespace rsf::service
