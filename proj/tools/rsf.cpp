// rsf: command-line front end for the region-specific filter engine.
//
// Exit status: 0 success, 1 processing error, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsf/edit_service.hpp"
#include "rsf/harness.hpp"
#include "rsf/lut.hpp"
#include "rsf/rsf.hpp"

namespace fs = std::filesystem;
using namespace rsf;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<FilterKind> parse_kinds(const std::string& list, const char* flag)
{
    std::vector<FilterKind> out;
    if (list == "none" || list.empty())
        return out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto k = parse_filter_kind(item);
        if (!k)
            throw Error(std::string("--") + flag + ": unknown filter kind '" + item + "'", flag);
        out.push_back(*k);
    }
    return out;
}

std::vector<Mask> read_mask_dir(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw Error("--masks: " + dir.string() + " is not a directory", "masks");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw Error("--masks: no .png files in " + dir.string(), "masks");
    std::vector<Mask> masks;
    for (const auto& f : files)
        masks.push_back(read_mask(f));
    return masks;
}

json metrics_json(const MetricReport& m)
{
    return {{"psnr", m.psnr}, {"ssim", m.ssim ? json(*m.ssim) : json(nullptr)}, {"delta_e", m.delta_e}};
}

json summary_json(const ApproachSummary& s)
{
    return {{"mean_psnr", s.mean_psnr}, {"std_psnr", s.std_psnr}, {"max_psnr", s.max_psnr},
            {"min_psnr", s.min_psnr},   {"mean_ssim", s.mean_ssim}, {"std_ssim", s.std_ssim}};
}

json run_json(const HarnessRun& r)
{
    auto nan_to_null = [](const std::vector<double>& v) {
        json a = json::array();
        for (double x : v)
            a.push_back(std::isnan(x) ? json(nullptr) : json(x));
        return a;
    };
    json j = {{"seed", r.seed},
              {"psnr", r.psnr},
              {"ssim", nan_to_null(r.ssim)},
              {"mean_psnr", r.mean_psnr},
              {"mean_ssim", std::isnan(r.mean_ssim) ? json(nullptr) : json(r.mean_ssim)}};
    if (!r.order.empty())
        j["order"] = r.order;
    return j;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Region-specific colour filters: render, fit, bake and serve white-box edits"};
    app.require_subcommand(1);
    std::string sub_name;

    // apply
    auto* apply = app.add_subcommand("apply", "Render an image through a recipe");
    std::string a_input, a_recipe, a_output;
    apply->add_option("--input", a_input, "Input PNG/JPEG")->required();
    apply->add_option("--recipe", a_recipe, "Recipe JSON")->required();
    apply->add_option("--output", a_output, "Output image (.png or .jpg)")->required();

    // fit
    auto* fitc = app.add_subcommand("fit", "Recover a recipe for an input/target pair");
    std::string f_input, f_target, f_masks, f_out, f_loss = "l1", f_filters = "highlights",
                                                   f_global = "shift_r,shift_g,shift_b";
    int f_free = 0, f_iters = 2000, f_grid = 32;
    std::uint64_t f_seed = 0;
    double f_lr = FitConfig{}.lr, f_sigma = 0.0, f_bound = default_theta_bound;
    bool f_learn_sigma = false;
    fitc->add_option("--input", f_input, "Input image")->required();
    fitc->add_option("--target", f_target, "Target image")->required();
    auto* masks_opt = fitc->add_option("--masks", f_masks, "Directory of 8-bit grayscale mask PNGs");
    fitc->add_option("--free-masks", f_free, "Learn K free masks instead")->excludes(masks_opt)->check(
        CLI::Range(1, 64));
    fitc->add_option("--out", f_out, "Output directory")->required();
    fitc->add_option("--loss", f_loss, "l1 or l2")->check(CLI::IsMember({"l1", "l2"}));
    fitc->add_option("--iters", f_iters, "Adam iterations")->check(CLI::Range(0, 1000000));
    fitc->add_option("--seed", f_seed, "Random seed");
    fitc->add_option("--lr", f_lr, "Initial learning rate")->check(CLI::PositiveNumber);
    fitc->add_option("--filters", f_filters, "Comma-separated filter kinds per mask layer");
    fitc->add_option("--global", f_global, "Comma-separated kinds for the global layer, or 'none'");
    fitc->add_option("--grid", f_grid, "Free-mask logit grid side")->check(CLI::Range(2, 512));
    fitc->add_option("--sigma", f_sigma, "Mask smoothing sigma (0 = off)")->check(CLI::NonNegativeNumber);
    fitc->add_flag("--learn-sigma", f_learn_sigma, "Optimize the smoothing sigma");
    fitc->add_option("--theta-bound", f_bound, "Argument bound")->check(CLI::PositiveNumber);

    // palette-masks
    auto* pal = app.add_subcommand("palette-masks", "Palette-based soft region masks");
    std::string p_input, p_out;
    int p_k = 5;
    std::uint64_t p_seed = 0;
    double p_temp = 10.0, p_sigma = 2.0;
    pal->add_option("--input", p_input, "Input image")->required();
    pal->add_option("--k", p_k, "Palette size")->required()->check(CLI::Range(1, 64));
    pal->add_option("--out", p_out, "Output directory")->required();
    pal->add_option("--seed", p_seed, "Random seed");
    pal->add_option("--temperature", p_temp, "Soft-assignment temperature (Lab units)")->check(CLI::PositiveNumber);
    pal->add_option("--sigma", p_sigma, "Post-smoothing sigma (0 = off)")->check(CLI::NonNegativeNumber);

    // bake
    auto* bk = app.add_subcommand("bake", "Bake a global recipe into a .cube 3-D LUT");
    std::string b_recipe, b_out;
    int b_size = default_lut_size;
    double b_mean = 0.5;
    bk->add_option("--recipe", b_recipe, "Recipe JSON (global layers only)")->required();
    bk->add_option("--size", b_size, "Lattice side")->check(CLI::Range(2, 256));
    bk->add_option("--ref-mean", b_mean, "Image mean frozen into contrast");
    bk->add_option("--out", b_out, "Output .cube file")->required();

    // metrics
    auto* met = app.add_subcommand("metrics", "PSNR, SSIM and mean delta E between two images");
    std::string m_a, m_b;
    met->add_option("--a", m_a, "First image")->required();
    met->add_option("--b", m_b, "Second image")->required();

    // harness
    auto* har = app.add_subcommand("harness", "Sequential vs parallel compositing comparison");
    std::string h_pairs, h_out;
    int h_orders = 5, h_k = 3, h_iters = 2000, h_threads = 0;
    std::uint64_t h_seed = 0;
    std::string h_filters = "highlights,shadows,saturation";
    har->add_option("--pairs", h_pairs, "JSON list of {input, target}")->required();
    har->add_option("--orders", h_orders, "Sequential orders (and parallel seeds)")->check(CLI::Range(1, 1000));
    har->add_option("--seed", h_seed, "Random seed");
    har->add_option("--k", h_k, "Palette masks per image")->check(CLI::Range(1, 64));
    har->add_option("--iters", h_iters, "Adam iterations per fit")->check(CLI::Range(1, 1000000));
    har->add_option("--filters", h_filters, "Filter kinds, one layer per mask and kind");
    har->add_option("--threads", h_threads, "Worker threads (default RSF_THREADS or all cores)");
    har->add_option("--out", h_out, "Also write the table to this JSON file");

    // serve
    auto* srv = app.add_subcommand("serve", "HTTP edit service");
    int s_port = 8080, s_cap = 480;
    std::string s_root, s_host = "127.0.0.1";
    srv->add_option("--port", s_port, "TCP port")->check(CLI::Range(0, 65535));
    srv->add_option("--root", s_root, "Directory for session persistence");
    srv->add_option("--host", s_host, "Bind address");
    srv->add_option("--preview-cap", s_cap, "Long edge of previews")->check(CLI::Range(16, 8192));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "rsf: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    const CLI::App* chosen = app.get_subcommands().front();
    sub_name = chosen->get_name();
    try {
        if (chosen == apply) {
            Image img = read_image(a_input);
            Recipe r = load_recipe(a_recipe);
            write_image(a_output, render(img, r));
        } else if (chosen == fitc) {
            Image input = read_image(f_input);
            Image target = read_image(f_target);
            if (input.size() != target.size())
                throw Error("--target is " + std::to_string(target.width()) + "x" + std::to_string(target.height()) +
                                " but --input is " + std::to_string(input.width()) + "x" +
                                std::to_string(input.height()),
                            "target");
            FitConfig cfg;
            cfg.iterations = f_iters;
            cfg.seed = f_seed;
            cfg.lr = f_lr;
            cfg.loss = f_loss == "l2" ? LossKind::L2 : LossKind::L1;
            cfg.layer_filters = parse_kinds(f_filters, "filters");
            cfg.global_filters = parse_kinds(f_global, "global");
            cfg.grid = f_grid;
            cfg.sigma = f_sigma;
            cfg.learn_sigma = f_learn_sigma;
            cfg.theta_bound = f_bound;
            std::optional<std::vector<Mask>> masks;
            if (f_free > 0) {
                cfg.mode = MaskMode::FreeMasks;
                cfg.free_masks = f_free;
            } else {
                masks = f_masks.empty() ? std::vector<Mask>{} : read_mask_dir(f_masks);
            }
            FitReport rep = fit(input, target, masks, cfg);
            fs::create_directories(f_out);
            const fs::path out(f_out);
            // Free masks are stored at 8 bits; the written output is what the
            // saved recipe renders to.
            Recipe saved = rep.recipe;
            for (auto& l : saved.layers)
                if (l.mask)
                    l.mask = quantized(*l.mask);
            save_recipe(out / "recipe.json", saved);
            Image rendered = render(input, saved);
            write_image(out / "output.png", rendered);
            json report = {{"iterations_run", rep.iterations_run},
                           {"initial_loss", rep.initial_loss},
                           {"final_loss", rep.final_loss},
                           {"loss", f_loss},
                           {"seed", f_seed},
                           {"metrics", metrics_json(compare(rendered, target))},
                           {"loss_history", rep.loss_history},
                           {"recipe", "recipe.json"}};
            write_file_atomic(out / "report.json", report.dump(2) + "\n");
            std::cout << metrics_json(compare(rendered, target)).dump() << "\n";
        } else if (chosen == pal) {
            Image img = read_image(p_input);
            Palette palette = extract_palette(img, p_k, p_seed);
            PaletteMaskOptions mo;
            mo.temperature = p_temp;
            mo.sigma = p_sigma;
            auto masks = palette_to_masks(img, palette, mo);
            fs::create_directories(p_out);
            for (std::size_t i = 0; i < masks.size(); ++i)
                write_mask(fs::path(p_out) / mask_file_name(i), masks[i]);
            json colors = json::array();
            for (const auto& c : palette.colors)
                colors.push_back({c[0], c[1], c[2]});
            json doc = {{"k", p_k}, {"seed", p_seed}, {"shortfall", palette.shortfall}, {"colors", colors},
                        {"temperature", p_temp}, {"sigma", p_sigma}};
            write_file_atomic(fs::path(p_out) / "palette.json", doc.dump(2) + "\n");
            if (palette.shortfall)
                std::cerr << "rsf palette-masks: image has only " << palette.colors.size()
                          << " distinct colours; wrote that many masks\n";
        } else if (chosen == bk) {
            Recipe r = load_recipe(b_recipe);
            Lut3D lut = bake(r, b_size, b_mean);
            lut.title = fs::path(b_recipe).stem().string();
            write_cube(b_out, lut);
        } else if (chosen == met) {
            Image a = read_image(m_a);
            Image b = read_image(m_b);
            if (a.size() != b.size())
                throw Error("--b size differs from --a", "b");
            std::cout << metrics_json(compare(a, b)).dump() << "\n";
        } else if (chosen == har) {
            auto bytes = read_file(h_pairs);
            json manifest;
            try {
                manifest = json::parse(bytes.begin(), bytes.end());
            } catch (const json::parse_error& e) {
                throw Error(std::string("--pairs: malformed JSON: ") + e.what(), "pairs");
            }
            if (!manifest.is_array() || manifest.empty())
                throw Error("--pairs must be a non-empty JSON list of {input, target}", "pairs");
            const fs::path base = fs::path(h_pairs).parent_path();
            std::vector<std::pair<Image, Image>> pairs;
            for (std::size_t i = 0; i < manifest.size(); ++i) {
                const json& e = manifest[i];
                const std::string where = "pairs[" + std::to_string(i) + "]";
                if (!e.is_object() || !e.contains("input") || !e.contains("target") || !e["input"].is_string() ||
                    !e["target"].is_string())
                    throw Error(where + " needs string fields 'input' and 'target'", where);
                auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
                pairs.emplace_back(read_image(resolve(e["input"])), read_image(resolve(e["target"])));
                if (pairs.back().first.size() != pairs.back().second.size())
                    throw Error(where + ".target size differs from its input", where + ".target");
            }
            HarnessConfig cfg;
            cfg.fit.iterations = h_iters;
            cfg.palette_k = h_k;
            cfg.filters = parse_kinds(h_filters, "filters");
            if (cfg.filters.empty())
                throw Error("--filters needs at least one kind", "filters");
            cfg.threads = h_threads;
            HarnessTable t = run_seq_vs_parallel_harness(pairs, cfg, h_orders, h_seed);
            json par = json::array(), seq = json::array();
            for (const auto& r : t.parallel)
                par.push_back(run_json(r));
            for (const auto& r : t.sequential)
                seq.push_back(run_json(r));
            json doc = {{"pairs", pairs.size()},
                        {"orders", h_orders},
                        {"seed", h_seed},
                        {"parallel", {{"summary", summary_json(t.parallel_summary)}, {"runs", par}}},
                        {"sequential", {{"summary", summary_json(t.sequential_summary)}, {"runs", seq}}}};
            if (!h_out.empty())
                write_file_atomic(h_out, doc.dump(2) + "\n");
            std::cout << doc.dump(2) << "\n";
        } else if (chosen == srv) {
            service::ServiceOptions so;
            so.preview_cap = s_cap;
            if (!s_root.empty())
                so.root = fs::path(s_root);
            service::EditService svc(so);
            httplib::Server server;
            svc.mount(server);
            if (s_port == 0) {
                int port = server.bind_to_any_port(s_host);
                std::cout << "listening on http://" << s_host << ":" << port << std::endl;
                return server.listen_after_bind() ? 0 : 1;
            }
            std::cout << "listening on http://" << s_host << ":" << s_port << std::endl;
            if (!server.listen(s_host, s_port)) {
                std::cerr << "rsf serve: cannot listen on " << s_host << ":" << s_port << "\n";
                return 1;
            }
        }
    } catch (const Error& e) {
        std::cerr << "rsf " << sub_name << ": error";
        if (!e.field().empty())
            std::cerr << " [" << e.field() << "]";
        std::cerr << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "rsf " << sub_name << ": error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
