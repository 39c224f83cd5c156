#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fitter.hpp"
#include "palette.hpp"

namespace rsf {

struct HarnessConfig {
    FitConfig fit;
    int palette_k = 3;
    /// One single-filter layer per (palette mask, kind).
    std::vector<FilterKind> filters = {FilterKind::Highlights, FilterKind::Shadows, FilterKind::Saturation};
    bool global_shift = true;
    PaletteMaskOptions masks;
    /// Worker threads; 0 reads RSF_THREADS, falling back to the hardware count.
    int threads = 0;
};

struct HarnessRun {
    std::vector<std::size_t> order;  ///< empty for parallel runs
    std::uint64_t seed = 0;
    std::vector<double> psnr;  ///< per pair
    std::vector<double> ssim;  ///< per pair; NaN where the image is below the SSIM window
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

struct ApproachSummary {
    double mean_psnr = 0.0;
    double std_psnr = 0.0;  ///< population std of run means
    double max_psnr = 0.0;
    double min_psnr = 0.0;
    double mean_ssim = 0.0;
    double std_ssim = 0.0;
};

struct HarnessTable {
    std::vector<HarnessRun> parallel;    ///< one per seed
    std::vector<HarnessRun> sequential;  ///< one per filter order
    ApproachSummary parallel_summary;
    ApproachSummary sequential_summary;
};

inline int worker_count(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("RSF_THREADS")) {
        int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs task(i) for i in [0, n) on up to `threads` workers. The first
/// exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& task)
{
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = n;
            }
        }
    };
    const int count = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 1; t < count; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

/// Layer templates shared by both approaches for one input image.
inline std::vector<ModelLayer> harness_layers(const Image& input, const HarnessConfig& cfg, std::uint64_t seed)
{
    auto palette = extract_palette(input, cfg.palette_k, seed);
    auto masks = palette_to_masks(input, palette, cfg.masks);
    std::vector<ModelLayer> layers;
    for (auto& m : masks)
        for (FilterKind k : cfg.filters) {
            ModelLayer l;
            l.source = MaskSource::Fixed;
            l.fixed = m;
            l.kinds = {k};
            layers.push_back(std::move(l));
        }
    if (cfg.global_shift) {
        ModelLayer g;
        g.kinds = {FilterKind::ShiftR, FilterKind::ShiftG, FilterKind::ShiftB};
        layers.push_back(std::move(g));
    }
    return layers;
}

/// Distinct random permutations of [0, n), as many as exist up to `count`;
/// beyond that orders repeat.
inline std::vector<std::vector<std::size_t>> random_orders(std::size_t n, int count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> out;
    std::set<std::vector<std::size_t>> seen;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i)
        perm[i] = i;
    int attempts = 0;
    while (static_cast<int>(out.size()) < count) {
        std::shuffle(perm.begin(), perm.end(), rng);
        if (seen.insert(perm).second || ++attempts > 1000)
            out.push_back(perm);
    }
    return out;
}

namespace detail {

inline ApproachSummary summarize(const std::vector<HarnessRun>& runs)
{
    ApproachSummary s;
    if (runs.empty())
        return s;
    const double n = static_cast<double>(runs.size());
    s.max_psnr = -std::numeric_limits<double>::infinity();
    s.min_psnr = std::numeric_limits<double>::infinity();
    for (const auto& r : runs) {
        s.mean_psnr += r.mean_psnr / n;
        s.mean_ssim += r.mean_ssim / n;
        s.max_psnr = std::max(s.max_psnr, r.mean_psnr);
        s.min_psnr = std::min(s.min_psnr, r.mean_psnr);
    }
    for (const auto& r : runs) {
        s.std_psnr += (r.mean_psnr - s.mean_psnr) * (r.mean_psnr - s.mean_psnr) / n;
        s.std_ssim += (r.mean_ssim - s.mean_ssim) * (r.mean_ssim - s.mean_ssim) / n;
    }
    s.std_psnr = std::sqrt(s.std_psnr);
    s.std_ssim = std::sqrt(s.std_ssim);
    return s;
}

inline void finish_run(HarnessRun& r)
{
    double ps = 0.0, ss = 0.0;
    int ns = 0;
    for (double v : r.psnr)
        ps += v;
    for (double v : r.ssim)
        if (!std::isnan(v)) {
            ss += v;
            ++ns;
        }
    r.mean_psnr = r.psnr.empty() ? 0.0 : ps / static_cast<double>(r.psnr.size());
    r.mean_ssim = ns ? ss / ns : std::nan("");
}

} // namespace detail

/// Fits every pair with parallel compositing (n_orders seeds) and with
/// sequential compositing (n_orders random layer orders, same budget and
/// filter set), and tabulates PSNR/SSIM per run.
inline HarnessTable run_seq_vs_parallel_harness(const std::vector<std::pair<Image, Image>>& pairs,
                                                const HarnessConfig& cfg, int n_orders, std::uint64_t seed)
{
    if (pairs.empty())
        throw Error("harness needs at least one pair", "pairs");
    if (n_orders < 1)
        throw Error("harness needs at least one order", "orders");
    for (const auto& [in, tgt] : pairs)
        require_same_size(in, tgt, "harness");

    std::vector<std::vector<ModelLayer>> templates(pairs.size());
    const int threads = worker_count(cfg.threads);
    parallel_for(pairs.size(), threads, [&](std::size_t i) { templates[i] = harness_layers(pairs[i].first, cfg, seed); });
    const std::size_t n_layers = templates.front().size();
    for (const auto& t : templates)
        if (t.size() != n_layers)
            throw Error("palette produced a different layer count for some pair (too few distinct colours?)");

    std::mt19937_64 seeder(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::uint64_t> run_seeds(n_orders);
    for (auto& s : run_seeds)
        s = seeder();
    auto orders = random_orders(n_layers, n_orders, seeder());

    HarnessTable table;
    table.parallel.resize(n_orders);
    table.sequential.resize(n_orders);
    for (int r = 0; r < n_orders; ++r) {
        table.parallel[r].seed = table.sequential[r].seed = run_seeds[r];
        table.sequential[r].order = orders[r];
        for (auto* run : {&table.parallel[r], &table.sequential[r]}) {
            run->psnr.assign(pairs.size(), 0.0);
            run->ssim.assign(pairs.size(), 0.0);
        }
    }

    const std::size_t per_approach = static_cast<std::size_t>(n_orders) * pairs.size();
    parallel_for(2 * per_approach, threads, [&](std::size_t task) {
        const bool sequential = task >= per_approach;
        const std::size_t rest = task % per_approach;
        const std::size_t run = rest / pairs.size();
        const std::size_t pair = rest % pairs.size();
        FitConfig fc = cfg.fit;
        fc.seed = run_seeds[run];
        fc.composition = sequential ? Composition::Sequential : Composition::Parallel;
        fc.order = sequential ? orders[run] : std::vector<std::size_t>{};
        FitReport rep = fit_layers(pairs[pair].first, pairs[pair].second, templates[pair], fc);
        HarnessRun& out = sequential ? table.sequential[run] : table.parallel[run];
        out.psnr[pair] = rep.metrics.psnr;
        out.ssim[pair] = rep.metrics.ssim.value_or(std::nan(""));
    });

    for (auto& r : table.parallel)
        detail::finish_run(r);
    for (auto& r : table.sequential)
        detail::finish_run(r);
    table.parallel_summary = detail::summarize(table.parallel);
    table.sequential_summary = detail::summarize(table.sequential);
    return table;
}

} // namespace rsf
