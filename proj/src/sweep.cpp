#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "ptycho/io/manifest.hpp"
#include "ptycho/pipeline.hpp"

namespace ptycho {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool wants(const SweepConfig& cfg, Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); }

SweepRecord solve(const DiffractionStack& stack, const Probe& probe, const MaskedLabel& truth, const EpieConfig& cfg,
                  const std::optional<ComplexField>& init, Method method) {
    const auto t0 = Clock::now();
    const EpieResult result = run_epie(stack, probe, cfg, init);
    SweepRecord rec;
    rec.method = method;
    rec.seconds = seconds_since(t0);
    rec.iterations = result.state.iteration;
    rec.converged = result.converged;
    const Reconstruction r = finalize(result.state, stack.plan);
    rec.metrics = report(r.amplitude, r.phase, truth.amplitude, truth.phase, truth.mask);
    return rec;
}

struct Stats {
    double mean = 0.0;
    double std = 0.0;
};

// Sample standard deviation; 0 for a single run.
Stats stats(const std::vector<double>& v) {
    Stats s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        for (double x : v) s.std += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(s.std / static_cast<double>(v.size() - 1));
    }
    return s;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::vector<SweepRecord> run_sweep_job(const PipelineConfig& cfg, std::size_t offset, std::uint64_t seed) {
    const auto& pp = cfg.simulate.probe;
    const auto& sw = cfg.sweep;
    const Probe probe = make_disc_probe(pp.window, pp.radius, pp.edge_smooth, pp.phase_curvature);
    const ScanPlan plan = make_grid_plan(sw.rows, sw.cols, offset, pp.window);
    const ComplexField transmission = make_phantom(plan.canvas, seed, cfg.simulate.phantom);
    const DiffractionStack stack = simulate_stack(transmission, probe, plan);
    const MaskedLabel truth = make_masked_label(transmission, probe, plan.positions);

    std::vector<SweepRecord> out;
    if (wants(sw, Method::Epie)) out.push_back(solve(stack, probe, truth, cfg.epie, std::nullopt, Method::Epie));

    if (wants(sw, Method::Epf) || wants(sw, Method::StitchedOnly)) {
        const auto t0 = Clock::now();
        const MaskedLabel noisy = corrupt_label(truth, seed, sw.prediction);
        const StitchResult stitched = stitch(slice_patches(noisy, probe, plan), plan.canvas, cfg.stitch_for(pp));
        const double stitch_seconds = seconds_since(t0);
        if (wants(sw, Method::StitchedOnly)) {
            SweepRecord rec;
            rec.method = Method::StitchedOnly;
            rec.seconds = stitch_seconds;
            rec.metrics = report(stitched.amplitude, stitched.phase, truth.amplitude, truth.phase, truth.mask);
            out.push_back(rec);
        }
        if (wants(sw, Method::Epf)) {
            out.push_back(solve(stack, probe, truth, cfg.epie, warm_start_object(stitched), Method::Epf));
            out.back().seconds += stitch_seconds;
        }
    }
    for (auto& r : out) {
        r.offset = offset;
        r.seed = seed;
    }
    return out;
}

std::vector<SweepRecord> run_sweep(const PipelineConfig& cfg, const fs::path& out, std::size_t threads) {
    cfg.epie.validate();
    std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
    for (auto offset : cfg.sweep.offsets)
        for (auto seed : cfg.sweep.seeds) jobs.emplace_back(offset, seed);

    // Results land in job order, so the CSVs do not depend on scheduling.
    std::vector<std::vector<SweepRecord>> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                results[i] = run_sweep_job(cfg, jobs[i].first, jobs[i].second);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        }
    };
    const std::size_t n = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<SweepRecord> records;
    for (auto& r : results) records.insert(records.end(), r.begin(), r.end());

    std::ostringstream runs, timing;
    runs << "offset,method,seed,amp_mae,amp_nrmse,phase_mae,phase_nrmse,phase_offset,iterations,converged\n";
    timing << "offset,method,seed,seconds,seconds_per_iteration\n";
    for (const auto& r : records) {
        const auto& m = r.metrics;
        runs << r.offset << ',' << to_string(r.method) << ',' << r.seed << ',' << fmt(m.amp_mae) << ',' << fmt(m.amp_nrmse)
             << ',' << fmt(m.phase_mae) << ',' << fmt(m.phase_nrmse) << ',' << fmt(m.phase_offset.a) << ','
             << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
        timing << r.offset << ',' << to_string(r.method) << ',' << r.seed << ',' << fmt(r.seconds) << ','
               << (r.iterations > 0 ? fmt(r.seconds / static_cast<double>(r.iterations)) : "") << '\n';
    }

    // Grouped by offset, then method in config order.
    std::ostringstream summary;
    summary << "offset,method,runs,amp_mae_mean,amp_mae_std,amp_nrmse_mean,amp_nrmse_std,phase_mae_mean,phase_mae_std,"
               "phase_nrmse_mean,phase_nrmse_std,iterations_mean,iterations_std,converged_runs\n";
    std::map<Method, std::vector<double>> per_iteration;
    for (auto offset : cfg.sweep.offsets) {
        for (auto method : cfg.sweep.methods) {
            std::vector<double> am, an, pm, pn, it;
            std::size_t converged = 0;
            for (const auto& r : records) {
                if (r.offset != offset || r.method != method) continue;
                am.push_back(r.metrics.amp_mae);
                an.push_back(r.metrics.amp_nrmse);
                pm.push_back(r.metrics.phase_mae);
                pn.push_back(r.metrics.phase_nrmse);
                it.push_back(static_cast<double>(r.iterations));
                converged += r.converged ? 1 : 0;
                if (r.iterations > 0) per_iteration[method].push_back(r.seconds / static_cast<double>(r.iterations));
            }
            if (am.empty()) continue;
            summary << offset << ',' << to_string(method) << ',' << am.size();
            for (const auto* v : {&am, &an, &pm, &pn, &it}) {
                const Stats s = stats(*v);
                summary << ',' << fmt(s.mean) << ',' << fmt(s.std);
            }
            summary << ',' << converged << '\n';
        }
    }
    timing << "\n# median seconds per iteration over the sweep\nmethod,median_seconds_per_iteration\n";
    for (auto& [method, v] : per_iteration) {
        std::sort(v.begin(), v.end());
        const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
        timing << to_string(method) << ',' << fmt(med) << '\n';
    }

    fs::create_directories(out);
    io::write_text(out / "runs.csv", runs.str());
    io::write_text(out / "summary.csv", summary.str());
    io::write_text(out / "timing.csv", timing.str());
    return records;
}

}  // namespace ptycho
