// Acceptance run on the 20-phantom truncation suite (256x256 grid, 360 views, i0 = 1e5).
// Prints one PASS/FAIL line per criterion; exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dcr/config.hpp"
#include "dcr/dcr.hpp"
#include "dcr/io.hpp"
#include "dcr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dcr;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %-22s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome adjointness() {
    const auto t0 = std::chrono::steady_clock::now();
    const FanBeamGeometry g = FanBeamGeometry::full_scan(200.0, 100.0, 24, 32, 48, 2.0);
    const ImageGrid grid(32, 32, 1.0, 1.0);
    const std::size_t rays = static_cast<std::size_t>(g.n_views) * g.n_det_virtual;
    std::vector<double> a(rays * grid.size());
    Image basis(grid, Unit::MuPerMm, 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        basis.values[k] = 1.0;
        const Sinogram col = forward_project(basis, g);
        for (std::size_t r = 0; r < rays; ++r)
            a[r * grid.size() + k] = col.values[r];
        basis.values[k] = 0.0;
    }
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        Image x(grid, Unit::MuPerMm);
        for (double& v : x.values)
            v = uni(rng);
        Sinogram y(g);
        for (double& v : y.values)
            v = uni(rng);
        const Sinogram ax = forward_project(x, g);
        const Image aty = back_project(y, grid);
        double lhs = 0.0, rhs = 0.0, dense = 0.0;
        for (std::size_t r = 0; r < rays; ++r) {
            lhs += ax.values[r] * y.values[r];
            double row = 0.0;
            for (std::size_t k = 0; k < grid.size(); ++k)
                row += a[r * grid.size() + k] * x.values[k];
            dense += row * y.values[r];
        }
        for (std::size_t k = 0; k < grid.size(); ++k)
            rhs += x.values[k] * aty.values[k];
        worst = std::max({worst, std::abs(lhs - rhs) / std::abs(lhs), std::abs(dense - rhs) / std::abs(dense)});
    }
    const double t = seconds_since(t0);
    return {worst < 1e-10 && t < 10.0, fmt("max relative gap %.2e (< 1e-10), %.1f s (< 10 s)", worst, t)};
}

Outcome projector_accuracy(const PipelineConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const ImageGrid grid = cfg.image_grid();
    const FanBeamGeometry geo = cfg.fan_beam();
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
        const EllipsePhantom ph = sample_phantom(cfg.suite.seed + static_cast<std::uint64_t>(k), k % 2 == 0,
                                                 PhantomBounds::from(geo, grid));
        const Sinogram disc = forward_project(hu_to_mu(rasterize(ph, grid)), geo);
        const Sinogram exact = analytic_sinogram(ph, geo);
        double num = 0.0, den = 0.0;
        for (std::size_t r = 0; r < exact.values.size(); ++r) {
            num += (disc.values[r] - exact.values[r]) * (disc.values[r] - exact.values[r]);
            den += exact.values[r] * exact.values[r];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    const double t = seconds_since(t0);
    return {worst < 0.01 && t < 60.0, fmt("max relative RMS %.3f%% over 5 phantoms (< 1%%), %.1f s (< 60 s)",
                                          100.0 * worst, t)};
}

Outcome cupping(const PipelineConfig& cfg, const fs::path& run) {
    const ImageGrid grid = cfg.image_grid();
    const double r = cfg.fan_beam().fov_radius(false);
    double lowest = 1e300;
    int ok = 0;
    for (int k = 0; k < cfg.suite.n_phantoms; ++k) {
        const fs::path dir = run / case_name(k);
        const Image fbp = io::load_image(dir / "fbp");
        const Image ref = io::load_image(dir / "reference");
        double excess = 0.0;
        int n = 0;
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                const Point2 p = grid.world(i, j);
                const double rr = std::hypot(p.x, p.y);
                if (rr > 0.9 * r && rr < r) {
                    excess += fbp(i, j) - ref(i, j);
                    ++n;
                }
            }
        excess /= n;
        lowest = std::min(lowest, excess);
        ok += excess > 100.0 ? 1 : 0;
    }
    return {ok == cfg.suite.n_phantoms,
            fmt("%.0f/%.0f phantoms above +100 HU in the outer ring, minimum %+.1f HU", ok, cfg.suite.n_phantoms,
                lowest)};
}

Outcome ordering(const EvalReport& r, double minutes) {
    auto get = [&](const std::string& m) {
        for (const auto& s : r.summary)
            if (s.method == m)
                return s;
        throw std::logic_error("missing method " + m);
    };
    const auto fbp = get("fbp"), wce = get("wce"), wtv = get("wtv"), prior = get("prior"), dcr = get("dcr");
    const bool order = fbp.rmse_fov > wce.rmse_fov && wce.rmse_fov > wtv.rmse_fov && wtv.rmse_fov > dcr.rmse_fov;
    bool ssim_best = true;
    for (const auto& s : r.summary)
        if (s.method != "dcr")
            ssim_best = ssim_best && dcr.ssim > s.ssim;
    std::ostringstream os;
    os << fmt("RMSE-FOV fbp %.1f > wce %.1f > wtv %.1f > dcr %.1f HU", fbp.rmse_fov, wce.rmse_fov, wtv.rmse_fov,
              dcr.rmse_fov)
       << fmt(" (prior %.1f); SSIM dcr %.4f vs best other %.4f", prior.rmse_fov, dcr.ssim,
              std::max({fbp.ssim, wce.ssim, wtv.ssim, prior.ssim}))
       << fmt("; suite %.1f min (< 30)", minutes);
    return {order && ssim_best && minutes < 30.0, os.str()};
}

Outcome data_consistency(const PipelineConfig& cfg, const fs::path& run) {
    int consistent = 0;
    bool merge_exact = true, passthrough = true;
    double worst_ratio = 0.0;
    for (int k = 0; k < cfg.suite.n_phantoms; ++k) {
        const Case c = simulate_case(cfg, k, cfg.suite.truncating);
        const Image prior = surrogate_prior(c.reference, cfg.prior, c.prior_seed);
        const Image dcr = io::load_image(run / case_name(k) / "dcr");
        const ChannelMask m = c.measured.measured_mask;
        const double r_dcr = relative_residual(hu_to_mu(dcr), c.measured, m);
        const double r_prior = relative_residual(hu_to_mu(prior), c.measured, m);
        consistent += r_dcr <= r_prior ? 1 : 0;
        worst_ratio = std::max(worst_ratio, r_dcr / r_prior);

        const Sinogram merged = merge_sinograms(c.measured, prior);
        const Sinogram fp = forward_project(hu_to_mu(prior), c.measured.geometry, invert(m));
        for (int v = 0; v < merged.n_views(); ++v)
            for (int ch = 0; ch < merged.n_channels(); ++ch) {
                if (m[static_cast<std::size_t>(ch)])
                    passthrough = passthrough && merged.at(v, ch) == c.measured.at(v, ch);
                else
                    merge_exact = merge_exact && merged.at(v, ch) == fp.at(v, ch);
            }
    }
    std::ostringstream os;
    os << consistent << "/" << cfg.suite.n_phantoms << " phantoms with measured residual of DCR <= prior"
       << fmt(" (worst ratio %.3f)", worst_ratio) << "; unmeasured channels = A_t prior "
       << (merge_exact ? "exactly" : "NOT exactly") << "; measured channels " << (passthrough ? "bit-exact" : "altered");
    return {consistent == cfg.suite.n_phantoms && merge_exact && passthrough, os.str()};
}

Outcome wtv_machinery(const PipelineConfig& cfg) {
    // frozen-weight objective along every descent step of a full DCR run (tv_descent also throws on increase)
    const Case c = simulate_case(cfg, 0, true);
    ReconDiagnostics diag;
    dcr_reconstruct(c.measured, surrogate_prior(c.reference, cfg.prior, c.prior_seed), cfg.recon, &diag);
    std::size_t steps = 0;
    bool monotone = true;
    for (const auto& it : diag.iterations)
        for (std::size_t s = 1; s < it.tv_objective.size(); ++s) {
            monotone = monotone && it.tv_objective[s] <= it.tv_objective[s - 1];
            ++steps;
        }

    const ImageGrid g8(8, 8, 1.0, 1.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-300.0, 300.0);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Image f(g8, Unit::HU), prev(g8, Unit::HU), dir(g8, Unit::HU);
        for (std::size_t k = 0; k < g8.size(); ++k) {
            f.values[k] = uni(rng);
            prev.values[k] = uni(rng);
            dir.values[k] = normal(rng);
        }
        double norm = 0.0;
        for (double v : dir.values)
            norm += v * v;
        for (double& v : dir.values)
            v /= std::sqrt(norm);  // unit direction
        const TVWeights w = tv_weights(prev, 5.0);
        double fmax = 0.0;
        for (double v : f.values)
            fmax = std::max(fmax, std::abs(v));
        const double delta = 1.0, h = 1e-3 * fmax;
        const Image grad = wtv_gradient(f, w, delta);
        Image fp = f, fm = f;
        double analytic = 0.0;
        for (std::size_t k = 0; k < g8.size(); ++k) {
            fp.values[k] += h * dir.values[k];
            fm.values[k] -= h * dir.values[k];
            analytic += grad.values[k] * dir.values[k];
        }
        const double numeric = (wtv_smoothed(fp, w, delta) - wtv_smoothed(fm, w, delta)) / (2.0 * h);
        worst = std::max(worst, std::abs(numeric - analytic) / std::abs(analytic));
    }

    Image step(ImageGrid(6, 6, 1.0, 1.0), Unit::HU, 0.0);
    for (int j = 0; j < 6; ++j)
        for (int i = 3; i < 6; ++i)
            step(i, j) = 100.0;
    const TVWeights ws = tv_weights(step, 5.0);
    const bool spot = std::abs(ws.w[step.grid.index(2, 2)] - 1.0 / 105.0) < 1e-15 &&
                      std::abs(ws.w[step.grid.index(0, 2)] - 0.2) < 1e-15;

    std::ostringstream os;
    os << steps << " descent steps " << (monotone ? "non-increasing" : "INCREASING")
       << fmt("; gradient vs finite differences max rel. error %.1e (< 1e-5)", worst) << "; weight spot-check "
       << (spot ? "1/105 and 1/5" : "wrong");
    return {monotone && steps > 0 && worst < 1e-5 && spot, os.str()};
}

Outcome noise_reduction(const PipelineConfig& cfg) {
    const ImageGrid grid = cfg.image_grid();
    const FanBeamGeometry full = FanBeamGeometry::full_scan(cfg.geometry.sdd, cfg.geometry.sid, cfg.geometry.n_views,
                                                            cfg.geometry.n_det_virtual, cfg.geometry.n_det_virtual,
                                                            cfg.geometry.det_spacing);
    const EllipsePhantom ph = sample_phantom(cfg.suite.seed, false, PhantomBounds::from(cfg.fan_beam(), grid));
    const Sinogram noisy = add_poisson_noise(analytic_sinogram(ph, full), NoiseModel{cfg.noise.i0, 99});
    const double tv_fbp = total_variation(fbp_reconstruct(noisy, grid));
    const double tv_wtv = total_variation(wtv_reconstruct(noisy, grid, cfg.recon));
    return {tv_wtv < tv_fbp, fmt("TV(wTV) %.4g < TV(FBP) %.4g HU on noisy untruncated data", tv_wtv, tv_fbp)};
}

Outcome determinism(PipelineConfig cfg, const fs::path& work) {
    cfg.suite.n_phantoms = 2;
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = work / ("determinism_" + std::to_string(run));
        fs::remove_all(dir);
        PipelineOptions opt;
        opt.out_dir = dir;
        run_pipeline(cfg, opt);
        bytes[run] = slurp(dir / "report.json") + slurp(dir / "report.txt") + slurp(dir / "case_0001" / "dcr.raw");
    }
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    return {same, std::string("two pipeline runs (2 phantoms, all methods, fixed seeds): reports and images ") +
                      (same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::temp_directory_path() / "dcr_acceptance";
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--work")
            work = argv[i + 1];
    fs::create_directories(work);

    const PipelineConfig cfg;  // 256x256, 360 views, i0 1e5, 20 truncating phantoms
    std::printf("suite: %d phantoms, %dx%d grid, %d views, i0 %.0e; work dir %s\n", cfg.suite.n_phantoms, cfg.grid.nx,
                cfg.grid.ny, cfg.geometry.n_views, cfg.noise.i0, work.string().c_str());

    report("projector-adjointness", adjointness);
    report("projector-accuracy", [&] { return projector_accuracy(cfg); });

    const fs::path run = work / "suite";
    fs::remove_all(run);
    EvalReport suite;
    double minutes = 0.0;
    bool suite_ok = true;
    try {
        const auto t0 = std::chrono::steady_clock::now();
        PipelineOptions opt;
        opt.out_dir = run;
        suite = run_pipeline(cfg, opt);
        minutes = seconds_since(t0) / 60.0;
        std::printf("%s", report_table(suite).c_str());
    } catch (const std::exception& e) {
        std::printf("suite run failed: %s\n", e.what());
        suite_ok = false;
    }
    auto needs_suite = [&](const std::function<Outcome()>& f) {
        return [&, f] { return suite_ok ? f() : Outcome{false, "suite run failed"}; };
    };

    report("cupping", needs_suite([&] { return cupping(cfg, run); }));
    report("table2-ordering", needs_suite([&] { return ordering(suite, minutes); }));
    report("data-consistency", needs_suite([&] { return data_consistency(cfg, run); }));
    report("wtv-machinery", [&] { return wtv_machinery(cfg); });
    report("noise-reduction", [&] { return noise_reduction(cfg); });
    report("determinism", [&] { return determinism(cfg, work); });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
