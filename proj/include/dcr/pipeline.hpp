#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcr/config.hpp"
#include "dcr/core.hpp"
#include "dcr/fbp.hpp"
#include "dcr/io.hpp"
#include "dcr/metrics.hpp"
#include "dcr/phantom.hpp"
#include "dcr/png.hpp"
#include "dcr/recon.hpp"
#include "dcr/simulate.hpp"
#include "dcr/wce.hpp"

namespace dcr {

/// splitmix64 finalizer; mixes (base, stream, index) into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    return mix(base ^ mix((stream << 32) + index));
}

/// Separable Gaussian blur with edge clamping; sigma in pixels, zero sigma copies.
inline Image gaussian_blur(const Image& image, double sigma) {
    if (!(sigma > 0.0))
        return image;
    const ImageGrid& g = image.grid;
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double ksum = 0.0;
    for (int q = -r; q <= r; ++q)
        ksum += k[static_cast<std::size_t>(q + r)] = std::exp(-0.5 * q * q / (sigma * sigma));
    for (double& v : k)
        v /= ksum;
    Image tmp = image, out = image;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double s = 0.0;
            for (int q = -r; q <= r; ++q)
                s += k[static_cast<std::size_t>(q + r)] * image(std::clamp(i + q, 0, g.nx - 1), j);
            tmp(i, j) = s;
        }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double s = 0.0;
            for (int q = -r; q <= r; ++q)
                s += k[static_cast<std::size_t>(q + r)] * tmp(i, std::clamp(j + q, 0, g.ny - 1));
            out(i, j) = s;
        }
    return out;
}

/// Imperfect stand-in for a learned prior: blurred ground truth plus white Gaussian noise (HU).
inline Image surrogate_prior(const Image& reference, const PriorConfig& cfg, std::uint64_t seed) {
    Image prior = gaussian_blur(to_unit(reference, Unit::HU), cfg.blur_sigma_px);
    if (cfg.noise_hu > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, cfg.noise_hu);
        for (double& v : prior.values)
            v += noise(rng);
    }
    return prior;
}

/// One simulated acquisition: phantom, ground truth, ideal and measured sinograms, evaluation masks.
struct Case {
    int index = 0;
    std::uint64_t phantom_seed = 0;
    std::uint64_t noise_seed = 0;
    std::uint64_t prior_seed = 0;
    EllipsePhantom phantom;
    Image reference;  // HU
    Sinogram ideal;   // noiseless, full virtual detector
    Sinogram measured;
    Mask fov;
    Mask body;
};

inline Case simulate_case(const PipelineConfig& cfg, int index, bool truncating) {
    Case c;
    c.index = index;
    c.phantom_seed = cfg.suite.seed + static_cast<std::uint64_t>(index);
    c.noise_seed = derive_seed(cfg.noise.rng_seed, 1, static_cast<std::uint64_t>(index));
    c.prior_seed = derive_seed(cfg.prior.seed, 2, static_cast<std::uint64_t>(index));
    const ImageGrid grid = cfg.image_grid();
    const FanBeamGeometry geo = cfg.fan_beam();
    c.phantom = sample_phantom(c.phantom_seed, truncating, PhantomBounds::from(geo, grid));
    c.reference = rasterize(c.phantom, grid);
    c.ideal = analytic_sinogram(c.phantom, geo);
    c.measured = add_poisson_noise(truncate(c.ideal), NoiseModel{cfg.noise.i0, c.noise_seed});
    c.fov = fov_mask(geo, grid, false);
    c.body = body_mask(c.reference);
    return c;
}

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m{"fbp", "wce", "wtv", "prior", "unet", "dcr"};
    return m;
}

inline const std::vector<std::string>& primary_methods() {
    static const std::vector<std::string> m{"fbp", "wce", "wtv", "prior", "dcr"};
    return m;
}

struct PipelineOptions {
    std::vector<std::string> methods = primary_methods();
    std::optional<std::filesystem::path> out_dir;
    /// Directory with learned priors named case_NNNN.json; used by "unet" and by "dcr".
    std::optional<std::filesystem::path> prior_dir;
};

inline std::string case_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "case_%04d", k);
    return buf;
}

inline nlohmann::json scores_to_json(const MethodScores& s) {
    return nlohmann::json{{"method", s.method}, {"rmse_fov_hu", s.rmse_fov}, {"rmse_body_hu", s.rmse_body},
                          {"ssim", s.ssim}};
}

inline nlohmann::json report_to_json(const EvalReport& r, const PipelineConfig& cfg) {
    nlohmann::json j;
    j["config"] = config_to_json(cfg);
    j["summary"] = nlohmann::json::array();
    for (const auto& s : r.summary)
        j["summary"].push_back(scores_to_json(s));
    j["cases"] = nlohmann::json::array();
    for (std::size_t k = 0; k < r.per_case.size(); ++k) {
        nlohmann::json c{{"case", k}, {"scores", nlohmann::json::array()}};
        for (const auto& s : r.per_case[k])
            c["scores"].push_back(scores_to_json(s));
        j["cases"].push_back(c);
    }
    return j;
}

/// Plain-text table: methods as columns; rows RMSE in FOV, whole-body RMSE, SSIM.
inline std::string report_table(const EvalReport& r) {
    std::ostringstream os;
    char buf[64];
    auto cell = [&](const char* fmt, double v) {
        std::snprintf(buf, sizeof buf, fmt, v);
        return std::string(buf);
    };
    os << "Method        ";
    for (const auto& s : r.summary) {
        std::string name = s.method;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
        std::snprintf(buf, sizeof buf, "%10s", name.c_str());
        os << buf;
    }
    os << "\nRMSE in FOV   ";
    for (const auto& s : r.summary)
        os << cell("%7.1f HU", s.rmse_fov);
    os << "\nRMSE          ";
    for (const auto& s : r.summary)
        os << cell("%7.1f HU", s.rmse_body);
    os << "\nSSIM          ";
    for (const auto& s : r.summary)
        os << cell("%10.4f", s.ssim);
    os << "\n";
    return os.str();
}

inline void validate_methods(const std::vector<std::string>& methods) {
    if (methods.empty())
        throw ConfigError("pipeline: no methods requested");
    for (const auto& m : methods)
        if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
            throw ConfigError("pipeline: unknown method '" + m + "'");
}

/**
 * Simulates the phantom suite and reconstructs every case with each
 * requested method, scoring against the rasterized ground truth. With an
 * output directory, writes per-case images, difference images, optional
 * PNGs, report.json and report.txt.
 */
inline EvalReport run_pipeline(const PipelineConfig& cfg, const PipelineOptions& opt) {
    cfg.validate();
    validate_methods(opt.methods);
    const bool want_unet = std::find(opt.methods.begin(), opt.methods.end(), "unet") != opt.methods.end();
    if (want_unet && !opt.prior_dir)
        throw DataError("pipeline: method 'unet' needs learned priors (--prior-dir)");

    const ImageGrid grid = cfg.image_grid();
    EvalReport report;
    for (int k = 0; k < cfg.suite.n_phantoms; ++k) {
        const Case c = simulate_case(cfg, k, cfg.suite.truncating);
        std::optional<Image> learned;
        if (opt.prior_dir) {
            const auto path = *opt.prior_dir / (case_name(k) + ".json");
            if (!std::filesystem::exists(path))
                throw DataError("pipeline: learned prior missing: " + path.string());
            learned = to_unit(io::load_image(path), Unit::HU);
            require_same_grid(learned->grid, grid, "pipeline prior");
        }
        const Image surrogate = surrogate_prior(c.reference, cfg.prior, c.prior_seed);
        const Image& dcr_prior = learned ? *learned : surrogate;

        const auto case_dir = opt.out_dir ? std::optional(*opt.out_dir / case_name(k)) : std::nullopt;
        if (case_dir) {
            io::save_image(*case_dir / "reference", c.reference, {{"phantom_seed", c.phantom_seed}});
            io::save_sinogram(*case_dir / "measured", c.measured, {{"noise_seed", c.noise_seed}, {"i0", cfg.noise.i0}});
            if (cfg.png)
                io::write_png(*case_dir / "reference.png", c.reference, cfg.window);
        }

        std::vector<MethodScores> scores;
        for (const auto& m : opt.methods) {
            Image img;
            if (m == "fbp")
                img = fbp_reconstruct(c.measured, grid);
            else if (m == "wce")
                img = reconstruct_wce(c.measured, grid);
            else if (m == "wtv")
                img = wtv_reconstruct(c.measured, grid, cfg.recon);
            else if (m == "prior")
                img = surrogate;
            else if (m == "unet")
                img = *learned;
            else
                img = dcr_reconstruct(c.measured, dcr_prior, cfg.recon);
            scores.push_back(evaluate_image(m, img, c.reference, c.fov, c.body));
            if (case_dir) {
                Image diff = img;
                for (std::size_t q = 0; q < diff.values.size(); ++q)
                    diff.values[q] -= c.reference.values[q];
                io::save_image(*case_dir / m, img, {{"method", m}});
                io::save_image(*case_dir / (m + "_diff"), diff, {{"method", m}, {"difference_to", "reference"}});
                if (cfg.png)
                    io::write_png(*case_dir / (m + ".png"), img, cfg.window);
            }
        }
        report.per_case.push_back(std::move(scores));
    }

    for (std::size_t m = 0; m < opt.methods.size(); ++m) {
        MethodScores mean{opt.methods[m]};
        for (const auto& row : report.per_case) {
            mean.rmse_fov += row[m].rmse_fov;
            mean.rmse_body += row[m].rmse_body;
            mean.ssim += row[m].ssim;
        }
        const double n = static_cast<double>(report.per_case.size());
        mean.rmse_fov /= n;
        mean.rmse_body /= n;
        mean.ssim /= n;
        report.summary.push_back(mean);
    }

    if (opt.out_dir) {
        io::detail::write_text(*opt.out_dir / "report.json", report_to_json(report, cfg).dump(2) + "\n");
        io::detail::write_text(*opt.out_dir / "report.txt", report_table(report));
    }
    return report;
}

/// HU values on a 1/64 grid, so that differences and their reversal are exact in float32.
inline Image quantize_hu(const Image& image) {
    Image out = image;
    for (double& v : out.values)
        v = std::round(std::clamp(v, -65536.0, 65535.0) * 64.0) / 64.0;
    return out;
}

struct DatasetEntry {
    std::string split;
    int index = 0;
    std::uint64_t phantom_seed = 0;
};

/**
 * Training/test triples (f_WCE, f_reference, artifact = f_WCE - f_reference).
 * Train phantoms use even seeds and test phantoms odd seeds derived from
 * `seed`, so the splits never share a phantom.
 */
inline std::vector<DatasetEntry> make_dataset(const PipelineConfig& cfg, int n_train, int n_test,
                                              std::uint64_t seed, const std::filesystem::path& out_dir) {
    cfg.validate();
    if (n_train < 1 || n_test < 1)
        throw ConfigError("dataset: n_train and n_test must be positive");
    const ImageGrid grid = cfg.image_grid();
    const FanBeamGeometry geo = cfg.fan_beam();
    std::vector<DatasetEntry> entries;
    nlohmann::json manifest{{"config", config_to_json(cfg)}, {"seed", seed}, {"triples", nlohmann::json::array()}};

    for (int split = 0; split < 2; ++split) {
        const std::string name = split == 0 ? "train" : "test";
        const int count = split == 0 ? n_train : n_test;
        for (int k = 0; k < count; ++k) {
            const std::uint64_t pseed = 2 * (seed + static_cast<std::uint64_t>(k)) + static_cast<std::uint64_t>(split);
            const EllipsePhantom ph = sample_phantom(pseed, cfg.suite.truncating, PhantomBounds::from(geo, grid));
            const Sinogram measured =
                add_poisson_noise(truncate(analytic_sinogram(ph, geo)), NoiseModel{cfg.noise.i0, derive_seed(pseed, 4, 0)});
            const Image ref = quantize_hu(rasterize(ph, grid));
            const Image wce = quantize_hu(reconstruct_wce(measured, grid));
            Image artifact = wce;
            for (std::size_t q = 0; q < artifact.values.size(); ++q)
                artifact.values[q] = static_cast<double>(static_cast<float>(wce.values[q]) -
                                                         static_cast<float>(ref.values[q]));

            char stem[32];
            std::snprintf(stem, sizeof stem, "%04d", k);
            const auto dir = out_dir / name;
            const nlohmann::json prov{{"split", name}, {"index", k}, {"phantom_seed", pseed}};
            io::save_image(dir / (std::string(stem) + "_wce"), wce, prov);
            io::save_image(dir / (std::string(stem) + "_reference"), ref, prov);
            io::save_image(dir / (std::string(stem) + "_artifact"), artifact, prov);
            manifest["triples"].push_back({{"split", name},
                                           {"index", k},
                                           {"phantom_seed", pseed},
                                           {"wce", name + "/" + stem + "_wce.json"},
                                           {"reference", name + "/" + stem + "_reference.json"},
                                           {"artifact", name + "/" + stem + "_artifact.json"}});
            entries.push_back({name, k, pseed});
        }
    }
    io::detail::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return entries;
}

}  // namespace dcr
