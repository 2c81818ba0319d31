// Command-line front end: simulation, reconstruction, evaluation and batch comparison.
//
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcr/config.hpp"
#include "dcr/dcr.hpp"
#include "dcr/io.hpp"
#include "dcr/pipeline.hpp"
#include "dcr/png.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

/// Config file plus "--section.key value" overrides, one flag per PipelineConfig key.
struct ConfigSource {
    std::string path;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App& app) {
        app.add_option("--config", path, "pipeline configuration (JSON)");
        const json defaults = dcr::config_to_json(dcr::PipelineConfig{});
        for (auto sec = defaults.begin(); sec != defaults.end(); ++sec)
            for (auto key = sec.value().begin(); key != sec.value().end(); ++key) {
                const std::string name = sec.key() + "." + key.key();
                app.add_option_function<std::string>(
                       "--" + name, [this, name](const std::string& v) { overrides[name] = v; },
                       "override " + name + " (default " + key.value().dump() + ")")
                    ->group("Config overrides");
            }
    }

    dcr::PipelineConfig load() const {
        json doc = json::object();
        if (!path.empty()) {
            std::ifstream in(path);
            if (!in)
                throw dcr::ConfigError("cannot open config " + path);
            try {
                doc = json::parse(in);
            } catch (const json::exception& e) {
                throw dcr::ConfigError("config " + path + ": " + e.what());
            }
        }
        for (const auto& [name, text] : overrides) {
            const auto dot = name.find('.');
            json value;
            try {
                value = json::parse(text);
            } catch (const json::exception&) {
                value = text;
            }
            doc[name.substr(0, dot)][name.substr(dot + 1)] = value;
        }
        return dcr::config_from_json(doc);
    }
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

json provenance(const std::string& command, const dcr::PipelineConfig& cfg) {
    return json{{"command", command}, {"config", dcr::config_to_json(cfg)}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-consistent CT reconstruction for field-of-view extension"};
    app.require_subcommand(1);

    ConfigSource cfg_src;
    std::string in_path, out_path, prior_path, phantom_path, image_path, reference_path, prior_dir;
    std::string methods_arg = "fbp,wce,wtv,prior,dcr";
    std::optional<std::uint64_t> seed;
    std::optional<bool> truncating;
    std::optional<int> n_train, n_test;
    std::vector<std::string> eval_images;
    std::string sino_out;
    bool png = false;

    auto add_common = [&](CLI::App* sub, bool needs_out = true) {
        cfg_src.attach(*sub);
        auto* o = sub->add_option("--out", out_path, "output path (array-file stem or directory)");
        if (needs_out)
            o->required();
    };

    auto* phantom = app.add_subcommand("phantom", "draw a random ellipse phantom and its ground-truth image");
    add_common(phantom);
    phantom->add_option("--seed", seed, "phantom seed (default suite.seed)");
    phantom->add_option("--truncating", truncating, "place anatomy outside the physical FOV (default suite.truncating)");

    auto* project = app.add_subcommand("project", "virtual-detector sinogram of a phantom (analytic) or an image");
    add_common(project);
    auto* proj_src = project->add_option("--phantom", phantom_path, "phantom JSON (closed-form line integrals)");
    project->add_option("--image", image_path, "image array file (discrete forward projection)")->excludes(proj_src);

    auto* trunc = app.add_subcommand("truncate", "restrict a sinogram to the physical detector");
    add_common(trunc);
    trunc->add_option("--in", in_path, "input sinogram")->required();

    auto* noise = app.add_subcommand("noise", "Poisson noise on measured channels");
    add_common(noise);
    noise->add_option("--in", in_path, "input sinogram")->required();
    noise->add_option("--seed", seed, "noise seed (default noise.seed)");

    auto* fbp = app.add_subcommand("fbp", "filtered back-projection");
    add_common(fbp);
    fbp->add_option("--in", in_path, "input sinogram")->required();

    auto* wce = app.add_subcommand("wce", "water cylinder extrapolation followed by FBP");
    add_common(wce);
    wce->add_option("--in", in_path, "input sinogram")->required();
    wce->add_option("--sinogram-out", sino_out, "also save the extrapolated sinogram");

    auto* wtv = app.add_subcommand("wtv", "SART + reweighted TV from measured data only");
    add_common(wtv);
    wtv->add_option("--in", in_path, "input sinogram")->required();

    auto* dcr_cmd = app.add_subcommand("dcr", "data-consistent reconstruction with a prior image");
    add_common(dcr_cmd);
    dcr_cmd->add_option("--in", in_path, "measured (truncated) sinogram")->required();
    dcr_cmd->add_option("--prior", prior_path, "prior image array file")->required();

    auto* dataset = app.add_subcommand("dataset", "training/test triples (f_WCE, reference, artifact)");
    add_common(dataset);
    dataset->add_option("--n-train", n_train, "training triples (default dataset.n_train)");
    dataset->add_option("--n-test", n_test, "test triples (default dataset.n_test)");
    dataset->add_option("--seed", seed, "dataset seed (default suite.seed)");

    auto* evaluate = app.add_subcommand("evaluate", "RMSE in FOV, whole-body RMSE and SSIM against a reference");
    add_common(evaluate, false);
    evaluate->add_option("--reference", reference_path, "ground-truth image")->required();
    evaluate->add_option("images", eval_images, "images to score, as name=path or path")->required();

    auto* pipeline = app.add_subcommand("pipeline", "simulate the phantom suite and compare methods");
    add_common(pipeline);
    pipeline->add_option("--methods", methods_arg, "comma-separated subset of fbp,wce,wtv,prior,unet,dcr");
    pipeline->add_option("--prior-dir", prior_dir, "learned priors case_NNNN.json (required by unet)");
    pipeline->add_option("--seed", seed, "suite seed (default suite.seed)");
    pipeline->add_flag("--png", png, "export windowed PNGs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        dcr::PipelineConfig cfg = cfg_src.load();
        const dcr::ImageGrid grid = cfg.image_grid();
        const dcr::FanBeamGeometry geo = cfg.fan_beam();

        if (phantom->parsed()) {
            const std::uint64_t s = seed.value_or(cfg.suite.seed);
            const auto ph = dcr::sample_phantom(s, truncating.value_or(cfg.suite.truncating),
                                                dcr::PhantomBounds::from(geo, grid));
            fs::create_directories(out_path);
            dcr::io::detail::write_text(fs::path(out_path) / "phantom.json", json(ph).dump(2) + "\n");
            dcr::io::save_image(fs::path(out_path) / "reference", dcr::rasterize(ph, grid),
                                {{"command", "phantom"}, {"seed", s}});
        } else if (project->parsed()) {
            dcr::Sinogram sino;
            if (!phantom_path.empty()) {
                std::ifstream in(phantom_path);
                if (!in)
                    throw dcr::DataError("cannot open " + phantom_path);
                json j;
                try {
                    j = json::parse(in);
                } catch (const json::exception& e) {
                    throw dcr::DataError(phantom_path + ": " + e.what());
                }
                sino = dcr::analytic_sinogram(j.get<dcr::EllipsePhantom>(), geo);
            } else if (!image_path.empty()) {
                sino = dcr::forward_project(dcr::to_unit(dcr::io::load_image(image_path), dcr::Unit::MuPerMm), geo);
            } else {
                throw dcr::ConfigError("project: give --phantom or --image");
            }
            dcr::io::save_sinogram(out_path, sino, provenance("project", cfg));
        } else if (trunc->parsed()) {
            dcr::io::save_sinogram(out_path, dcr::truncate(dcr::io::load_sinogram(in_path)), provenance("truncate", cfg));
        } else if (noise->parsed()) {
            dcr::NoiseModel model{cfg.noise.i0, seed.value_or(cfg.noise.rng_seed)};
            json prov = provenance("noise", cfg);
            prov["seed"] = model.rng_seed;
            dcr::io::save_sinogram(out_path, dcr::add_poisson_noise(dcr::io::load_sinogram(in_path), model), prov);
        } else if (fbp->parsed()) {
            dcr::io::save_image(out_path, dcr::fbp_reconstruct(dcr::io::load_sinogram(in_path), grid),
                                provenance("fbp", cfg));
        } else if (wce->parsed()) {
            const dcr::Sinogram ext = dcr::wce_extrapolate(dcr::io::load_sinogram(in_path));
            if (!sino_out.empty())
                dcr::io::save_sinogram(sino_out, ext, provenance("wce", cfg));
            dcr::io::save_image(out_path, dcr::fbp_reconstruct(ext, grid), provenance("wce", cfg));
        } else if (wtv->parsed()) {
            dcr::io::save_image(out_path, dcr::wtv_reconstruct(dcr::io::load_sinogram(in_path), grid, cfg.recon),
                                provenance("wtv", cfg));
        } else if (dcr_cmd->parsed()) {
            const dcr::Image prior = dcr::io::load_image(prior_path);
            dcr::require_same_grid(prior.grid, grid, "dcr prior");
            dcr::io::save_image(out_path, dcr::dcr_reconstruct(dcr::io::load_sinogram(in_path), prior, cfg.recon),
                                provenance("dcr", cfg));
        } else if (dataset->parsed()) {
            const auto entries = dcr::make_dataset(cfg, n_train.value_or(cfg.dataset.n_train),
                                                   n_test.value_or(cfg.dataset.n_test), seed.value_or(cfg.suite.seed),
                                                   out_path);
            std::cout << "wrote " << entries.size() << " triples to " << out_path << "\n";
        } else if (evaluate->parsed()) {
            const dcr::Image ref = dcr::to_unit(dcr::io::load_image(reference_path), dcr::Unit::HU);
            const dcr::Mask fov = dcr::fov_mask(geo, ref.grid, false);
            const dcr::Mask body = dcr::body_mask(ref);
            dcr::EvalReport report;
            for (const auto& item : eval_images) {
                const auto eq = item.find('=');
                const std::string name = eq == std::string::npos ? dcr::io::stem_of(item).filename().string()
                                                                 : item.substr(0, eq);
                const std::string path = eq == std::string::npos ? item : item.substr(eq + 1);
                const dcr::Image img = dcr::to_unit(dcr::io::load_image(path), dcr::Unit::HU);
                report.summary.push_back(dcr::evaluate_image(name, img, ref, fov, body));
            }
            report.per_case.push_back(report.summary);
            const std::string table = dcr::report_table(report);
            std::cout << table;
            if (!out_path.empty()) {
                dcr::io::detail::write_text(fs::path(out_path) / "report.json",
                                            dcr::report_to_json(report, cfg).dump(2) + "\n");
                dcr::io::detail::write_text(fs::path(out_path) / "report.txt", table);
            }
        } else if (pipeline->parsed()) {
            if (seed)
                cfg.suite.seed = *seed;
            cfg.png = cfg.png || png;
            dcr::PipelineOptions opt;
            opt.methods = split_list(methods_arg);
            opt.out_dir = fs::path(out_path);
            if (!prior_dir.empty())
                opt.prior_dir = fs::path(prior_dir);
            const dcr::EvalReport report = dcr::run_pipeline(cfg, opt);
            std::cout << dcr::report_table(report);
        }
    } catch (const dcr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const dcr::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
