#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcr/core.hpp"
#include "dcr/png.hpp"
#include "dcr/recon.hpp"
#include "dcr/simulate.hpp"

namespace dcr {

struct GridConfig {
    int nx = 256;
    int ny = 256;
    double dx = 1.25;
    double dy = 1.25;
};

struct GeometryConfig {
    double sdd = 1200.0;
    double sid = 600.0;
    int n_views = 360;
    int n_det = 600;
    int n_det_virtual = 1000;
    double det_spacing = 1.0;
};

struct PriorConfig {
    double blur_sigma_px = 5.0;
    double noise_hu = 30.0;
    std::uint64_t seed = 0;
};

struct SuiteConfig {
    int n_phantoms = 20;
    std::uint64_t seed = 1000;
    bool truncating = true;
};

struct DatasetConfig {
    int n_train = 425;
    int n_test = 25;
};

/// Every tunable of the pipeline; defaults reproduce the reference scanner and reconstruction setup.
struct PipelineConfig {
    GridConfig grid;
    GeometryConfig geometry;
    NoiseModel noise;
    ReconConfig recon;
    PriorConfig prior;
    SuiteConfig suite;
    DatasetConfig dataset;
    bool png = false;
    io::Window window;

    ImageGrid image_grid() const { return ImageGrid(grid.nx, grid.ny, grid.dx, grid.dy); }
    FanBeamGeometry fan_beam() const {
        return FanBeamGeometry::full_scan(geometry.sdd, geometry.sid, geometry.n_views, geometry.n_det,
                                          geometry.n_det_virtual, geometry.det_spacing);
    }

    void validate() const {
        const ImageGrid g = image_grid();
        const FanBeamGeometry fb = fan_beam();
        if (g.bounding_radius() >= fb.sid || g.bounding_radius() >= fb.sdd - fb.sid)
            throw ConfigError("config: image grid does not fit between source and detector");
        noise.validate();
        recon.validate();
        if (recon.n_outer < 1)
            throw ConfigError("config: recon.n_outer must be at least 1");
        if (!(prior.blur_sigma_px >= 0.0) || !(prior.noise_hu >= 0.0))
            throw ConfigError("config: prior blur and noise must be nonnegative");
        if (suite.n_phantoms < 1)
            throw ConfigError("config: suite.n_phantoms must be positive");
        if (dataset.n_train < 1 || dataset.n_test < 1)
            throw ConfigError("config: dataset sizes must be positive");
        if (!(window.hi > window.lo))
            throw ConfigError("config: window upper bound must exceed lower bound");
    }
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    using nlohmann::json;
    return json{
        {"grid", {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"dx", c.grid.dx}, {"dy", c.grid.dy}}},
        {"geometry",
         {{"sdd", c.geometry.sdd},
          {"sid", c.geometry.sid},
          {"n_views", c.geometry.n_views},
          {"n_det", c.geometry.n_det},
          {"n_det_virtual", c.geometry.n_det_virtual},
          {"det_spacing", c.geometry.det_spacing}}},
        {"noise", {{"i0", c.noise.i0}, {"seed", c.noise.rng_seed}}},
        {"recon",
         {{"e1", c.recon.e1},
          {"e2", c.recon.e2},
          {"epsilon_tv", c.recon.epsilon_tv},
          {"n_outer", c.recon.n_outer},
          {"n_tv_steps", c.recon.n_tv_steps},
          {"sart_relaxation", c.recon.sart_relaxation},
          {"tv_step_ratio", c.recon.tv_step_ratio},
          {"smoothing_fraction", c.recon.smoothing_fraction},
          {"max_backtracks", c.recon.max_backtracks}}},
        {"prior", {{"blur_sigma_px", c.prior.blur_sigma_px}, {"noise_hu", c.prior.noise_hu}, {"seed", c.prior.seed}}},
        {"suite", {{"n_phantoms", c.suite.n_phantoms}, {"seed", c.suite.seed}, {"truncating", c.suite.truncating}}},
        {"dataset", {{"n_train", c.dataset.n_train}, {"n_test", c.dataset.n_test}}},
        {"output", {{"png", c.png}, {"window", {c.window.lo, c.window.hi}}}}};
}

namespace detail {

template <class T>
void read_key(const nlohmann::json& section, const char* key, T& out, const std::string& where) {
    if (!section.contains(key))
        return;
    try {
        out = section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: " + where + "." + key + " has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& j, const nlohmann::json& reference, const std::string& where) {
    if (!j.is_object())
        throw ConfigError("config: " + (where.empty() ? std::string("document") : where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!reference.contains(it.key()))
            throw ConfigError("config: unknown key '" + path + "'");
        if (reference.at(it.key()).is_object())
            reject_unknown(it.value(), reference.at(it.key()), path);
    }
}

}  // namespace detail

/// Overlays a JSON document on the defaults; unknown keys and out-of-range values are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c = {}) {
    detail::reject_unknown(j, config_to_json(c), "");
    auto sec = [&](const char* name) { return j.contains(name) ? j.at(name) : nlohmann::json::object(); };
    const auto grid = sec("grid"), geo = sec("geometry"), noise = sec("noise"), recon = sec("recon"),
               prior = sec("prior"), suite = sec("suite"), dataset = sec("dataset"), output = sec("output");
    detail::read_key(grid, "nx", c.grid.nx, "grid");
    detail::read_key(grid, "ny", c.grid.ny, "grid");
    detail::read_key(grid, "dx", c.grid.dx, "grid");
    detail::read_key(grid, "dy", c.grid.dy, "grid");
    detail::read_key(geo, "sdd", c.geometry.sdd, "geometry");
    detail::read_key(geo, "sid", c.geometry.sid, "geometry");
    detail::read_key(geo, "n_views", c.geometry.n_views, "geometry");
    detail::read_key(geo, "n_det", c.geometry.n_det, "geometry");
    detail::read_key(geo, "n_det_virtual", c.geometry.n_det_virtual, "geometry");
    detail::read_key(geo, "det_spacing", c.geometry.det_spacing, "geometry");
    detail::read_key(noise, "i0", c.noise.i0, "noise");
    detail::read_key(noise, "seed", c.noise.rng_seed, "noise");
    detail::read_key(recon, "e1", c.recon.e1, "recon");
    detail::read_key(recon, "e2", c.recon.e2, "recon");
    detail::read_key(recon, "epsilon_tv", c.recon.epsilon_tv, "recon");
    detail::read_key(recon, "n_outer", c.recon.n_outer, "recon");
    detail::read_key(recon, "n_tv_steps", c.recon.n_tv_steps, "recon");
    detail::read_key(recon, "sart_relaxation", c.recon.sart_relaxation, "recon");
    detail::read_key(recon, "tv_step_ratio", c.recon.tv_step_ratio, "recon");
    detail::read_key(recon, "smoothing_fraction", c.recon.smoothing_fraction, "recon");
    detail::read_key(recon, "max_backtracks", c.recon.max_backtracks, "recon");
    detail::read_key(prior, "blur_sigma_px", c.prior.blur_sigma_px, "prior");
    detail::read_key(prior, "noise_hu", c.prior.noise_hu, "prior");
    detail::read_key(prior, "seed", c.prior.seed, "prior");
    detail::read_key(suite, "n_phantoms", c.suite.n_phantoms, "suite");
    detail::read_key(suite, "seed", c.suite.seed, "suite");
    detail::read_key(suite, "truncating", c.suite.truncating, "suite");
    detail::read_key(dataset, "n_train", c.dataset.n_train, "dataset");
    detail::read_key(dataset, "n_test", c.dataset.n_test, "dataset");
    detail::read_key(output, "png", c.png, "output");
    if (output.contains("window")) {
        std::vector<double> w;
        detail::read_key(output, "window", w, "output");
        if (w.size() != 2)
            throw ConfigError("config: output.window must be [lo, hi]");
        c.window = {w[0], w[1]};
    }
    c.validate();
    return c;
}

}  // namespace dcr
