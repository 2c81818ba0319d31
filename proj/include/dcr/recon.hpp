#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcr/core.hpp"
#include "dcr/projector.hpp"
#include "dcr/tv.hpp"

namespace dcr {

/**
 * Hyperparameters of the SART + reweighted-TV loop.
 *
 * e1 / e2 gate the data sweeps on the relative residuals of the measured and
 * prior-filled channel families. The TV phase takes n_tv_steps normalized
 * descent steps, each starting at tv_step_ratio times the size of the data
 * update of the same outer iteration and halved until the frozen-weight
 * objective does not increase.
 */
struct ReconConfig {
    double e1 = 0.01;
    double e2 = 0.5;
    double epsilon_tv = 5.0;  // HU
    int n_outer = 10;
    int n_tv_steps = 20;
    double sart_relaxation = 0.8;
    double tv_step_ratio = 0.2;
    double smoothing_fraction = 1e-3;  // delta = fraction * dynamic range (HU)
    int max_backtracks = 30;

    void validate() const {
        if (!(e1 >= 0.0) || !(e2 >= 0.0))
            throw ConfigError("ReconConfig: tolerances must be nonnegative");
        if (!(epsilon_tv > 0.0))
            throw ConfigError("ReconConfig: epsilon_tv must be positive");
        if (n_outer < 0 || n_tv_steps < 0)
            throw ConfigError("ReconConfig: iteration counts must be nonnegative");
        if (!(sart_relaxation > 0.0 && sart_relaxation < 2.0))
            throw ConfigError("ReconConfig: sart_relaxation must lie in (0, 2)");
        if (!(tv_step_ratio >= 0.0))
            throw ConfigError("ReconConfig: tv_step_ratio must be nonnegative");
        if (!(smoothing_fraction > 0.0))
            throw ConfigError("ReconConfig: smoothing_fraction must be positive");
        if (max_backtracks < 0)
            throw ConfigError("ReconConfig: max_backtracks must be nonnegative");
    }
};

enum class ChannelSet { Measured, Truncated };

inline ChannelMask channel_mask(const Sinogram& sino, ChannelSet set) {
    return set == ChannelSet::Measured ? sino.measured_mask : invert(sino.measured_mask);
}

/**
 * One SART pass over all views in order. For view v with selected channels
 * S: f += lambda * A_v^T[(p - A_v f) / (A_v 1)] / (A_v^T 1), both
 * normalizations restricted to S. Pixels no selected ray touches keep their value.
 */
inline Image sart_sweep(const Image& f, const Sinogram& sino, const ChannelMask& channels, double relaxation) {
    if (f.unit != Unit::MuPerMm)
        throw DataError("sart_sweep: image must be in mu_per_mm");
    const FanBeamGeometry& g = sino.geometry;
    detail::check_geometry_vs_grid(g, f.grid);
    detail::check_channel_mask(channels, g);
    if (std::none_of(channels.begin(), channels.end(), [](bool b) { return b; }))
        throw DataError("sart_sweep: empty channel set");

    Image out = f;
    const ImageGrid& grid = f.grid;
    std::vector<double> num(grid.size(), 0.0), den(grid.size(), 0.0);
    std::vector<std::size_t> touched;
    std::vector<double> resid(static_cast<std::size_t>(g.n_det_virtual), 0.0);
    double* x = out.values.data();

    for (int v = 0; v < g.n_views; ++v) {
        const Point2 src = g.source(v);
        for (int c = 0; c < g.n_det_virtual; ++c) {
            resid[static_cast<std::size_t>(c)] = 0.0;
            if (!channels[static_cast<std::size_t>(c)])
                continue;
            double proj = 0.0, wsum = 0.0;
            detail::trace_ray(grid, src, g.detector_point(v, c), [&](std::size_t idx, double w) {
                proj += w * x[idx];
                wsum += w;
            });
            if (wsum > 0.0)
                resid[static_cast<std::size_t>(c)] = (sino.at(v, c) - proj) / wsum;
        }
        for (int c = 0; c < g.n_det_virtual; ++c) {
            if (!channels[static_cast<std::size_t>(c)])
                continue;
            const double r = resid[static_cast<std::size_t>(c)];
            detail::trace_ray(grid, src, g.detector_point(v, c), [&](std::size_t idx, double w) {
                if (den[idx] == 0.0)
                    touched.push_back(idx);
                num[idx] += w * r;
                den[idx] += w;
            });
        }
        for (std::size_t idx : touched) {
            x[idx] += relaxation * num[idx] / den[idx];
            num[idx] = 0.0;
            den[idx] = 0.0;
        }
        touched.clear();
    }
    return out;
}

/// ||A_S f - p_S|| / ||p_S|| over a channel family (absolute norm when p_S vanishes).
inline double relative_residual(const Image& f, const Sinogram& target, const ChannelMask& channels) {
    const Sinogram proj = forward_project(f, target.geometry, channels);
    double num = 0.0, den = 0.0;
    const int n = target.n_channels();
    for (int v = 0; v < target.n_views(); ++v)
        for (int c = 0; c < n; ++c) {
            if (!channels[static_cast<std::size_t>(c)])
                continue;
            const double r = proj.at(v, c) - target.at(v, c);
            num += r * r;
            den += target.at(v, c) * target.at(v, c);
        }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/**
 * Complete virtual-detector sinogram: measured channels copied bit-exactly,
 * unmeasured channels filled with the forward projection of the prior.
 * The measurement mask of the input is kept.
 */
inline Sinogram merge_sinograms(const Sinogram& measured, const Image& prior) {
    const Image prior_mu = to_unit(prior, Unit::MuPerMm);
    const ChannelMask truncated = invert(measured.measured_mask);
    const Sinogram filled = forward_project(prior_mu, measured.geometry, truncated);
    Sinogram out = measured;
    for (int v = 0; v < measured.n_views(); ++v)
        for (int c = 0; c < measured.n_channels(); ++c)
            if (truncated[static_cast<std::size_t>(c)])
                out.at(v, c) = filled.at(v, c);
    return out;
}

struct OuterIterationLog {
    double residual_measured = 0.0;
    double residual_truncated = 0.0;
    bool swept_measured = false;
    bool swept_truncated = false;
    double data_step = 0.0;            // ||f after data sweeps - f before||, HU
    std::vector<double> tv_objective;  // frozen-weight objective before the first and after each TV step
};

struct ReconDiagnostics {
    std::vector<OuterIterationLog> iterations;
    double final_residual_measured = 0.0;
};

namespace detail {

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

inline void require_finite(const Image& f, const char* stage, int iteration) {
    if (!f.all_finite())
        throw DataError(std::string("reconstruction diverged: non-finite value after ") + stage +
                        " in outer iteration " + std::to_string(iteration));
}

/**
 * Normalized-gradient descent on the smoothed wTV objective with frozen
 * weights. Returns the objective trace; each accepted step is non-increasing.
 */
inline std::vector<double> tv_descent(Image& hu, const TVWeights& w, double step, const ReconConfig& cfg) {
    const auto [lo, hi] = std::minmax_element(hu.values.begin(), hu.values.end());
    double delta = cfg.smoothing_fraction * (*hi - *lo);
    if (!(delta > 0.0))
        delta = cfg.smoothing_fraction * 1000.0;

    std::vector<double> trace;
    double current = wtv_smoothed(hu, w, delta);
    trace.push_back(current);
    if (!(step > 0.0))
        return trace;

    Image trial = hu;
    for (int s = 0; s < cfg.n_tv_steps; ++s) {
        const Image g = wtv_gradient(hu, w, delta);
        double gnorm = 0.0;
        for (double v : g.values)
            gnorm += v * v;
        gnorm = std::sqrt(gnorm);
        if (gnorm == 0.0)
            break;
        double t = step;
        bool accepted = false;
        for (int b = 0; b <= cfg.max_backtracks; ++b, t *= 0.5) {
            for (std::size_t k = 0; k < hu.values.size(); ++k)
                trial.values[k] = hu.values[k] - t * g.values[k] / gnorm;
            const double next = wtv_smoothed(trial, w, delta);
            if (next <= current) {
                std::swap(hu.values, trial.values);
                if (next > trace.back())
                    throw std::logic_error("tv_descent: objective increased");
                current = next;
                trace.push_back(current);
                accepted = true;
                break;
            }
        }
        if (!accepted)
            break;
    }
    return trace;
}

inline Image reweighted_tv_loop(Image f_mu, const Sinogram& target, bool use_truncated, const ReconConfig& cfg,
                                ReconDiagnostics* diag) {
    const ChannelMask measured = target.measured_mask;
    const ChannelMask truncated = invert(measured);
    const bool have_truncated =
        use_truncated && std::any_of(truncated.begin(), truncated.end(), [](bool b) { return b; });

    for (int n = 1; n <= cfg.n_outer; ++n) {
        OuterIterationLog log;
        const Image hu_prev = mu_to_hu(f_mu);
        const TVWeights weights = tv_weights(hu_prev, cfg.epsilon_tv);

        log.residual_measured = relative_residual(f_mu, target, measured);
        if (log.residual_measured > cfg.e1) {
            f_mu = sart_sweep(f_mu, target, measured, cfg.sart_relaxation);
            log.swept_measured = true;
            require_finite(f_mu, "measured-channel SART", n);
        }
        if (have_truncated) {
            log.residual_truncated = relative_residual(f_mu, target, truncated);
            if (log.residual_truncated > cfg.e2) {
                f_mu = sart_sweep(f_mu, target, truncated, cfg.sart_relaxation);
                log.swept_truncated = true;
                require_finite(f_mu, "truncated-channel SART", n);
            }
        }

        Image hu = mu_to_hu(f_mu);
        log.data_step = l2_distance(hu.values, hu_prev.values);
        log.tv_objective = tv_descent(hu, weights, cfg.tv_step_ratio * log.data_step, cfg);
        f_mu = hu_to_mu(hu);
        require_finite(f_mu, "TV descent", n);
        if (diag)
            diag->iterations.push_back(std::move(log));
    }
    if (diag)
        diag->final_residual_measured = relative_residual(f_mu, target, measured);
    return f_mu;
}

}  // namespace detail

/**
 * Data-consistent reconstruction: unmeasured channels are filled from the
 * forward-projected prior, the prior initializes the iterate, and each outer
 * iteration runs tolerance-gated SART sweeps on the measured and the
 * prior-filled channels followed by reweighted-TV descent.
 */
inline Image dcr_reconstruct(const Sinogram& measured, const Image& prior, const ReconConfig& cfg,
                             ReconDiagnostics* diag = nullptr) {
    cfg.validate();
    if (!prior.all_finite())
        throw DataError("dcr_reconstruct: prior contains non-finite values");
    const Sinogram merged = merge_sinograms(measured, prior);
    Image f = detail::reweighted_tv_loop(to_unit(prior, Unit::MuPerMm), merged, true, cfg, diag);
    return mu_to_hu(f);
}

/// Same loop without a prior: zero initialization, measured channels only.
inline Image wtv_reconstruct(const Sinogram& measured, const ImageGrid& grid, const ReconConfig& cfg,
                             ReconDiagnostics* diag = nullptr) {
    cfg.validate();
    Image f = detail::reweighted_tv_loop(Image(grid, Unit::MuPerMm, 0.0), measured, false, cfg, diag);
    return mu_to_hu(f);
}

}  // namespace dcr
