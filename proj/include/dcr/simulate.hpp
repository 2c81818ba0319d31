#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "dcr/core.hpp"
#include "dcr/parallel.hpp"

namespace dcr {

struct NoiseModel {
    double i0 = 1e5;  // photons per detector pixel before attenuation
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(i0 > 0.0) || !std::isfinite(i0))
            throw ConfigError("NoiseModel: i0 must be positive and finite");
    }
};

/// Restricts a virtual-detector sinogram to the physical detector: outside channels are zeroed and flagged.
inline Sinogram truncate(const Sinogram& sinogram) {
    Sinogram out = sinogram;
    const FanBeamGeometry& g = sinogram.geometry;
    for (int c = 0; c < g.n_det_virtual; ++c) {
        if (g.is_measured(c))
            continue;
        out.measured_mask[static_cast<std::size_t>(c)] = false;
        for (int v = 0; v < g.n_views; ++v)
            out.at(v, c) = 0.0;
    }
    return out;
}

/**
 * Poisson counting noise on measured channels: N ~ Poisson(i0 exp(-p)),
 * p_noisy = -ln(max(N, 1) / i0). Each view draws from its own stream
 * seeded by (seed, view), so the realization is independent of scheduling.
 */
inline Sinogram add_poisson_noise(const Sinogram& sinogram, const NoiseModel& model) {
    model.validate();
    for (double p : sinogram.values)
        if (p < 0.0 || !std::isfinite(p))
            throw DataError("add_poisson_noise: line integrals must be finite and nonnegative");
    Sinogram out = sinogram;
    const int n_ch = sinogram.n_channels();
    parallel_for(static_cast<std::size_t>(sinogram.n_views()), [&](std::size_t v) {
        std::seed_seq seq{static_cast<std::uint32_t>(model.rng_seed & 0xffffffffu),
                          static_cast<std::uint32_t>(model.rng_seed >> 32), static_cast<std::uint32_t>(v),
                          0x5eedu};
        std::mt19937_64 rng(seq);
        for (int c = 0; c < n_ch; ++c) {
            if (!sinogram.measured_mask[static_cast<std::size_t>(c)])
                continue;
            const double p = sinogram.at(static_cast<int>(v), c);
            const double mean = model.i0 * std::exp(-p);
            std::poisson_distribution<long long> counts(mean);
            const long long n = std::max<long long>(counts(rng), 1);
            out.at(static_cast<int>(v), c) = -std::log(static_cast<double>(n) / model.i0);
        }
    });
    return out;
}

}  // namespace dcr
