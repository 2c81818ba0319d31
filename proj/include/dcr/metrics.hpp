#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dcr/core.hpp"

namespace dcr {

inline double rmse(const Image& a, const Image& b, const Mask& mask) {
    require_same_grid(a.grid, b.grid, "rmse");
    require_same_grid(a.grid, mask.grid, "rmse");
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        if (!mask.flags[k])
            continue;
        const double d = a.values[k] - b.values[k];
        s += d * d;
        ++n;
    }
    if (n == 0)
        throw DataError("rmse: empty mask");
    return std::sqrt(s / static_cast<double>(n));
}

namespace detail {

/// 4-connected components of `on`; returns a label image (0 = off) and the component sizes.
inline std::vector<int> label_components(const ImageGrid& g, const std::vector<std::uint8_t>& on,
                                         std::vector<std::size_t>& sizes) {
    std::vector<int> label(g.size(), 0);
    sizes.assign(1, 0);
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < g.size(); ++seed) {
        if (!on[seed] || label[seed])
            continue;
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        stack.push_back(seed);
        label[seed] = id;
        while (!stack.empty()) {
            const std::size_t k = stack.back();
            stack.pop_back();
            ++sizes.back();
            const int i = static_cast<int>(k % static_cast<std::size_t>(g.nx));
            const int j = static_cast<int>(k / static_cast<std::size_t>(g.nx));
            const int ni[4] = {i - 1, i + 1, i, i};
            const int nj[4] = {j, j, j - 1, j + 1};
            for (int q = 0; q < 4; ++q) {
                if (ni[q] < 0 || nj[q] < 0 || ni[q] >= g.nx || nj[q] >= g.ny)
                    continue;
                const std::size_t m = g.index(ni[q], nj[q]);
                if (on[m] && !label[m]) {
                    label[m] = id;
                    stack.push_back(m);
                }
            }
        }
    }
    return label;
}

}  // namespace detail

/// Largest connected region above -500 HU with interior holes filled.
inline Mask body_mask(const Image& reference) {
    if (reference.unit != Unit::HU)
        throw DataError("body_mask: reference must be in HU");
    const ImageGrid& g = reference.grid;
    std::vector<std::uint8_t> on(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        on[k] = reference.values[k] > -500.0 ? 1 : 0;

    std::vector<std::size_t> sizes;
    const std::vector<int> label = detail::label_components(g, on, sizes);
    if (sizes.size() <= 1)
        throw DataError("body_mask: reference contains no body");
    const int best = static_cast<int>(std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());

    // hole filling: background reachable from the border stays background
    std::vector<std::uint8_t> outside(g.size(), 0);
    std::vector<std::size_t> stack;
    auto push = [&](int i, int j) {
        const std::size_t k = g.index(i, j);
        if (label[k] != best && !outside[k]) {
            outside[k] = 1;
            stack.push_back(k);
        }
    };
    for (int i = 0; i < g.nx; ++i) {
        push(i, 0);
        push(i, g.ny - 1);
    }
    for (int j = 0; j < g.ny; ++j) {
        push(0, j);
        push(g.nx - 1, j);
    }
    while (!stack.empty()) {
        const std::size_t k = stack.back();
        stack.pop_back();
        const int i = static_cast<int>(k % static_cast<std::size_t>(g.nx));
        const int j = static_cast<int>(k / static_cast<std::size_t>(g.nx));
        if (i > 0)
            push(i - 1, j);
        if (i + 1 < g.nx)
            push(i + 1, j);
        if (j > 0)
            push(i, j - 1);
        if (j + 1 < g.ny)
            push(i, j + 1);
    }
    Mask m(g);
    for (std::size_t k = 0; k < g.size(); ++k)
        m.flags[k] = outside[k] ? 0 : 1;
    return m;
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 2000.0;  // HU
    double offset = 1000.0;         // added to HU so that air maps to 0
};

namespace detail {

/// Separable Gaussian filtering with the window truncated (and renormalized) at the image border.
inline std::vector<double> gaussian_filter(const ImageGrid& g, const std::vector<double>& in, int window,
                                           double sigma) {
    const int r = window / 2;
    std::vector<double> kernel(static_cast<std::size_t>(2 * r + 1));
    for (int k = -r; k <= r; ++k)
        kernel[static_cast<std::size_t>(k + r)] = std::exp(-0.5 * k * k / (sigma * sigma));
    std::vector<double> tmp(in.size()), out(in.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double s = 0.0, wsum = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int ii = i + k;
                if (ii < 0 || ii >= g.nx)
                    continue;
                const double w = kernel[static_cast<std::size_t>(k + r)];
                s += w * in[g.index(ii, j)];
                wsum += w;
            }
            tmp[g.index(i, j)] = s / wsum;
        }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double s = 0.0, wsum = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int jj = j + k;
                if (jj < 0 || jj >= g.ny)
                    continue;
                const double w = kernel[static_cast<std::size_t>(k + r)];
                s += w * tmp[g.index(i, jj)];
                wsum += w;
            }
            out[g.index(i, j)] = s / wsum;
        }
    return out;
}

}  // namespace detail

/// Per-pixel SSIM index map.
inline std::vector<double> ssim_map(const Image& a, const Image& b, const SsimParams& p = {}) {
    require_same_grid(a.grid, b.grid, "ssim");
    const ImageGrid& g = a.grid;
    const std::size_t n = g.size();
    std::vector<double> sa(n), sb(n), aa(n), bb(n), ab(n);
    for (std::size_t k = 0; k < n; ++k) {
        sa[k] = a.values[k] + p.offset;
        sb[k] = b.values[k] + p.offset;
        aa[k] = sa[k] * sa[k];
        bb[k] = sb[k] * sb[k];
        ab[k] = sa[k] * sb[k];
    }
    const auto mu_a = detail::gaussian_filter(g, sa, p.window, p.sigma);
    const auto mu_b = detail::gaussian_filter(g, sb, p.window, p.sigma);
    const auto e_aa = detail::gaussian_filter(g, aa, p.window, p.sigma);
    const auto e_bb = detail::gaussian_filter(g, bb, p.window, p.sigma);
    const auto e_ab = detail::gaussian_filter(g, ab, p.window, p.sigma);
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    std::vector<double> map(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double va = e_aa[k] - mu_a[k] * mu_a[k];
        const double vb = e_bb[k] - mu_b[k] * mu_b[k];
        const double cov = e_ab[k] - mu_a[k] * mu_b[k];
        map[k] = ((2.0 * mu_a[k] * mu_b[k] + c1) * (2.0 * cov + c2)) /
                 ((mu_a[k] * mu_a[k] + mu_b[k] * mu_b[k] + c1) * (va + vb + c2));
    }
    return map;
}

/// Mean of the SSIM map over the mask.
inline double ssim(const Image& a, const Image& b, const Mask& mask, const SsimParams& p = {}) {
    require_same_grid(a.grid, mask.grid, "ssim");
    const auto map = ssim_map(a, b, p);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < map.size(); ++k)
        if (mask.flags[k]) {
            s += map[k];
            ++n;
        }
    if (n == 0)
        throw DataError("ssim: empty mask");
    return s / static_cast<double>(n);
}

inline double ssim(const Image& a, const Image& b) { return ssim(a, b, Mask(a.grid, true)); }

struct MethodScores {
    std::string method;
    double rmse_fov = 0.0;
    double rmse_body = 0.0;
    double ssim = 0.0;
};

/// Table of methods x {RMSE in FOV, whole-body RMSE, SSIM}, with per-case rows.
struct EvalReport {
    std::vector<MethodScores> summary;               // suite means, one row per method
    std::vector<std::vector<MethodScores>> per_case;  // [case][method]
};

inline MethodScores evaluate_image(const std::string& method, const Image& image, const Image& reference,
                                   const Mask& fov, const Mask& body) {
    return {method, rmse(image, reference, fov), rmse(image, reference, body), ssim(image, reference, body)};
}

}  // namespace dcr
