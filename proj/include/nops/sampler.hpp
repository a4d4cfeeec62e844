#pragma once

#include <complex>
#include <cstdint>

#include "nops/grid_field.hpp"

namespace nops {

/// Gaussian random field sampler configuration: draws white noise w and
/// returns the normalized (-Delta_h + tau2 I)^(-alpha) w with a zero-Neumann
/// Laplacian. alpha must be a positive integer (repeated sparse solves).
struct GrfSpec {
    double alpha = 2.0;
    double tau2 = 9.0;
    double a_low = 3.0;
    double a_high = 12.0;
    std::uint64_t seed = 0;  // base seed; callers pass per-sample seeds
};

GridField sample_grf(const GrfSpec& spec, int grid, std::uint64_t seed);

/// Piecewise-constant coefficient: a_high where g >= 0, else a_low.
GridField threshold_coefficient(const GridField& g, double a_low, double a_high);

struct WavenumberSpec {
    double background_k = 10.65;
    int n_inclusions = 4;
    double contrast_lo = 0.8;
    double contrast_hi = 1.2;
};

/// Background wavenumber modulated by smooth Gaussian-bump inclusions with
/// random centers, radii and contrasts. The modulation is clamped to
/// [min(1,lo), max(1,hi)], so bk*lo <= k <= bk*hi and k stays positive.
GridField sample_wavenumber_field(int grid, const WavenumberSpec& spec, std::uint64_t seed);

/// Mollified point source: the amplitude is spread over the 3x3 stencil
/// weights outer([1/4,1/2,1/4]) around the nearest grid node and scaled by
/// 1/h^2, so the discrete integral h^2 * sum f equals the amplitude.
GridField point_source(int grid, double x, double y, std::complex<double> amplitude);

}  // namespace nops
