#include "nops/sampler.hpp"

#include <cmath>
#include <tuple>
#include <vector>

#include "nops/rng.hpp"
#include "nops/sparse.hpp"

namespace nops {

namespace {

/// Zero-Neumann Laplacian (graph form: every grid edge contributes +-1/h^2)
/// shifted by tau2 on the diagonal. Symmetric positive definite for tau2 > 0.
CsrMatrix<double> neumann_laplacian_shifted(int H, int W, double h, double tau2) {
    const double inv_h2 = 1.0 / (h * h);
    std::vector<std::tuple<int, int, double>> trip;
    trip.reserve(static_cast<std::size_t>(H) * W * 5);
    auto idx = [W](int i, int j) { return i * W + j; };
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            double diag = tau2;
            if (i > 0) {
                diag += inv_h2;
                trip.emplace_back(idx(i, j), idx(i - 1, j), -inv_h2);
            }
            if (i < H - 1) {
                diag += inv_h2;
                trip.emplace_back(idx(i, j), idx(i + 1, j), -inv_h2);
            }
            if (j > 0) {
                diag += inv_h2;
                trip.emplace_back(idx(i, j), idx(i, j - 1), -inv_h2);
            }
            if (j < W - 1) {
                diag += inv_h2;
                trip.emplace_back(idx(i, j), idx(i, j + 1), -inv_h2);
            }
            trip.emplace_back(idx(i, j), idx(i, j), diag);
        }
    return CsrMatrix<double>::from_triplets(H * W, std::move(trip));
}

}  // namespace

GridField sample_grf(const GrfSpec& spec, int grid, std::uint64_t seed) {
    if (grid < 8) throw argument_error("sample_grf: grid must be at least 8");
    if (spec.alpha < 1.0) throw argument_error("sample_grf: alpha must be >= 1");
    const double rounded = std::round(spec.alpha);
    if (std::abs(spec.alpha - rounded) > 1e-12)
        throw argument_error("sample_grf: alpha must be a positive integer (repeated solves)");
    const int alpha = static_cast<int>(rounded);
    if (spec.tau2 <= 0.0) throw argument_error("sample_grf: tau2 must be positive");

    const int H = grid, W = grid;
    const double h = 1.0 / static_cast<double>(H - 1);
    const std::size_t n = static_cast<std::size_t>(H) * W;

    Rng rng(seed);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = rng.next_normal();

    const CsrMatrix<double> op = neumann_laplacian_shifted(H, W, h, spec.tau2);
    for (int pass = 0; pass < alpha; ++pass) g = solve_cg(op, g, 1e-10, 100000).x;

    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : g) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) throw numeric_error("sample_grf: degenerate (constant) sample");
    const double inv_sd = 1.0 / std::sqrt(var);

    DenseArray vals = DenseArray::zeros({1, H, W});
    for (std::size_t i = 0; i < n; ++i) vals.data[i] = (g[i] - mean) * inv_sd;
    return GridField::real(std::move(vals));
}

GridField threshold_coefficient(const GridField& g, double a_low, double a_high) {
    if (g.kind != FieldKind::RealScalar)
        throw argument_error("threshold_coefficient: field must be real scalar");
    if (a_low <= 0.0) throw argument_error("threshold_coefficient: a_low must be positive");
    if (a_low >= a_high) throw argument_error("threshold_coefficient: requires a_low < a_high");
    GridField a = g;
    for (double& v : a.values.data) v = v >= 0.0 ? a_high : a_low;
    return a;
}

GridField sample_wavenumber_field(int grid, const WavenumberSpec& spec, std::uint64_t seed) {
    if (grid < 2) throw argument_error("sample_wavenumber_field: grid too small");
    if (spec.background_k <= 0.0)
        throw argument_error("sample_wavenumber_field: background_k must be positive");
    if (spec.contrast_lo <= 0.0 || spec.contrast_lo > spec.contrast_hi)
        throw argument_error("sample_wavenumber_field: bad contrast range");
    if (spec.n_inclusions < 0)
        throw argument_error("sample_wavenumber_field: n_inclusions must be non-negative");

    const int H = grid, W = grid;
    const double h = 1.0 / static_cast<double>(H - 1);

    Rng rng(seed);
    struct Bump {
        double cx, cy, r, c;
    };
    std::vector<Bump> bumps;
    bumps.reserve(static_cast<std::size_t>(spec.n_inclusions));
    for (int b = 0; b < spec.n_inclusions; ++b) {
        Bump bump;
        bump.cx = rng.next_uniform(0.15, 0.85);
        bump.cy = rng.next_uniform(0.15, 0.85);
        bump.r = rng.next_uniform(0.05, 0.15);
        bump.c = rng.next_uniform(spec.contrast_lo, spec.contrast_hi);
        bumps.push_back(bump);
    }

    const double m_lo = std::min(1.0, spec.contrast_lo);
    const double m_hi = std::max(1.0, spec.contrast_hi);
    DenseArray vals = DenseArray::zeros({1, H, W});
    for (int i = 0; i < H; ++i) {
        const double y = i * h;
        for (int j = 0; j < W; ++j) {
            const double x = j * h;
            double m = 1.0;
            for (const Bump& b : bumps) {
                const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
                m += (b.c - 1.0) * std::exp(-0.5 * d2 / (b.r * b.r));
            }
            m = std::min(std::max(m, m_lo), m_hi);
            vals.at3(0, i, j) = spec.background_k * m;
        }
    }
    return GridField::real(std::move(vals));
}

GridField point_source(int grid, double x, double y, std::complex<double> amplitude) {
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
        throw argument_error("point_source: location outside the unit square");
    const int H = grid, W = grid;
    const double h = 1.0 / static_cast<double>(H - 1);
    const int nj = static_cast<int>(std::lround(x / h));
    const int ni = static_cast<int>(std::lround(y / h));
    if (ni < 1 || ni > H - 2 || nj < 1 || nj > W - 2)
        throw argument_error("point_source: source too close to the boundary for the 3x3 stencil");

    static const double w1d[3] = {0.25, 0.5, 0.25};
    const double inv_h2 = 1.0 / (h * h);
    GridField f = GridField::zeros(FieldKind::Complex, H, W);
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
            const double wgt = w1d[di + 1] * w1d[dj + 1] * inv_h2;
            f.at(0, ni + di, nj + dj) += amplitude.real() * wgt;
            f.at(1, ni + di, nj + dj) += amplitude.imag() * wgt;
        }
    return f;
}

}  // namespace nops
