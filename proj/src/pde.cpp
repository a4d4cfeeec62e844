#include "nops/pde.hpp"

#include <string>
#include <tuple>

namespace nops {

namespace {
using Cplx = std::complex<double>;
}

DarcySystem assemble_darcy(const GridField& a) {
    if (a.kind != FieldKind::RealScalar)
        throw argument_error("assemble_darcy: coefficient must be a real scalar field");
    const int H = a.height(), W = a.width();
    if (H < 3 || W < 3) throw dimension_error("assemble_darcy: grid too small");
    for (double v : a.values.data)
        if (v <= 0.0) throw argument_error("assemble_darcy: coefficient must be strictly positive");

    const double h = a.spacing;
    const double inv_h2 = 1.0 / (h * h);
    const int hi = H - 2, wi = W - 2;  // interior extent
    auto idx = [wi](int i, int j) { return (i - 1) * wi + (j - 1); };
    auto harmonic = [](double x, double y) { return 2.0 * x * y / (x + y); };

    std::vector<std::tuple<int, int, double>> trip;
    trip.reserve(static_cast<std::size_t>(hi) * wi * 5);
    for (int i = 1; i <= hi; ++i) {
        for (int j = 1; j <= wi; ++j) {
            const double ac = a.at(0, i, j);
            double diag = 0.0;
            const int di[4] = {-1, 1, 0, 0};
            const int dj[4] = {0, 0, -1, 1};
            for (int s = 0; s < 4; ++s) {
                const int ni = i + di[s], nj = j + dj[s];
                const double face = harmonic(ac, a.at(0, ni, nj)) * inv_h2;
                diag += face;
                // boundary neighbors hold u = 0: their face contribution stays
                // on the diagonal only
                if (ni >= 1 && ni <= hi && nj >= 1 && nj <= wi)
                    trip.emplace_back(idx(i, j), idx(ni, nj), -face);
            }
            trip.emplace_back(idx(i, j), idx(i, j), diag);
        }
    }

    DarcySystem sys;
    sys.matrix = CsrMatrix<double>::from_triplets(hi * wi, std::move(trip));
    sys.grid_h = H;
    sys.grid_w = W;
    sys.spacing = h;
    return sys;
}

std::vector<double> interior_values(const GridField& f) {
    const int H = f.height(), W = f.width();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(H - 2) * (W - 2));
    for (int i = 1; i <= H - 2; ++i)
        for (int j = 1; j <= W - 2; ++j) out.push_back(f.at(0, i, j));
    return out;
}

GridField embed_interior(const std::vector<double>& u_int, int h, int w) {
    if (static_cast<int>(u_int.size()) != (h - 2) * (w - 2))
        throw dimension_error("embed_interior: size mismatch");
    GridField u = GridField::zeros(FieldKind::RealScalar, h, w);
    std::size_t p = 0;
    for (int i = 1; i <= h - 2; ++i)
        for (int j = 1; j <= w - 2; ++j) u.at(0, i, j) = u_int[p++];
    return u;
}

HelmholtzSystem assemble_helmholtz(const GridField& k, const GridField& f, HelmholtzBc bc) {
    if (k.kind != FieldKind::RealScalar)
        throw argument_error("assemble_helmholtz: wavenumber must be a real scalar field");
    if (f.kind != FieldKind::Complex)
        throw argument_error("assemble_helmholtz: source must be a complex field");
    const int H = k.height(), W = k.width();
    if (f.height() != H || f.width() != W)
        throw dimension_error("assemble_helmholtz: k and f grids differ");
    for (double v : k.values.data)
        if (v <= 0.0) throw argument_error("assemble_helmholtz: wavenumber must be positive");

    const double h = k.spacing;
    const double inv_h2 = 1.0 / (h * h);
    auto idx = [W](int i, int j) { return i * W + j; };

    std::vector<std::tuple<int, int, Cplx>> trip;
    std::vector<Cplx> rhs(static_cast<std::size_t>(H) * W);
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            const bool on_bnd = i == 0 || i == H - 1 || j == 0 || j == W - 1;
            const double kc = k.at(0, i, j);
            if (on_bnd && bc == HelmholtzBc::Dirichlet) {
                trip.emplace_back(idx(i, j), idx(i, j), Cplx(1.0, 0.0));
                rhs[idx(i, j)] = 0.0;
                continue;
            }
            // 5-point -Delta - k^2; at boundary nodes missing neighbors are
            // ghosts eliminated through d_n u = i k u (first order):
            // ghost = u * (1 + i k h).
            int missing = 0;
            const int di[4] = {-1, 1, 0, 0};
            const int dj[4] = {0, 0, -1, 1};
            for (int s = 0; s < 4; ++s) {
                const int ni = i + di[s], nj = j + dj[s];
                if (ni < 0 || ni >= H || nj < 0 || nj >= W) {
                    ++missing;
                    continue;
                }
                trip.emplace_back(idx(i, j), idx(ni, nj), Cplx(-inv_h2, 0.0));
            }
            Cplx diag = Cplx(4.0 * inv_h2 - kc * kc, 0.0);
            diag -= static_cast<double>(missing) * Cplx(1.0, kc * h) * inv_h2;
            trip.emplace_back(idx(i, j), idx(i, j), diag);
            rhs[idx(i, j)] = f.cplx(i, j);
        }
    }

    HelmholtzSystem sys;
    sys.matrix = CsrMatrix<Cplx>::from_triplets(H * W, std::move(trip));
    sys.rhs = std::move(rhs);
    sys.grid_h = H;
    sys.grid_w = W;
    sys.spacing = h;
    sys.bc = bc;
    return sys;
}

LuSolution solve_sparse_lu(const HelmholtzSystem& sys) {
    std::vector<Cplx> x;
    try {
        BandedLU<Cplx> lu(sys.matrix);
        x = lu.solve(sys.rhs);
    } catch (const Error& e) {
        throw numeric_error("solve_sparse_lu: singular system on " + std::to_string(sys.grid_h) +
                            "x" + std::to_string(sys.grid_w) +
                            " grid (wavenumber configuration appears resonant): " + e.what());
    }

    LuSolution sol;
    sol.residual = sys.matrix.relative_residual(x, sys.rhs);
    DenseArray vals = DenseArray::zeros({2, sys.grid_h, sys.grid_w});
    for (int i = 0; i < sys.grid_h; ++i)
        for (int j = 0; j < sys.grid_w; ++j) {
            const Cplx v = x[static_cast<std::size_t>(i) * sys.grid_w + j];
            vals.at3(0, i, j) = v.real();
            vals.at3(1, i, j) = v.imag();
        }
    sol.u = GridField::complex(std::move(vals));
    return sol;
}

}  // namespace nops
