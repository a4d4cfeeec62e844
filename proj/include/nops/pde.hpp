#pragma once

#include <complex>
#include <vector>

#include "nops/grid_field.hpp"
#include "nops/sparse.hpp"

namespace nops {

/// Discretization of -div(a grad u) = f with zero Dirichlet data on the unit
/// square: 5-point flux stencil with harmonic face averaging, boundary rows
/// eliminated. Unknowns are the (H-2)x(W-2) interior nodes, row-major.
struct DarcySystem {
    CsrMatrix<double> matrix;  // SPD
    int grid_h = 0, grid_w = 0;
    double spacing = 0.0;
};

DarcySystem assemble_darcy(const GridField& a);

/// Interior values of a full-grid scalar field, in the Darcy unknown order.
std::vector<double> interior_values(const GridField& f);

/// Embeds an interior solution vector into a full grid with zero boundary.
GridField embed_interior(const std::vector<double>& u_int, int h, int w);

enum class HelmholtzBc { Robin, Dirichlet };

/// -Delta u - k(x)^2 u = f with either the first-order absorbing boundary
/// (d_n u - i k u = 0, ghost-point elimination) or pinned zero boundary
/// values (verification mode). Unknowns are all H*W nodes.
struct HelmholtzSystem {
    CsrMatrix<std::complex<double>> matrix;
    std::vector<std::complex<double>> rhs;
    int grid_h = 0, grid_w = 0;
    double spacing = 0.0;
    HelmholtzBc bc = HelmholtzBc::Robin;
};

HelmholtzSystem assemble_helmholtz(const GridField& k, const GridField& f, HelmholtzBc bc);

struct LuSolution {
    GridField u;      // complex
    double residual;  // ||Ax-b||/||b|| recomputed after the solve
};

/// Direct banded LU solve of the (indefinite) Helmholtz system.
LuSolution solve_sparse_lu(const HelmholtzSystem& sys);

}  // namespace nops
