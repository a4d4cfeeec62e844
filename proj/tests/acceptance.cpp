// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fails. Criteria 6-8 share one toy Darcy train-and-unroll run whose outputs
// (checkpoints, log, manifest) land in a scratch directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "nops/checkpoint.hpp"
#include "nops/container.hpp"
#include "nops/manifest.hpp"
#include "nops/metrics.hpp"
#include "nops/mg.hpp"
#include "nops/pde.hpp"
#include "nops/training.hpp"

using namespace nops;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    std::printf("%s criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double now_s() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

DenseArray random_arr(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
                      double hi = 1.0) {
    DenseArray a = DenseArray::zeros(std::move(shape));
    Rng rng(seed);
    for (double& v : a.data) v = rng.next_uniform(lo, hi);
    return a;
}

GridField random_field(FieldKind kind, int grid, std::uint64_t seed, double lo, double hi) {
    GridField f = GridField::zeros(kind, grid, grid);
    Rng rng(seed);
    for (double& v : f.values.data) v = rng.next_uniform(lo, hi);
    return f;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient audit
// ---------------------------------------------------------------------------

void criterion1() {
    const double t0 = now_s();
    double worst = 0.0;
    bool pass = true;

    {
        ModelConfig mc;
        mc.backbone = BackboneKind::Conv;
        mc.channels = 4;
        mc.conv_layers = 2;
        mc.depth = 2;
        mc.init_seed = 101;
        SelfComposingOp model(mc);
        const GridField k = random_field(FieldKind::RealScalar, 16, 102, 0.5, 1.5);
        const GridField target = random_field(FieldKind::RealScalar, 16, 103, -1.0, 1.0);
        const auto report_conv = grad_check(
            [&] { return compute_loss(LossKind::Mse, model.forward(k, nullptr), target, k.spacing); },
            model.named_params(), 1e-4);
        pass = pass && report_conv.pass;
        worst = std::max(worst, report_conv.max_rel_err);
    }
    {
        ModelConfig mc;
        mc.backbone = BackboneKind::Mgv;
        mc.channels = 3;
        mc.grid = 16;
        mc.mg_levels = 2;
        mc.depth = 2;
        mc.init_seed = 104;
        SelfComposingOp model(mc);
        const GridField k = random_field(FieldKind::RealScalar, 16, 105, 0.5, 1.5);
        const GridField target = random_field(FieldKind::RealScalar, 16, 106, -1.0, 1.0);
        const auto report_mgv = grad_check(
            [&] { return compute_loss(LossKind::Mse, model.forward(k, nullptr), target, k.spacing); },
            model.named_params(), 1e-4);
        pass = pass && report_mgv.pass;
        worst = std::max(worst, report_mgv.max_rel_err);
    }

    const double elapsed = now_s() - t0;
    pass = pass && elapsed < 120.0;
    report(1, pass, "gradient audit of conv and 2-level mgv backbones at 16x16, tol 1e-4",
           "max rel err " + fmt(worst) + ", " + fmt(elapsed) + "s");
}

// ---------------------------------------------------------------------------
// criterion 2: classical multigrid equivalence (textbook loop oracle)
// ---------------------------------------------------------------------------

using Grid = std::vector<std::vector<double>>;

Grid zeros_grid(int n) { return Grid(n, std::vector<double>(n, 0.0)); }

double at0(const Grid& g, int i, int j) {
    const int n = static_cast<int>(g.size());
    return (i < 0 || i >= n || j < 0 || j >= n) ? 0.0 : g[i][j];
}

Grid apply_poisson(const Grid& u, double h) {
    const int n = static_cast<int>(u.size());
    Grid out = zeros_grid(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out[i][j] = (4.0 * u[i][j] - at0(u, i - 1, j) - at0(u, i + 1, j) - at0(u, i, j - 1) -
                         at0(u, i, j + 1)) /
                        (h * h);
    return out;
}

Grid poisson_residual(const Grid& u, const Grid& f, double h) {
    const Grid au = apply_poisson(u, h);
    Grid r = zeros_grid(static_cast<int>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < u.size(); ++j) r[i][j] = f[i][j] - au[i][j];
    return r;
}

void jacobi(Grid& u, const Grid& r, double h, double omega) {
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < u.size(); ++j) u[i][j] += omega * h * h / 4.0 * r[i][j];
}

Grid full_weighting(const Grid& fine) {
    const int nc = static_cast<int>(fine.size()) / 2;
    static const double w[3] = {0.25, 0.5, 0.25};
    Grid coarse = zeros_grid(nc);
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < nc; ++j) {
            double acc = 0.0;
            for (int a = -1; a <= 1; ++a)
                for (int b = -1; b <= 1; ++b)
                    acc += w[a + 1] * w[b + 1] * at0(fine, 2 * i + a, 2 * j + b);
            coarse[i][j] = acc;
        }
    return coarse;
}

Grid bilinear(const Grid& coarse, int nf) {
    const int nc = static_cast<int>(coarse.size());
    Grid fine = zeros_grid(nf);
    auto cv = [&](int i, int j) {
        return (i < 0 || i >= nc || j < 0 || j >= nc) ? 0.0 : coarse[i][j];
    };
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j) {
            const int ci = i / 2, cj = j / 2;
            if (i % 2 == 0 && j % 2 == 0)
                fine[i][j] = cv(ci, cj);
            else if (i % 2 == 1 && j % 2 == 0)
                fine[i][j] = 0.5 * (cv(ci, cj) + cv(ci + 1, cj));
            else if (i % 2 == 0)
                fine[i][j] = 0.5 * (cv(ci, cj) + cv(ci, cj + 1));
            else
                fine[i][j] = 0.25 * (cv(ci, cj) + cv(ci + 1, cj) + cv(ci, cj + 1) +
                                     cv(ci + 1, cj + 1));
        }
    return fine;
}

Grid oracle_cycle(int level, Grid u, const Grid& f, const std::vector<int>& sizes, double omega,
                  int m_coarse) {
    const double h = std::pow(2.0, level);
    const Grid r0 = poisson_residual(u, f, h);
    jacobi(u, r0, h, omega);
    if (level + 1 < static_cast<int>(sizes.size())) {
        const Grid r2h = full_weighting(r0);
        Grid e = zeros_grid(sizes[level + 1]);
        if (level + 2 == static_cast<int>(sizes.size())) {
            const double hc = std::pow(2.0, level + 1);
            for (int t = 0; t < m_coarse; ++t) jacobi(e, poisson_residual(e, r2h, hc), hc, omega);
        } else {
            e = oracle_cycle(level + 1, e, r2h, sizes, omega, m_coarse);
        }
        const Grid corr = bilinear(e, sizes[level]);
        for (int i = 0; i < sizes[level]; ++i)
            for (int j = 0; j < sizes[level]; ++j) u[i][j] += corr[i][j];
    }
    jacobi(u, poisson_residual(u, f, h), 1.0 * std::pow(2.0, level), omega);
    return u;
}

void set_unit_gate(AdaConvParams& p) {
    for (double& v : p.mlp1_w.mutable_value().data) v = 0.0;
    for (double& v : p.mlp1_b.mutable_value().data) v = 0.0;
    for (double& v : p.mlp2_w.mutable_value().data) v = 0.0;
    for (double& v : p.mlp2_b.mutable_value().data) v = 1.0;
}

void set_kernel(Variable& v, const std::vector<double>& vals) {
    v.mutable_value().data = vals;
}

MgBackbone classical_backbone(int grid, double omega) {
    MgConfig cfg;
    cfg.channels = 1;
    cfg.grid = grid;
    MgBackbone mg(cfg, 321);
    for (int l = 0; l < mg.levels(); ++l) {
        set_unit_gate(mg.op_params(l));
        set_unit_gate(mg.smoother_params(l));
        const double h = std::pow(2.0, l);
        const double ih2 = 1.0 / (h * h);
        set_kernel(mg.op_params(l).filter_x_w,
                   {0.0, -ih2, 0.0, -ih2, 4.0 * ih2, -ih2, 0.0, -ih2, 0.0});
        set_kernel(mg.smoother_params(l).filter_x_w,
                   {0.0, 0.0, 0.0, 0.0, omega * h * h / 4.0, 0.0, 0.0, 0.0, 0.0});
    }
    for (int l = 0; l + 1 < mg.levels(); ++l) {
        set_kernel(mg.restriction_kernel(l),
                   {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 4.0 / 16, 2.0 / 16, 1.0 / 16,
                    2.0 / 16, 1.0 / 16});
        set_kernel(mg.prolongation_kernel(l), {0.25, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 0.25});
    }
    return mg;
}

void criterion2() {
    const double omega = 0.8;
    MgBackbone mg = classical_backbone(32, omega);

    Grid f = zeros_grid(32);
    Rng rng(322);
    for (auto& row : f)
        for (double& v : row) v = rng.next_uniform(-1.0, 1.0);
    DenseArray fv = DenseArray::zeros({1, 32, 32});
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) fv.at3(0, i, j) = f[i][j];

    const Variable kf(random_arr({1, 32, 32}, 323));
    const std::vector<Variable> k_feats = mg.restrict_k(kf);
    const Variable u1 =
        mg.v_cycle(0, Variable(DenseArray::zeros({1, 32, 32})), k_feats, Variable(fv));

    const Grid u_ref = oracle_cycle(0, zeros_grid(32), f, {32, 16, 8}, omega, 3);

    double diff = 0.0;
    Grid u1g = zeros_grid(32);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            u1g[i][j] = u1.value().at3(0, i, j);
            diff = std::max(diff, std::abs(u1g[i][j] - u_ref[i][j]));
        }

    auto norm_of = [](const Grid& g) {
        double s = 0.0;
        for (const auto& row : g)
            for (double v : row) s += v * v;
        return std::sqrt(s);
    };
    const double r1 = norm_of(poisson_residual(u1g, f, 1.0));
    const double r0 = norm_of(f);
    const double factor = r0 / r1;

    const bool pass = diff < 1e-10 && factor >= 5.0;
    report(2, pass, "hand-set classical V-cycle matches textbook multigrid on 32x32 Poisson",
           "max deviation " + fmt(diff) + ", residual reduction " + fmt(factor) + "x");
}

// ---------------------------------------------------------------------------
// criterion 3: linearity and fixed-point suite
// ---------------------------------------------------------------------------

void criterion3() {
    bool pass = true;
    std::string detail;

    // A and S exactly linear in the second argument
    {
        MgConfig cfg;
        cfg.channels = 2;
        cfg.grid = 16;
        MgBackbone mg(cfg, 331);
        const Variable k(random_arr({2, 16, 16}, 332));
        const DenseArray u1 = random_arr({2, 16, 16}, 333);
        const DenseArray u2 = random_arr({2, 16, 16}, 334);
        const double a = 1.3, b = -0.7;
        DenseArray combo = DenseArray::zeros({2, 16, 16});
        for (std::size_t i = 0; i < combo.data.size(); ++i)
            combo.data[i] = a * u1.data[i] + b * u2.data[i];
        double worst = 0.0;
        for (const bool smoother : {false, true}) {
            auto op = [&](const DenseArray& x) {
                return smoother ? mg.smooth(0, k, Variable(x)) : mg.pde_apply(0, k, Variable(x));
            };
            const Variable y1 = op(u1), y2 = op(u2), yc = op(combo);
            for (std::size_t i = 0; i < yc.value().data.size(); ++i)
                worst = std::max(worst, std::abs(yc.value().data[i] - (a * y1.value().data[i] +
                                                                       b * y2.value().data[i])));
        }
        pass = pass && worst < 1e-12;
        detail += "linearity " + fmt(worst);
    }

    // zero-residual fixed point
    {
        MgConfig cfg;
        cfg.channels = 2;
        cfg.grid = 16;
        MgBackbone mg(cfg, 335);
        const Variable kf(random_arr({2, 16, 16}, 336));
        const std::vector<Variable> k_feats = mg.restrict_k(kf);
        const Variable u(random_arr({2, 16, 16}, 337));
        const Variable f = mg.pde_apply(0, k_feats[0], u);
        const Variable out = mg.v_cycle(0, u, k_feats, f);
        double worst = 0.0;
        for (std::size_t i = 0; i < u.value().data.size(); ++i)
            worst = std::max(worst, std::abs(out.value().data[i] - u.value().data[i]));
        pass = pass && worst < 1e-12;
        detail += ", fixed point " + fmt(worst);
    }

    // conv / transposed-conv adjoint identity
    {
        double worst = 0.0;
        for (int t = 0; t < 5; ++t) {
            const DenseArray x = random_arr({2, 9, 9}, 340 + t);
            const DenseArray kk = random_arr({3, 2, 3, 3}, 350 + t);
            const Variable yv = conv2d(Variable(x), Variable(kk), 2, 1);
            const DenseArray y = random_arr(yv.shape(), 360 + t);
            const Variable xt = conv2d_transpose(Variable(y), Variable(kk), 2, 1);
            double lhs = 0.0, rhs = 0.0;
            for (std::size_t i = 0; i < y.data.size(); ++i) lhs += yv.value().data[i] * y.data[i];
            for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * xt.value().data[i];
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
        }
        pass = pass && worst < 1e-12;
        detail += ", adjoint " + fmt(worst);
    }

    report(3, pass, "linearity, fixed-point and adjoint identities at 1e-12", detail);
}

// ---------------------------------------------------------------------------
// criterion 4: oracle correctness
// ---------------------------------------------------------------------------

double exact_sine(double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); }

double darcy_error(int grid) {
    GridField a = GridField::zeros(FieldKind::RealScalar, grid, grid);
    for (double& v : a.values.data) v = 1.0;
    const DarcySystem sys = assemble_darcy(a);
    const double h = sys.spacing;
    GridField f = GridField::zeros(FieldKind::RealScalar, grid, grid);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) f.at(0, i, j) = 2.0 * kPi * kPi * exact_sine(j * h, i * h);
    const CgResult cg = solve_cg(sys.matrix, interior_values(f), 1e-12, 200000);
    const GridField u = embed_interior(cg.x, grid, grid);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double ue = exact_sine(j * h, i * h);
            num += (u.at(0, i, j) - ue) * (u.at(0, i, j) - ue);
            den += ue * ue;
        }
    return std::sqrt(num / den);
}

double helmholtz_error(int grid, double kc) {
    GridField k = GridField::zeros(FieldKind::RealScalar, grid, grid);
    for (double& v : k.values.data) v = kc;
    const double h = 1.0 / (grid - 1);
    GridField f = GridField::zeros(FieldKind::Complex, grid, grid);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
            f.at(0, i, j) = (2.0 * kPi * kPi - kc * kc) * exact_sine(j * h, i * h);
    const LuSolution sol = solve_sparse_lu(assemble_helmholtz(k, f, HelmholtzBc::Dirichlet));
    double num = 0.0, den = 0.0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double ue = exact_sine(j * h, i * h);
            num += std::norm(sol.u.cplx(i, j) - std::complex<double>(ue, 0.0));
            den += ue * ue;
        }
    return std::sqrt(num / den);
}

void criterion4() {
    bool pass = true;
    std::string detail;

    const double d64 = darcy_error(64);
    const double d128 = darcy_error(128);
    const double darcy_ratio = d64 / d128;
    pass = pass && d64 < 1e-3 && darcy_ratio > 3.4 && darcy_ratio < 4.6;
    detail += "darcy e64 " + fmt(d64) + " ratio " + fmt(darcy_ratio);

    const double h64 = helmholtz_error(64, 2.5);
    const double h128 = helmholtz_error(128, 2.5);
    const double helm_ratio = h64 / h128;
    pass = pass && h64 < 1e-2 && helm_ratio > 3.4 && helm_ratio < 4.6;
    detail += ", helmholtz e64 " + fmt(h64) + " ratio " + fmt(helm_ratio);

    // robin self-convergence at order >= 1
    auto robin_solve = [](int grid) {
        GridField k = GridField::zeros(FieldKind::RealScalar, grid, grid);
        for (double& v : k.values.data) v = 4.0;
        const double h = 1.0 / (grid - 1);
        GridField f = GridField::zeros(FieldKind::Complex, grid, grid);
        for (int i = 0; i < grid; ++i)
            for (int j = 0; j < grid; ++j) {
                const double x = j * h, y = i * h;
                const double d2 = (x - 0.4) * (x - 0.4) + (y - 0.55) * (y - 0.55);
                f.at(0, i, j) = std::exp(-d2 / 0.02);
                f.at(1, i, j) = 0.5 * std::exp(-d2 / 0.03);
            }
        return solve_sparse_lu(assemble_helmholtz(k, f, HelmholtzBc::Robin)).u;
    };
    const GridField u33 = robin_solve(33), u65 = robin_solve(65), u129 = robin_solve(129);
    auto coarse_diff = [](const GridField& c, const GridField& fgrid) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < c.height(); ++i)
            for (int j = 0; j < c.width(); ++j) {
                num += std::norm(c.cplx(i, j) - fgrid.cplx(2 * i, 2 * j));
                den += std::norm(fgrid.cplx(2 * i, 2 * j));
            }
        return std::sqrt(num / den);
    };
    const double robin_ratio = coarse_diff(u33, u65) / coarse_diff(u65, u129);
    pass = pass && robin_ratio >= 1.7;
    detail += ", robin ratio " + fmt(robin_ratio);

    // residual audit of freshly generated datasets
    DatasetGenConfig dc;
    dc.problem = ProblemKind::Darcy;
    dc.n_samples = 8;
    dc.grid = 32;
    dc.base_seed = 341;
    const AuditResult darcy_audit = audit_dataset(generate_dataset(dc), 1e-8);
    DatasetGenConfig hc;
    hc.problem = ProblemKind::Helmholtz;
    hc.n_samples = 4;
    hc.grid = 32;
    hc.base_seed = 342;
    const AuditResult helm_audit = audit_dataset(generate_dataset(hc), 1e-8);
    pass = pass && darcy_audit.pass && helm_audit.pass;
    detail += ", audits " + fmt(darcy_audit.max_residual) + " / " + fmt(helm_audit.max_residual);

    report(4, pass, "classical solver correctness and dataset residual audits", detail);
}

// ---------------------------------------------------------------------------
// criterion 5: weight sharing across depths
// ---------------------------------------------------------------------------

void criterion5() {
    bool pass = true;
    std::string detail;

    for (const BackboneKind kind : {BackboneKind::Conv, BackboneKind::Mgv}) {
        ModelConfig mc;
        mc.backbone = kind;
        mc.channels = 4;
        mc.grid = 16;
        mc.mg_levels = 2;
        mc.init_seed = 351;
        mc.depth = 1;
        SelfComposingOp d1(mc);
        mc.depth = 5;
        SelfComposingOp d5(mc);
        pass = pass && d1.param_count() == d5.param_count();
        std::set<std::string> n1, n5;
        for (const auto& [n, p] : d1.named_params()) n1.insert(n);
        for (const auto& [n, p] : d5.named_params()) n5.insert(n);
        pass = pass && n1 == n5;
        if (kind == BackboneKind::Conv) detail += "conv params " + std::to_string(d1.param_count());
        if (kind == BackboneKind::Mgv) detail += ", mgv params " + std::to_string(d1.param_count());
    }

    // a depth-(l-1) checkpoint transfers bit-exactly into a depth-l model
    const fs::path dir = fs::temp_directory_path() / "nops_acceptance";
    fs::create_directories(dir);
    ModelConfig mc;
    mc.backbone = BackboneKind::Conv;
    mc.channels = 4;
    mc.depth = 4;
    mc.init_seed = 352;
    SelfComposingOp src(mc);
    const std::string path = (dir / "transfer.ckpt.nods").string();
    save_checkpoint(path, src);
    mc.depth = 5;
    SelfComposingOp dst(mc);
    apply_checkpoint_params(dst, load_checkpoint(path));
    const auto ps = src.named_params();
    const auto pd = dst.named_params();
    for (std::size_t i = 0; i < ps.size(); ++i)
        pass = pass && ps[i].second.value().data == pd[i].second.value().data;
    detail += ", transfer bit-exact";

    report(5, pass, "parameter count and name set invariant in depth; stage transfer bit-exact",
           detail);
}

// ---------------------------------------------------------------------------
// criteria 6-8: the toy Darcy train-and-unroll run
// ---------------------------------------------------------------------------

struct ToyRun {
    std::vector<StageResult> stages;
    double val_rel_l2_depth5 = 0.0;
    double wall_minutes = 0.0;
    fs::path out_dir;
};

ToyRun toy_run() {
    const fs::path dir = fs::temp_directory_path() / "nops_acceptance";
    fs::create_directories(dir);

    DatasetGenConfig dc;
    dc.problem = ProblemKind::Darcy;
    dc.n_samples = 250;  // 200 train / 50 held out after the split
    dc.grid = 32;
    dc.base_seed = 1001;
    const Dataset data = generate_dataset(dc);
    const std::string data_path = (dir / "toy_darcy.nods").string();
    write_dataset(data_path, data);

    ModelConfig mc;
    mc.backbone = BackboneKind::Mgv;
    mc.channels = 8;
    mc.grid = 32;
    mc.depth = 1;
    mc.init_seed = derive_seed(2002, 0x1217);

    TrainConfig tc;
    tc.loss = LossKind::Mse;
    tc.adam.lr = 1e-3;
    tc.batch_size = 16;
    tc.epochs_per_stage = 40;
    tc.patience = 40;  // fixed-length stages keep the transition measurements comparable
    tc.schedule = {1, 2, 3, 4, 5};
    tc.seed = 2002;
    tc.validation_fraction = 0.2;

    SelfComposingOp model(mc);
    const double t0 = now_s();
    std::string log = history_csv_header() + "\n";
    ToyRun run;
    run.out_dir = dir;
    const auto on_stage = [&](int, const StageResult& stage, SelfComposingOp& m, TrainState& ts) {
        for (const auto& row : stage.history) log += history_csv_row(row) + "\n";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", stage.final_train_loss);
        save_checkpoint((dir / ("ckpt_depth" + std::to_string(stage.depth) + ".nods")).string(), m,
                        &ts, {{"final_train_loss", buf}});
    };
    run.stages = train_and_unroll(model, data, tc, on_stage);
    run.wall_minutes = (now_s() - t0) / 60.0;

    std::ofstream(dir / "toy_train_log.csv") << log;

    const DataSplit split = split_dataset(data.samples.size(), tc.validation_fraction, tc.seed);
    auto [val_l2, val_h1] = validate_model(model, data, split.val);
    run.val_rel_l2_depth5 = val_l2;

    RunManifest manifest("acceptance-toy-run");
    manifest.add("problem", "darcy");
    manifest.add("n_samples", std::to_string(dc.n_samples));
    manifest.add("train_samples", std::to_string(split.train.size()));
    manifest.add("held_out_samples", std::to_string(split.val.size()));
    manifest.add("grid", "32");
    manifest.add("dataset_seed", std::to_string(dc.base_seed));
    manifest.add("train_seed", std::to_string(tc.seed));
    manifest.add("backbone", "mgv");
    manifest.add("channels", std::to_string(mc.channels));
    manifest.add("stages", "1,2,3,4,5");
    manifest.add("epochs_per_stage", std::to_string(tc.epochs_per_stage));
    manifest.add("lr", "0.001");
    manifest.add("loss", loss_name(tc.loss));
    manifest.add("held_out_rel_l2_threshold", "0.10");
    manifest.add("held_out_rel_l2", fmt(run.val_rel_l2_depth5));
    manifest.add("wall_minutes", fmt(run.wall_minutes));
    manifest.add_input(data_path);
    for (int d = 1; d <= 5; ++d)
        manifest.add_output((dir / ("ckpt_depth" + std::to_string(d) + ".nods")).string());
    manifest.write((dir / "acceptance.manifest").string());
    return run;
}

void criteria678(const ToyRun& run) {
    // criterion 6: depth monotonicity of final training losses, runtime bound
    {
        bool pass = run.stages.size() == 5;
        std::string detail = "final losses";
        for (std::size_t s = 0; s < run.stages.size(); ++s) {
            detail += " " + fmt(run.stages[s].final_train_loss);
            if (s > 0)
                pass = pass && run.stages[s].final_train_loss <=
                                   1.05 * run.stages[s - 1].final_train_loss;
        }
        pass = pass && run.wall_minutes < 30.0;
        detail += ", " + fmt(run.wall_minutes) + " min";
        report(6, pass, "train-and-unroll [1..5] final loss non-increasing (5% slack)", detail);
    }

    // criterion 7: loss rises at each transition, recovers within 30% of the
    // previous stage's epoch count
    {
        bool pass = true;
        std::string detail;
        for (std::size_t s = 1; s < run.stages.size(); ++s) {
            const StageResult& prev = run.stages[s - 1];
            const StageResult& cur = run.stages[s];
            const double prev_final = prev.final_train_loss;
            const double post_transition = cur.history.front().train_loss;  // epoch-0 row
            const bool rises = post_transition > prev_final;
            const int prev_epochs = prev.history.back().epoch;
            const int budget = static_cast<int>(std::floor(0.3 * prev_epochs + 1e-12));
            int recovered_at = -1;
            for (const auto& row : cur.history) {
                if (row.epoch > 0 && row.train_loss < prev_final) {
                    recovered_at = row.epoch;
                    break;
                }
            }
            const bool recovers = recovered_at > 0 && recovered_at <= budget;
            pass = pass && rises && recovers;
            detail += (s > 1 ? "; " : "") + std::to_string(prev.depth) + "->" +
                      std::to_string(cur.depth) + " x" + fmt(post_transition / prev_final) +
                      " rec@" + std::to_string(recovered_at) + "/" + std::to_string(budget);
        }
        report(7, pass, "loss rises at each depth transition and recovers within 30% of epochs",
               detail);
    }

    // criterion 8: held-out relative L2 of the depth-5 model
    {
        const bool pass = run.val_rel_l2_depth5 < 0.10;
        report(8, pass, "depth-5 held-out relative L2 below 0.10",
               "rel_l2 " + fmt(run.val_rel_l2_depth5));
    }
}

// ---------------------------------------------------------------------------
// criterion 9: serialization and determinism
// ---------------------------------------------------------------------------

void criterion9() {
    const fs::path dir = fs::temp_directory_path() / "nops_acceptance";
    fs::create_directories(dir);
    bool pass = true;
    std::string detail;

    // container round trip
    {
        std::vector<ContainerEntry> entries = {{"x", random_arr({3, 5, 7}, 391)},
                                               {"y", random_arr({11}, 392)}};
        const std::string path = (dir / "roundtrip.nods").string();
        write_container(path, entries, "kind: test\n");
        const Container c = read_container(path);
        pass = pass && c.entries.size() == 2 && c.entries[0].array.data == entries[0].array.data &&
               c.entries[1].array.data == entries[1].array.data;
        detail += "container round trip";
    }

    // checkpoint reload reproduces forward outputs bitwise
    {
        ModelConfig mc;
        mc.backbone = BackboneKind::Mgv;
        mc.channels = 3;
        mc.grid = 16;
        mc.depth = 2;
        mc.init_seed = 393;
        SelfComposingOp model(mc);
        const GridField k = random_field(FieldKind::RealScalar, 16, 394, 0.5, 1.5);
        const GridField before = model.forward_field(k, nullptr);
        const std::string path = (dir / "fwd.ckpt.nods").string();
        save_checkpoint(path, model);
        SelfComposingOp restored = model_from_checkpoint(load_checkpoint(path));
        const GridField after = restored.forward_field(k, nullptr);
        pass = pass && before.values.data == after.values.data;
        detail += ", checkpoint forward bitwise";
    }

    // identical seeds -> identical dataset files and training trajectories
    {
        DatasetGenConfig dc;
        dc.problem = ProblemKind::Darcy;
        dc.n_samples = 6;
        dc.grid = 16;
        dc.base_seed = 395;
        const std::string p1 = (dir / "det1.nods").string();
        const std::string p2 = (dir / "det2.nods").string();
        write_dataset(p1, generate_dataset(dc));
        write_dataset(p2, generate_dataset(dc));
        auto slurp = [](const std::string& p) {
            std::ifstream f(p, std::ios::binary);
            return std::string((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
        };
        pass = pass && slurp(p1) == slurp(p2);

        const Dataset data = read_dataset(p1);
        TrainConfig tc;
        tc.loss = LossKind::Mse;
        tc.epochs_per_stage = 2;
        tc.batch_size = 4;
        tc.seed = 396;
        tc.schedule = {1, 2};
        auto run_params = [&] {
            ModelConfig mc;
            mc.backbone = BackboneKind::Conv;
            mc.channels = 4;
            mc.init_seed = 397;
            SelfComposingOp model(mc);
            train_and_unroll(model, data, tc);
            std::vector<DenseArray> out;
            for (const auto& [n, p] : model.named_params()) out.push_back(p.value());
            return out;
        };
        const auto a = run_params();
        const auto b = run_params();
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].data == b[i].data;
        pass = pass && same;
        detail += ", seeded dataset and training bitwise";
    }

    report(9, pass, "bit-exact serialization and seeded reproducibility", detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    const ToyRun run = toy_run();
    criteria678(run);
    criterion9();
    std::printf("%s\n", g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT");
    return g_failures == 0 ? 0 : 1;
}
