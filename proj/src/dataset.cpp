#include "nops/dataset.hpp"

#include <cmath>
#include <cstdio>

#include "nops/container.hpp"
#include "nops/pde.hpp"
#include "nops/rng.hpp"

namespace nops {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

GridField constant_field(int grid, double value) {
    GridField f = GridField::zeros(FieldKind::RealScalar, grid, grid);
    for (double& v : f.values.data) v = value;
    return f;
}

double darcy_residual(const Sample& s) {
    const GridField& a = *s.input("a");
    const GridField& f = *s.input("f");
    const DarcySystem sys = assemble_darcy(a);
    const std::vector<double> rhs = interior_values(f);
    const std::vector<double> u = interior_values(s.target);
    return sys.matrix.relative_residual(u, rhs);
}

double helmholtz_residual(const Sample& s) {
    const GridField& k = *s.input("k");
    const GridField& f = *s.input("f");
    const HelmholtzSystem sys = assemble_helmholtz(k, f, HelmholtzBc::Robin);
    std::vector<std::complex<double>> u;
    u.reserve(s.target.values.size() / 2);
    for (int i = 0; i < s.target.height(); ++i)
        for (int j = 0; j < s.target.width(); ++j) u.push_back(s.target.cplx(i, j));
    return sys.matrix.relative_residual(u, sys.rhs);
}

}  // namespace

std::string problem_name(ProblemKind p) {
    return p == ProblemKind::Darcy ? "darcy" : "helmholtz";
}

ProblemKind problem_from_name(const std::string& s) {
    if (s == "darcy") return ProblemKind::Darcy;
    if (s == "helmholtz") return ProblemKind::Helmholtz;
    throw argument_error("unknown problem kind '" + s + "'");
}

const GridField& Dataset::conditioning(std::size_t i) const {
    const char* name = problem == ProblemKind::Darcy ? "a" : "k";
    const GridField* f = samples[i].input(name);
    if (!f) throw data_error("dataset: sample missing input '" + std::string(name) + "'");
    return *f;
}

Dataset generate_dataset(const DatasetGenConfig& cfg) {
    if (cfg.grid < 8) throw argument_error("generate_dataset: grid must be at least 8");
    if (cfg.n_samples < 0) throw argument_error("generate_dataset: negative sample count");

    Dataset ds;
    ds.problem = cfg.problem;
    ds.grid = cfg.grid;
    ds.spacing = 1.0 / static_cast<double>(cfg.grid - 1);

    std::vector<std::uint64_t> aborted_seeds;
    for (int s = 0; s < cfg.n_samples; ++s) {
        const std::uint64_t seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(s));
        try {
            Sample sample;
            if (cfg.problem == ProblemKind::Darcy) {
                const GridField g = sample_grf(cfg.grf, cfg.grid, seed);
                const GridField a = threshold_coefficient(g, cfg.grf.a_low, cfg.grf.a_high);
                const GridField f = constant_field(cfg.grid, 1.0);
                const DarcySystem sys = assemble_darcy(a);
                const CgResult cg = solve_cg(sys.matrix, interior_values(f), cfg.cg_tol, 100000);
                sample.inputs.emplace_back("a", a);
                sample.inputs.emplace_back("f", f);
                sample.target = embed_interior(cg.x, cfg.grid, cfg.grid);
            } else {
                const GridField k = sample_wavenumber_field(cfg.grid, cfg.wavenumber, seed);
                Rng src_rng(derive_seed(seed, 1));
                const double sx = src_rng.next_uniform(0.2, 0.8);
                const double sy = src_rng.next_uniform(0.2, 0.8);
                const GridField f = point_source(cfg.grid, sx, sy, {1.0, 0.0});
                const HelmholtzSystem sys = assemble_helmholtz(k, f, HelmholtzBc::Robin);
                LuSolution sol = solve_sparse_lu(sys);
                if (sol.residual > cfg.lu_residual_tol)
                    throw numeric_error("generate_dataset: LU residual " + fmt_double(sol.residual) +
                                        " exceeds " + fmt_double(cfg.lu_residual_tol));
                sample.inputs.emplace_back("k", k);
                sample.inputs.emplace_back("f", f);
                sample.target = std::move(sol.u);
            }
            ds.samples.push_back(std::move(sample));
        } catch (const Error&) {
            aborted_seeds.push_back(seed);
        }
    }

    if (100 * aborted_seeds.size() > static_cast<std::size_t>(cfg.n_samples))
        throw numeric_error("generate_dataset: " + std::to_string(aborted_seeds.size()) + " of " +
                            std::to_string(cfg.n_samples) + " samples aborted (>1%)");

    ds.metadata.emplace_back("kind", "dataset");
    ds.metadata.emplace_back("problem", problem_name(cfg.problem));
    ds.metadata.emplace_back("n_samples", std::to_string(ds.samples.size()));
    ds.metadata.emplace_back("grid", std::to_string(cfg.grid));
    ds.metadata.emplace_back("spacing", fmt_double(ds.spacing));
    ds.metadata.emplace_back("base_seed", std::to_string(cfg.base_seed));
    ds.metadata.emplace_back("cg_tol", fmt_double(cfg.cg_tol));
    ds.metadata.emplace_back("lu_residual_tol", fmt_double(cfg.lu_residual_tol));
    ds.metadata.emplace_back("audit_tol", fmt_double(cfg.audit_tol));
    if (cfg.problem == ProblemKind::Darcy) {
        ds.metadata.emplace_back("grf_alpha", fmt_double(cfg.grf.alpha));
        ds.metadata.emplace_back("grf_tau2", fmt_double(cfg.grf.tau2));
        ds.metadata.emplace_back("grf_a_low", fmt_double(cfg.grf.a_low));
        ds.metadata.emplace_back("grf_a_high", fmt_double(cfg.grf.a_high));
        ds.metadata.emplace_back("darcy_f", "constant 1");
    } else {
        ds.metadata.emplace_back("wn_background_k", fmt_double(cfg.wavenumber.background_k));
        ds.metadata.emplace_back("wn_inclusions", std::to_string(cfg.wavenumber.n_inclusions));
        ds.metadata.emplace_back("wn_contrast_lo", fmt_double(cfg.wavenumber.contrast_lo));
        ds.metadata.emplace_back("wn_contrast_hi", fmt_double(cfg.wavenumber.contrast_hi));
        ds.metadata.emplace_back("source", "point, uniform in [0.2,0.8]^2, amplitude 1");
    }
    std::string aborted;
    for (std::size_t i = 0; i < aborted_seeds.size(); ++i) {
        if (i) aborted += ",";
        aborted += std::to_string(aborted_seeds[i]);
    }
    ds.metadata.emplace_back("aborted", std::to_string(aborted_seeds.size()));
    if (!aborted.empty()) ds.metadata.emplace_back("aborted_seeds", aborted);
    return ds;
}

AuditResult audit_dataset(const Dataset& ds, double tol) {
    AuditResult res;
    for (const Sample& s : ds.samples) {
        const double r = ds.problem == ProblemKind::Darcy ? darcy_residual(s)
                                                          : helmholtz_residual(s);
        res.max_residual = std::max(res.max_residual, r);
        ++res.checked;
    }
    res.pass = res.max_residual <= tol;
    return res;
}

void write_dataset(const std::string& path, const Dataset& ds) {
    std::vector<ContainerEntry> entries;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const std::string prefix = "s" + std::to_string(i) + ".";
        for (const auto& [name, field] : ds.samples[i].inputs)
            entries.push_back({prefix + name, field.values});
        entries.push_back({prefix + "u", ds.samples[i].target.values});
    }
    write_container(path, entries, format_metadata(ds.metadata));
}

Dataset read_dataset(const std::string& path) {
    const Container c = read_container(path);
    Dataset ds;
    ds.metadata = parse_metadata(c.metadata);
    if (!metadata_has(ds.metadata, "kind") || metadata_get(ds.metadata, "kind") != "dataset")
        throw data_error("read_dataset: " + path + " is not a dataset container");
    ds.problem = problem_from_name(metadata_get(ds.metadata, "problem"));
    ds.grid = std::stoi(metadata_get(ds.metadata, "grid"));
    ds.spacing = std::stod(metadata_get(ds.metadata, "spacing"));
    const int n = std::stoi(metadata_get(ds.metadata, "n_samples"));

    auto as_field = [](const DenseArray& a) {
        return a.shape[0] == 2 ? GridField::complex(a) : GridField::real(a);
    };
    for (int i = 0; i < n; ++i) {
        const std::string prefix = "s" + std::to_string(i) + ".";
        Sample sample;
        for (const auto& e : c.entries) {
            if (e.name.rfind(prefix, 0) != 0) continue;
            const std::string field_name = e.name.substr(prefix.size());
            if (e.array.shape.size() != 3 || e.array.shape[1] != ds.grid ||
                e.array.shape[2] != ds.grid)
                throw data_error("read_dataset: entry " + e.name + " has shape " +
                                 shape_str(e.array.shape) + ", expected grid " +
                                 std::to_string(ds.grid));
            if (field_name == "u")
                sample.target = as_field(e.array);
            else
                sample.inputs.emplace_back(field_name, as_field(e.array));
        }
        if (sample.target.values.size() == 0)
            throw data_error("read_dataset: sample " + std::to_string(i) + " missing target");
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

}  // namespace nops
