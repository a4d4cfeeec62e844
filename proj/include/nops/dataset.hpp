#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nops/grid_field.hpp"
#include "nops/sampler.hpp"

namespace nops {

enum class ProblemKind { Darcy, Helmholtz };

std::string problem_name(ProblemKind p);
ProblemKind problem_from_name(const std::string& s);

/// One training pair: named input fields plus the target field.
struct Sample {
    std::vector<std::pair<std::string, GridField>> inputs;
    GridField target;

    const GridField* input(const std::string& name) const {
        for (const auto& [n, f] : inputs)
            if (n == name) return &f;
        return nullptr;
    }
};

struct Dataset {
    ProblemKind problem = ProblemKind::Darcy;
    int grid = 0;
    double spacing = 0.0;
    std::vector<Sample> samples;
    std::vector<std::pair<std::string, std::string>> metadata;

    /// Coefficient/wavenumber input of a sample ("a" for Darcy, "k" for Helmholtz).
    const GridField& conditioning(std::size_t i) const;
    /// Source input, or nullptr when the problem has none stored.
    const GridField* source(std::size_t i) const { return samples[i].input("f"); }
};

struct DatasetGenConfig {
    ProblemKind problem = ProblemKind::Darcy;
    int n_samples = 0;
    int grid = 32;
    std::uint64_t base_seed = 0;
    GrfSpec grf;                 // Darcy coefficient sampler
    WavenumberSpec wavenumber;   // Helmholtz wavenumber sampler
    double cg_tol = 1e-10;
    double lu_residual_tol = 1e-10;
    double audit_tol = 1e-8;
};

/// Draws input fields, solves the classical systems and packages the
/// (inputs, solution) pairs. A sample whose solve fails is dropped and its
/// seed logged in the metadata; the run fails if more than 1% abort.
Dataset generate_dataset(const DatasetGenConfig& cfg);

struct AuditResult {
    double max_residual = 0.0;
    int checked = 0;
    bool pass = false;
};

/// Re-assembles each sample's system from its stored inputs and verifies the
/// stored solution satisfies it to `tol`.
AuditResult audit_dataset(const Dataset& ds, double tol = 1e-8);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

}  // namespace nops
