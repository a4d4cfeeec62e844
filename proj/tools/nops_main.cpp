// Command-line front end: data generation, training, evaluation and
// verification runs, each reproducible from the manifest written next to its
// outputs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nops/checkpoint.hpp"
#include "nops/container.hpp"
#include "nops/dataset.hpp"
#include "nops/manifest.hpp"
#include "nops/metrics.hpp"
#include "nops/mg.hpp"
#include "nops/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitArgument = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<int> parse_stages(const std::string& s) {
    std::vector<int> stages;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        stages.push_back(std::stoi(tok));
    }
    if (stages.empty()) throw nops::argument_error("empty stage schedule '" + s + "'");
    return stages;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw nops::data_error("cannot open " + path);
    f << text;
}

struct GenDataArgs {
    std::string problem = "darcy";
    int n_samples = 16;
    int grid = 32;
    std::uint64_t seed = 0;
    std::string out;
    double grf_alpha = 2.0, grf_tau2 = 9.0, a_low = 3.0, a_high = 12.0;
    double background_k = 10.65;
    int n_inclusions = 4;
    double contrast_lo = 0.8, contrast_hi = 1.2;
};

int cmd_gen_data(const GenDataArgs& args) {
    nops::DatasetGenConfig cfg;
    cfg.problem = nops::problem_from_name(args.problem);
    cfg.n_samples = args.n_samples;
    cfg.grid = args.grid;
    cfg.base_seed = args.seed;
    cfg.grf.alpha = args.grf_alpha;
    cfg.grf.tau2 = args.grf_tau2;
    cfg.grf.a_low = args.a_low;
    cfg.grf.a_high = args.a_high;
    cfg.grf.seed = args.seed;
    cfg.wavenumber.background_k = args.background_k;
    cfg.wavenumber.n_inclusions = args.n_inclusions;
    cfg.wavenumber.contrast_lo = args.contrast_lo;
    cfg.wavenumber.contrast_hi = args.contrast_hi;

    const nops::Dataset ds = nops::generate_dataset(cfg);
    const nops::AuditResult audit = nops::audit_dataset(ds, cfg.audit_tol);
    if (!audit.pass)
        throw nops::numeric_error("dataset failed the residual audit: max residual " +
                                  fmt_double(audit.max_residual));
    nops::write_dataset(args.out, ds);

    nops::RunManifest manifest("gen-data");
    manifest.add("problem", args.problem);
    manifest.add("n_samples", std::to_string(args.n_samples));
    manifest.add("grid", std::to_string(args.grid));
    manifest.add("seed", std::to_string(args.seed));
    for (const auto& [k, v] : ds.metadata) manifest.add("dataset." + k, v);
    manifest.add("audit_max_residual", fmt_double(audit.max_residual));
    manifest.add_output(args.out);
    manifest.add("output_hash", nops::content_hash_hex(args.out));
    manifest.write(args.out + ".manifest");

    std::cout << "wrote " << ds.samples.size() << " samples to " << args.out
              << " (audit max residual " << audit.max_residual << ")\n";
    return kExitOk;
}

struct TrainArgs {
    std::string data;
    std::string backbone = "conv";
    std::string strategy = "unroll";
    int depth = 0;
    std::string stages;
    int epochs = 50;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int channels = 16;
    int conv_layers = 2;
    int batch = 16;
    int patience = 10;
    double val_fraction = 0.1;
    std::string loss = "";  // default by problem
    int mg_levels = 0;
    int nu_pre = 1, nu_post = 1, m_coarse = 3;
};

int cmd_train(const TrainArgs& args) {
    const nops::Dataset data = nops::read_dataset(args.data);

    nops::ModelConfig mc;
    mc.backbone = args.backbone == "mgv" ? nops::BackboneKind::Mgv : nops::BackboneKind::Conv;
    if (args.backbone != "mgv" && args.backbone != "conv")
        throw nops::argument_error("unknown backbone '" + args.backbone + "'");
    mc.channels = args.channels;
    mc.conv_layers = args.conv_layers;
    mc.grid = data.grid;
    mc.mg_levels = args.mg_levels;
    mc.nu_pre = args.nu_pre;
    mc.nu_post = args.nu_post;
    mc.m_coarse = args.m_coarse;
    mc.k_channels = 1;
    mc.f_channels = data.problem == nops::ProblemKind::Helmholtz ? 2 : 1;
    mc.out_channels = data.problem == nops::ProblemKind::Helmholtz ? 2 : 1;
    mc.init_seed = nops::derive_seed(args.seed, 0x1217);

    nops::TrainConfig tc;
    tc.loss = args.loss.empty()
                  ? (data.problem == nops::ProblemKind::Helmholtz ? nops::LossKind::Mse
                                                                  : nops::LossKind::RelL2PlusH1)
                  : nops::loss_from_name(args.loss);
    tc.adam.lr = args.lr;
    tc.batch_size = args.batch;
    tc.epochs_per_stage = args.epochs;
    tc.patience = args.patience;
    tc.seed = args.seed;
    tc.validation_fraction = args.val_fraction;

    if (args.strategy == "direct") {
        if (args.depth < 1) throw nops::argument_error("--strategy direct requires --depth N");
        tc.schedule = {args.depth};
    } else if (args.strategy == "unroll") {
        if (args.stages.empty()) throw nops::argument_error("--strategy unroll requires --stages");
        tc.schedule = parse_stages(args.stages);
    } else {
        throw nops::argument_error("unknown strategy '" + args.strategy + "'");
    }
    mc.depth = tc.schedule.front();

    std::filesystem::create_directories(args.out_dir);
    nops::SelfComposingOp model(mc);

    const std::string log_path = args.out_dir + "/train_log.csv";
    std::string log = nops::history_csv_header() + "\n";
    std::vector<std::string> ckpt_paths;
    const auto on_stage = [&](int, const nops::StageResult& stage, nops::SelfComposingOp& m,
                              nops::TrainState& ts) {
        for (const auto& row : stage.history) log += nops::history_csv_row(row) + "\n";
        write_text(log_path, log);  // keep the log current stage by stage
        const std::string path =
            args.out_dir + "/ckpt_depth" + std::to_string(stage.depth) + ".nods";
        nops::save_checkpoint(path, m, &ts,
                              {{"final_train_loss", fmt_double(stage.final_train_loss)}});
        ckpt_paths.push_back(path);
        std::cout << "stage depth " << stage.depth << ": final train loss "
                  << stage.final_train_loss << std::endl;
    };

    nops::train_and_unroll(model, data, tc, on_stage);

    nops::RunManifest manifest("train");
    manifest.add_input(args.data);
    manifest.add("backbone", args.backbone);
    manifest.add("strategy", args.strategy);
    std::string sched;
    for (std::size_t i = 0; i < tc.schedule.size(); ++i)
        sched += (i ? "," : "") + std::to_string(tc.schedule[i]);
    manifest.add("stages", sched);
    manifest.add("epochs_per_stage", std::to_string(args.epochs));
    manifest.add("lr", fmt_double(args.lr));
    manifest.add("loss", nops::loss_name(tc.loss));
    manifest.add("channels", std::to_string(args.channels));
    manifest.add("batch_size", std::to_string(args.batch));
    manifest.add("patience", std::to_string(args.patience));
    manifest.add("validation_fraction", fmt_double(args.val_fraction));
    manifest.add("seed", std::to_string(args.seed));
    for (const auto& p : ckpt_paths) manifest.add_output(p);
    manifest.add_output(log_path);
    manifest.write(args.out_dir + "/train.manifest");
    return kExitOk;
}

int cmd_eval(const std::string& data_path, const std::string& ckpt_path,
             const std::string& out_path) {
    const nops::Dataset data = nops::read_dataset(data_path);
    const nops::CheckpointData ckpt = nops::load_checkpoint(ckpt_path);
    nops::SelfComposingOp model = nops::model_from_checkpoint(ckpt);
    const nops::MetricsRow row = nops::evaluate_model(model, data, ckpt_path);
    const std::string csv = nops::metrics_csv(row);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(out_path, csv);
        nops::RunManifest manifest("eval");
        manifest.add_input(data_path);
        manifest.add_input(ckpt_path);
        manifest.add("mean_rel_l2", fmt_double(row.mean.rel_l2));
        manifest.add_output(out_path);
        manifest.write(out_path + ".manifest");
    }
    std::cout << "mean rel_l2 " << row.mean.rel_l2 << ", mean rel_h1 " << row.mean.rel_h1 << "\n";
    return kExitOk;
}

int cmd_depth_scan(const std::string& data_path, const std::vector<std::string>& ckpts,
                   const std::string& out_path) {
    const nops::Dataset data = nops::read_dataset(data_path);
    const nops::DepthScanResult res = nops::depth_scan(ckpts, data);
    const std::string csv = nops::depth_scan_csv(res);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(out_path, csv);
        nops::RunManifest manifest("depth-scan");
        manifest.add_input(data_path);
        for (const auto& c : ckpts) manifest.add_input(c);
        manifest.add("monotone", res.monotone ? "1" : "0");
        manifest.add_output(out_path);
        manifest.write(out_path + ".manifest");
    }
    std::cout << (res.monotone ? "depth monotonicity holds" : "depth monotonicity VIOLATED")
              << " (slack " << res.slack << ")\n";
    return res.monotone ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-composing neural operator toolkit"};
    app.require_subcommand(1);

    GenDataArgs gen;
    CLI::App* sc_gen = app.add_subcommand("gen-data", "generate a dataset with the classical solvers");
    sc_gen->add_option("--problem", gen.problem, "darcy|helmholtz")->default_val("darcy");
    sc_gen->add_option("--n-samples", gen.n_samples)->required();
    sc_gen->add_option("--grid", gen.grid)->required();
    sc_gen->add_option("--seed", gen.seed)->default_val(0);
    sc_gen->add_option("--out", gen.out)->required();
    sc_gen->add_option("--grf-alpha", gen.grf_alpha);
    sc_gen->add_option("--grf-tau2", gen.grf_tau2);
    sc_gen->add_option("--a-low", gen.a_low);
    sc_gen->add_option("--a-high", gen.a_high);
    sc_gen->add_option("--background-k", gen.background_k);
    sc_gen->add_option("--inclusions", gen.n_inclusions);
    sc_gen->add_option("--contrast-lo", gen.contrast_lo);
    sc_gen->add_option("--contrast-hi", gen.contrast_hi);

    TrainArgs train;
    CLI::App* sc_train = app.add_subcommand("train", "train a model (direct or train-and-unroll)");
    sc_train->add_option("--data", train.data)->required();
    sc_train->add_option("--backbone", train.backbone, "mgv|conv")->default_val("conv");
    sc_train->add_option("--strategy", train.strategy, "direct|unroll")->default_val("unroll");
    sc_train->add_option("--depth", train.depth);
    sc_train->add_option("--stages", train.stages, "comma-separated increasing depths");
    sc_train->add_option("--epochs", train.epochs);
    sc_train->add_option("--lr", train.lr);
    sc_train->add_option("--seed", train.seed);
    sc_train->add_option("--out-dir", train.out_dir)->required();
    sc_train->add_option("--channels", train.channels);
    sc_train->add_option("--conv-layers", train.conv_layers);
    sc_train->add_option("--batch", train.batch);
    sc_train->add_option("--patience", train.patience);
    sc_train->add_option("--val-fraction", train.val_fraction);
    sc_train->add_option("--loss", train.loss, "mse|rel_l2|rel_l2_plus_h1");
    sc_train->add_option("--mg-levels", train.mg_levels);
    sc_train->add_option("--nu-pre", train.nu_pre);
    sc_train->add_option("--nu-post", train.nu_post);
    sc_train->add_option("--m-coarse", train.m_coarse);

    std::string eval_data, eval_ckpt, eval_out;
    CLI::App* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    sc_eval->add_option("--data", eval_data)->required();
    sc_eval->add_option("--ckpt", eval_ckpt)->required();
    sc_eval->add_option("--out", eval_out);

    std::string scan_data, scan_out;
    std::vector<std::string> scan_ckpts;
    CLI::App* sc_scan = app.add_subcommand("depth-scan", "evaluate a checkpoint series by depth");
    sc_scan->add_option("--data", scan_data)->required();
    sc_scan->add_option("--ckpts", scan_ckpts, "checkpoint paths in schedule order")->required();
    sc_scan->add_option("--out", scan_out);

    std::string gc_backbone = "mgv";
    int gc_grid = 16, gc_channels = 3, gc_depth = 2, gc_levels = 2;
    double gc_tol = 1e-4;
    std::uint64_t gc_seed = 7;
    CLI::App* sc_gc = app.add_subcommand("grad-check", "finite-difference audit of the backbone");
    sc_gc->add_option("--backbone", gc_backbone, "mgv|conv")->default_val("mgv");
    sc_gc->add_option("--grid", gc_grid);
    sc_gc->add_option("--channels", gc_channels);
    sc_gc->add_option("--depth", gc_depth);
    sc_gc->add_option("--levels", gc_levels);
    sc_gc->add_option("--tol", gc_tol);
    sc_gc->add_option("--seed", gc_seed);

    std::string solve_k, solve_f, solve_ckpt, solve_out;
    CLI::App* sc_solve = app.add_subcommand("solve", "predict a field from input containers");
    sc_solve->add_option("--k", solve_k)->required();
    sc_solve->add_option("--f", solve_f);
    sc_solve->add_option("--ckpt", solve_ckpt)->required();
    sc_solve->add_option("--out", solve_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitArgument;
    }

    try {
        if (sc_gen->parsed()) return cmd_gen_data(gen);
        if (sc_train->parsed()) return cmd_train(train);
        if (sc_eval->parsed()) return cmd_eval(eval_data, eval_ckpt, eval_out);
        if (sc_scan->parsed()) return cmd_depth_scan(scan_data, scan_ckpts, scan_out);
        if (sc_gc->parsed()) {
            nops::ModelConfig mc;
            mc.backbone =
                gc_backbone == "mgv" ? nops::BackboneKind::Mgv : nops::BackboneKind::Conv;
            mc.channels = gc_channels;
            mc.grid = gc_grid;
            mc.mg_levels = gc_levels;
            mc.depth = gc_depth;
            mc.init_seed = nops::derive_seed(gc_seed, 0x6c);
            nops::SelfComposingOp model(mc);

            nops::Rng rng(nops::derive_seed(gc_seed, 0xf1e1d));
            nops::GridField k = nops::GridField::zeros(nops::FieldKind::RealScalar, gc_grid, gc_grid);
            for (double& v : k.values.data) v = rng.next_uniform(0.5, 1.5);
            nops::GridField f = nops::GridField::zeros(
                mc.f_channels == 2 ? nops::FieldKind::Complex : nops::FieldKind::RealScalar,
                gc_grid, gc_grid);
            for (double& v : f.values.data) v = rng.next_normal();
            nops::GridField target = nops::GridField::zeros(
                mc.out_channels == 2 ? nops::FieldKind::Complex : nops::FieldKind::RealScalar,
                gc_grid, gc_grid);
            for (double& v : target.values.data) v = rng.next_normal();

            const auto report = nops::grad_check(
                [&] {
                    return nops::compute_loss(nops::LossKind::Mse, model.forward(k, &f), target,
                                              k.spacing);
                },
                model.named_params(), gc_tol);
            for (const auto& e : report.entries)
                std::cout << e.name << ": max rel err " << e.max_rel_err << " (" << e.checked
                          << " checked, " << e.skipped << " skipped)\n";
            std::cout << (report.pass ? "PASS" : "FAIL") << ": max rel err " << report.max_rel_err
                      << " vs tol " << gc_tol << "\n";
            return report.pass ? kExitOk : kExitNumeric;
        }
        if (sc_solve->parsed()) {
            const nops::CheckpointData ckpt = nops::load_checkpoint(solve_ckpt);
            nops::SelfComposingOp model = nops::model_from_checkpoint(ckpt);

            auto load_field = [](const std::string& path) {
                const nops::Container c = nops::read_container(path);
                if (c.entries.empty()) throw nops::data_error(path + ": no entries");
                const nops::DenseArray& a = c.entries.front().array;
                return a.shape[0] == 2 ? nops::GridField::complex(a) : nops::GridField::real(a);
            };
            const nops::GridField k = load_field(solve_k);
            nops::GridField f;
            const bool has_f = !solve_f.empty();
            if (has_f) f = load_field(solve_f);

            const nops::GridField pred = model.forward_field(k, has_f ? &f : nullptr);
            std::vector<nops::ContainerEntry> entries = {{"u", pred.values}};
            nops::write_container(solve_out, entries,
                                  nops::format_metadata({{"kind", "field"},
                                                         {"grid", std::to_string(pred.height())}}));
            nops::RunManifest manifest("solve");
            manifest.add_input(solve_k);
            if (has_f) manifest.add_input(solve_f);
            manifest.add_input(solve_ckpt);
            manifest.add_output(solve_out);
            manifest.write(solve_out + ".manifest");
            std::cout << "wrote " << solve_out << "\n";
            return kExitOk;
        }
    } catch (const nops::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case nops::ErrorKind::Argument:
            case nops::ErrorKind::Dimension: return kExitArgument;
            case nops::ErrorKind::Data: return kExitData;
            case nops::ErrorKind::Numeric: return kExitNumeric;
        }
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
