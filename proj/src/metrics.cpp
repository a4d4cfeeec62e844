#include "nops/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "nops/container.hpp"

namespace nops {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Norms {
    double l2 = 0.0;
    double h1 = 0.0;  // full H1: sqrt(l2^2 + seminorm^2)
};

Norms discrete_norms(const DenseArray& a, double h) {
    const int C = a.shape[0], H = a.shape[1], W = a.shape[2];
    double l2sq = 0.0;
    for (double v : a.data) l2sq += v * v;
    double semisq = 0.0;
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i + 1 < H; ++i)
            for (int j = 0; j < W; ++j) {
                const double d = (a.at3(c, i + 1, j) - a.at3(c, i, j)) / h;
                semisq += d * d;
            }
        for (int i = 0; i < H; ++i)
            for (int j = 0; j + 1 < W; ++j) {
                const double d = (a.at3(c, i, j + 1) - a.at3(c, i, j)) / h;
                semisq += d * d;
            }
    }
    Norms n;
    n.l2 = std::sqrt(l2sq);
    n.h1 = std::sqrt(l2sq + semisq);
    return n;
}

}  // namespace

SampleMetrics compute_metrics(const GridField& pred, const GridField& target) {
    if (pred.values.shape != target.values.shape)
        throw dimension_error("compute_metrics: pred " + shape_str(pred.values.shape) +
                              " vs target " + shape_str(target.values.shape));
    const double h = target.spacing;

    DenseArray diff = DenseArray::zeros(pred.values.shape);
    for (std::size_t i = 0; i < diff.data.size(); ++i)
        diff.data[i] = pred.values.data[i] - target.values.data[i];

    const Norms dn = discrete_norms(diff, h);
    const Norms tn = discrete_norms(target.values, h);
    if (tn.l2 == 0.0) throw argument_error("compute_metrics: zero-norm target");

    SampleMetrics m;
    m.rel_l2 = dn.l2 / tn.l2;
    m.rel_h1 = dn.h1 / tn.h1;
    m.rrmse = m.rel_l2;

    const int C = diff.shape[0], H = diff.shape[1], W = diff.shape[2];
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            double mag;
            if (C == 2) {
                mag = std::hypot(diff.at3(0, i, j), diff.at3(1, i, j));
            } else {
                mag = 0.0;
                for (int c = 0; c < C; ++c) mag = std::max(mag, std::abs(diff.at3(c, i, j)));
            }
            m.max_error = std::max(m.max_error, mag);
        }
    return m;
}

MetricsRow evaluate_model(SelfComposingOp& model, const Dataset& data,
                          const std::string& model_id) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    MetricsRow row;
    row.model_id = model_id;
    row.depth = model.depth();
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const GridField pred = model.forward_field(data.conditioning(i), data.source(i));
        const SampleMetrics m = compute_metrics(pred, data.samples[i].target);
        row.mean.rel_l2 += m.rel_l2;
        row.mean.rel_h1 += m.rel_h1;
        row.mean.rrmse += m.rrmse;
        row.mean.max_error += m.max_error;
        row.per_sample.push_back(m);
    }
    if (!row.per_sample.empty()) {
        const double inv = 1.0 / static_cast<double>(row.per_sample.size());
        row.mean.rel_l2 *= inv;
        row.mean.rel_h1 *= inv;
        row.mean.rrmse *= inv;
        row.mean.max_error *= inv;
    }
    row.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return row;
}

std::string metrics_csv(const MetricsRow& row) {
    std::string out = "model_id,depth,sample,rel_l2,rel_h1,rrmse,max_error,wall_seconds\n";
    for (std::size_t i = 0; i < row.per_sample.size(); ++i) {
        const SampleMetrics& m = row.per_sample[i];
        out += row.model_id + "," + std::to_string(row.depth) + "," + std::to_string(i) + "," +
               fmt(m.rel_l2) + "," + fmt(m.rel_h1) + "," + fmt(m.rrmse) + "," + fmt(m.max_error) +
               ",\n";
    }
    out += row.model_id + "," + std::to_string(row.depth) + ",mean," + fmt(row.mean.rel_l2) + "," +
           fmt(row.mean.rel_h1) + "," + fmt(row.mean.rrmse) + "," + fmt(row.mean.max_error) + "," +
           fmt(row.wall_seconds) + "\n";
    return out;
}

DepthScanResult depth_scan(const std::vector<std::string>& checkpoint_paths, const Dataset& data) {
    if (checkpoint_paths.empty()) throw argument_error("depth_scan: no checkpoints given");
    DepthScanResult res;
    for (const std::string& path : checkpoint_paths) {
        const CheckpointData ckpt = load_checkpoint(path);
        SelfComposingOp model = model_from_checkpoint(ckpt);
        DepthScanRow row;
        row.depth = ckpt.config.depth;
        if (metadata_has(ckpt.extra, "final_train_loss"))
            row.final_train_loss = std::stod(metadata_get(ckpt.extra, "final_train_loss"));
        MetricsRow m = evaluate_model(model, data, path);
        row.val_rel_l2 = m.mean.rel_l2;
        row.val_rel_h1 = m.mean.rel_h1;
        res.rows.push_back(row);
    }
    res.monotone = true;
    for (std::size_t i = 1; i < res.rows.size(); ++i)
        if (res.rows[i].final_train_loss > res.slack * res.rows[i - 1].final_train_loss)
            res.monotone = false;
    return res;
}

std::string depth_scan_csv(const DepthScanResult& res) {
    std::string out = "depth,final_train_loss,val_rel_l2,val_rel_h1\n";
    for (const DepthScanRow& r : res.rows)
        out += std::to_string(r.depth) + "," + fmt(r.final_train_loss) + "," + fmt(r.val_rel_l2) +
               "," + fmt(r.val_rel_h1) + "\n";
    return out;
}

}  // namespace nops
