#pragma once

#include <string>
#include <vector>

#include "nops/checkpoint.hpp"
#include "nops/dataset.hpp"
#include "nops/model.hpp"

namespace nops {

/// Per-sample evaluation metrics. rrmse coincides with rel_l2 by definition
/// (the RMSE ratio over the same point set); max_error is unnormalized and
/// uses the complex modulus for two-channel fields.
struct SampleMetrics {
    double rel_l2 = 0.0;
    double rel_h1 = 0.0;
    double rrmse = 0.0;
    double max_error = 0.0;
};

SampleMetrics compute_metrics(const GridField& pred, const GridField& target);

struct MetricsRow {
    std::string model_id;
    int depth = 0;
    std::vector<SampleMetrics> per_sample;
    SampleMetrics mean;
    double wall_seconds = 0.0;
};

MetricsRow evaluate_model(SelfComposingOp& model, const Dataset& data,
                          const std::string& model_id);

std::string metrics_csv(const MetricsRow& row);

struct DepthScanRow {
    int depth = 0;
    double final_train_loss = 0.0;
    double val_rel_l2 = 0.0;
    double val_rel_h1 = 0.0;
};

struct DepthScanResult {
    std::vector<DepthScanRow> rows;
    bool monotone = false;  // loss(l) <= slack * loss(l-1) for all stages
    double slack = 1.05;
};

/// Evaluates a train-and-unroll checkpoint series against a dataset and
/// checks the depth-monotonicity of the recorded final training losses.
DepthScanResult depth_scan(const std::vector<std::string>& checkpoint_paths, const Dataset& data);

std::string depth_scan_csv(const DepthScanResult& res);

}  // namespace nops
