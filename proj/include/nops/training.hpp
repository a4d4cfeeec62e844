#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nops/dataset.hpp"
#include "nops/model.hpp"

namespace nops {

enum class LossKind { Mse, RelL2, RelL2PlusH1 };

std::string loss_name(LossKind k);
LossKind loss_from_name(const std::string& s);

/// Differentiable training losses. rel_l2 = ||pred-target|| / ||target||
/// over all channels; the H1 variant adds the relative discrete Sobolev
/// seminorm built from forward differences scaled by 1/h.
Variable compute_loss(LossKind kind, const Variable& pred, const GridField& target, double h);

/// Adam moments and counters; moment arrays are keyed by parameter name and
/// sized lazily on first use.
struct TrainState {
    std::vector<std::pair<std::string, DenseArray>> m;
    std::vector<std::pair<std::string, DenseArray>> v;
    long step = 0;
    int stage_index = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update from the gradients currently held by the
/// parameters. Aborts with the parameter name on a non-finite gradient.
void adam_step(const ParamList& params, TrainState& state, const AdamConfig& adam);

struct TrainConfig {
    LossKind loss = LossKind::Mse;
    AdamConfig adam;
    int batch_size = 16;
    int epochs_per_stage = 50;
    int patience = 10;
    std::vector<int> schedule = {1};  // strictly increasing depths
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    bool cosine_decay = true;
};

/// One CSV row of the metric log (stage_depth,epoch,step,train_loss,
/// val_rel_l2,val_rel_h1,wall_seconds). Epoch 0 rows record the state before
/// the stage's first update.
struct HistoryRow {
    int stage_depth = 0;
    int epoch = 0;
    long step = 0;
    double train_loss = 0.0;
    double val_rel_l2 = 0.0;
    double val_rel_h1 = 0.0;
    double wall_seconds = 0.0;
};

std::string history_csv_header();
std::string history_csv_row(const HistoryRow& r);

struct StageResult {
    int depth = 0;
    std::vector<HistoryRow> history;
    double final_train_loss = 0.0;
};

/// Deterministic split: indices are shuffled by the config seed, the first
/// round(frac*n) become validation.
struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};
DataSplit split_dataset(std::size_t n, double validation_fraction, std::uint64_t seed);

/// Minibatch training of one stage at the given composition depth. Train-loss
/// rows are full-train-set evaluations so that stage transitions compare
/// consistently; early stopping watches val_rel_l2 with the configured
/// patience.
StageResult train_stage(SelfComposingOp& model, const Dataset& data, const DataSplit& split,
                        const TrainConfig& cfg, int depth, TrainState& state);

using StageCallback =
    std::function<void(int stage_index, const StageResult&, SelfComposingOp&, TrainState&)>;

/// Runs the stage schedule with shared weights carried bit-exactly from one
/// stage to the next; returns the per-stage histories. The callback fires
/// after each stage (checkpointing hook).
std::vector<StageResult> train_and_unroll(SelfComposingOp& model, const Dataset& data,
                                          const TrainConfig& cfg,
                                          const StageCallback& on_stage = {});

/// Mean validation metrics (rel_l2, rel_h1) of the model on the given indices.
std::pair<double, double> validate_model(SelfComposingOp& model, const Dataset& data,
                                         const std::vector<std::size_t>& indices);

/// Full-set loss without gradient recording.
double evaluate_loss(SelfComposingOp& model, const Dataset& data,
                     const std::vector<std::size_t>& indices, LossKind loss);

}  // namespace nops
