#pragma once

#include <string>
#include <vector>

#include "nops/model.hpp"
#include "nops/training.hpp"

namespace nops {

/// A serialized model: architecture config, every named parameter array, and
/// optionally the optimizer state. Stored in the same container format with
/// checkpoint metadata.
struct CheckpointData {
    ModelConfig config;
    std::vector<std::pair<std::string, DenseArray>> params;
    TrainState train_state;
    bool has_train_state = false;
    std::vector<std::pair<std::string, std::string>> extra;  // e.g. final_train_loss
};

void save_checkpoint(const std::string& path, const SelfComposingOp& model,
                     const TrainState* state = nullptr,
                     const std::vector<std::pair<std::string, std::string>>& extra = {});

CheckpointData load_checkpoint(const std::string& path);

/// Copies checkpoint parameters into an existing model; every name must match
/// with an identical shape (depth is free to differ, the parameter set is
/// depth-independent). Throws naming the offending parameter otherwise.
void apply_checkpoint_params(SelfComposingOp& model, const CheckpointData& ckpt);

/// Rebuilds a model from the stored architecture config and parameters.
SelfComposingOp model_from_checkpoint(const CheckpointData& ckpt);

std::vector<std::pair<std::string, std::string>> model_config_metadata(const ModelConfig& cfg);
ModelConfig model_config_from_metadata(
    const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace nops
