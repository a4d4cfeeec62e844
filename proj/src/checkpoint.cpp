#include "nops/checkpoint.hpp"

#include "nops/container.hpp"

namespace nops {

namespace {

std::string backbone_name(BackboneKind k) { return k == BackboneKind::Conv ? "conv" : "mgv"; }

BackboneKind backbone_from_name(const std::string& s) {
    if (s == "conv") return BackboneKind::Conv;
    if (s == "mgv") return BackboneKind::Mgv;
    throw data_error("checkpoint: unknown backbone kind '" + s + "'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> model_config_metadata(const ModelConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("backbone", backbone_name(cfg.backbone));
    kv.emplace_back("channels", std::to_string(cfg.channels));
    kv.emplace_back("k_channels", std::to_string(cfg.k_channels));
    kv.emplace_back("f_channels", std::to_string(cfg.f_channels));
    kv.emplace_back("out_channels", std::to_string(cfg.out_channels));
    kv.emplace_back("depth", std::to_string(cfg.depth));
    kv.emplace_back("activation", cfg.activation == Activation::Gelu ? "gelu" : "relu");
    kv.emplace_back("conv_layers", std::to_string(cfg.conv_layers));
    kv.emplace_back("grid", std::to_string(cfg.grid));
    kv.emplace_back("mg_levels", std::to_string(cfg.mg_levels));
    kv.emplace_back("nu_pre", std::to_string(cfg.nu_pre));
    kv.emplace_back("nu_post", std::to_string(cfg.nu_post));
    kv.emplace_back("m_coarse", std::to_string(cfg.m_coarse));
    kv.emplace_back("learned_k_restriction", cfg.learned_k_restriction ? "1" : "0");
    kv.emplace_back("init_seed", std::to_string(cfg.init_seed));
    return kv;
}

ModelConfig model_config_from_metadata(
    const std::vector<std::pair<std::string, std::string>>& kv) {
    ModelConfig cfg;
    cfg.backbone = backbone_from_name(metadata_get(kv, "backbone"));
    cfg.channels = std::stoi(metadata_get(kv, "channels"));
    cfg.k_channels = std::stoi(metadata_get(kv, "k_channels"));
    cfg.f_channels = std::stoi(metadata_get(kv, "f_channels"));
    cfg.out_channels = std::stoi(metadata_get(kv, "out_channels"));
    cfg.depth = std::stoi(metadata_get(kv, "depth"));
    cfg.activation = metadata_get(kv, "activation") == "relu" ? Activation::Relu : Activation::Gelu;
    cfg.conv_layers = std::stoi(metadata_get(kv, "conv_layers"));
    cfg.grid = std::stoi(metadata_get(kv, "grid"));
    cfg.mg_levels = std::stoi(metadata_get(kv, "mg_levels"));
    cfg.nu_pre = std::stoi(metadata_get(kv, "nu_pre"));
    cfg.nu_post = std::stoi(metadata_get(kv, "nu_post"));
    cfg.m_coarse = std::stoi(metadata_get(kv, "m_coarse"));
    cfg.learned_k_restriction = metadata_get(kv, "learned_k_restriction") == "1";
    cfg.init_seed = std::stoull(metadata_get(kv, "init_seed"));
    return cfg;
}

void save_checkpoint(const std::string& path, const SelfComposingOp& model,
                     const TrainState* state,
                     const std::vector<std::pair<std::string, std::string>>& extra) {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("kind", "checkpoint");
    for (auto& p : model_config_metadata(model.config())) kv.push_back(std::move(p));
    kv.emplace_back("has_train_state", state ? "1" : "0");
    if (state) {
        kv.emplace_back("step", std::to_string(state->step));
        kv.emplace_back("stage_index", std::to_string(state->stage_index));
    }
    for (const auto& p : extra) kv.push_back(p);

    std::vector<ContainerEntry> entries;
    for (const auto& [name, p] : model.named_params())
        entries.push_back({"param." + name, p.value()});
    if (state) {
        for (const auto& [name, arr] : state->m) entries.push_back({"opt.m." + name, arr});
        for (const auto& [name, arr] : state->v) entries.push_back({"opt.v." + name, arr});
    }
    write_container(path, entries, format_metadata(kv));
}

CheckpointData load_checkpoint(const std::string& path) {
    const Container c = read_container(path);
    const auto kv = parse_metadata(c.metadata);
    if (!metadata_has(kv, "kind") || metadata_get(kv, "kind") != "checkpoint")
        throw data_error("load_checkpoint: " + path + " is not a checkpoint container");

    CheckpointData ckpt;
    ckpt.config = model_config_from_metadata(kv);
    ckpt.extra = kv;
    ckpt.has_train_state = metadata_get(kv, "has_train_state") == "1";
    if (ckpt.has_train_state) {
        ckpt.train_state.step = std::stol(metadata_get(kv, "step"));
        ckpt.train_state.stage_index = std::stoi(metadata_get(kv, "stage_index"));
    }
    for (const auto& e : c.entries) {
        if (e.name.rfind("param.", 0) == 0)
            ckpt.params.emplace_back(e.name.substr(6), e.array);
        else if (e.name.rfind("opt.m.", 0) == 0)
            ckpt.train_state.m.emplace_back(e.name.substr(6), e.array);
        else if (e.name.rfind("opt.v.", 0) == 0)
            ckpt.train_state.v.emplace_back(e.name.substr(6), e.array);
    }
    return ckpt;
}

void apply_checkpoint_params(SelfComposingOp& model, const CheckpointData& ckpt) {
    ParamList params = model.named_params();
    if (params.size() != ckpt.params.size())
        throw data_error("checkpoint: model has " + std::to_string(params.size()) +
                         " parameters, checkpoint has " + std::to_string(ckpt.params.size()));
    for (auto& [name, p] : params) {
        const DenseArray* stored = nullptr;
        for (const auto& [cname, arr] : ckpt.params)
            if (cname == name) stored = &arr;
        if (!stored) throw data_error("checkpoint: missing parameter '" + name + "'");
        if (stored->shape != p.value().shape)
            throw data_error("checkpoint: shape mismatch for parameter '" + name + "': model " +
                             shape_str(p.value().shape) + " vs checkpoint " +
                             shape_str(stored->shape));
        p.mutable_value() = *stored;
    }
}

SelfComposingOp model_from_checkpoint(const CheckpointData& ckpt) {
    SelfComposingOp model(ckpt.config);
    apply_checkpoint_params(model, ckpt);
    return model;
}

}  // namespace nops
