#include "nops/model.hpp"

#include <cmath>

#include "nops/mg.hpp"

namespace nops {

Variable apply_activation(Activation act, const Variable& x) {
    return act == Activation::Gelu ? gelu(x) : relu(x);
}

DenseArray init_kernel(std::vector<int> shape, int fan_in, Rng& rng) {
    DenseArray a = DenseArray::zeros(std::move(shape));
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : a.data) v = rng.next_uniform(-s, s);
    return a;
}

ConvBlockBackbone::ConvBlockBackbone(int channels, int layers, Activation act,
                                     std::uint64_t seed)
    : act_(act) {
    if (layers < 1) throw argument_error("ConvBlockBackbone: needs at least one layer");
    if (channels < 1) throw argument_error("ConvBlockBackbone: needs at least one channel");
    Rng rng(seed);
    for (int l = 0; l < layers; ++l) {
        weights_.push_back(Variable(init_kernel({channels, channels, 3, 3}, channels * 9, rng), true));
        biases_.push_back(Variable(DenseArray::zeros({channels}), true));
    }
}

LatentState ConvBlockBackbone::apply(const LatentState& s) {
    Variable z = add(add(s.u, s.k_feat), s.f_feat);
    for (std::size_t l = 0; l < weights_.size(); ++l)
        z = apply_activation(act_, conv2d(z, weights_[l], 1, 1, biases_[l]));
    return {add(s.u, z), s.k_feat, s.f_feat};
}

void ConvBlockBackbone::collect_params(ParamList& out) const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.emplace_back("backbone.conv" + std::to_string(l) + ".w", weights_[l]);
        out.emplace_back("backbone.conv" + std::to_string(l) + ".b", biases_[l]);
    }
}

SelfComposingOp::SelfComposingOp(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.channels < 1) throw argument_error("SelfComposingOp: channels must be positive");
    if (cfg.depth < 1) throw argument_error("SelfComposingOp: depth must be positive");
    if (cfg.k_channels < 1 || cfg.f_channels < 1 || cfg.out_channels < 1)
        throw argument_error("SelfComposingOp: channel counts must be positive");

    Rng rng(cfg.init_seed);
    const int C = cfg.channels;
    lift_k_w_ = Variable(init_kernel({C, cfg.k_channels, 1, 1}, cfg.k_channels, rng), true);
    lift_k_b_ = Variable(DenseArray::zeros({C}), true);
    lift_f_w_ = Variable(init_kernel({C, cfg.f_channels, 1, 1}, cfg.f_channels, rng), true);
    lift_f_b_ = Variable(DenseArray::zeros({C}), true);
    // Small projection head: the model starts near the zero field and the
    // composed iterates set the scale during training.
    DenseArray pw = init_kernel({cfg.out_channels, C, 1, 1}, C, rng);
    for (double& v : pw.data) v *= 0.05;
    proj_w_ = Variable(std::move(pw), true);
    proj_b_ = Variable(DenseArray::zeros({cfg.out_channels}), true);

    const std::uint64_t backbone_seed = rng.next_u64();
    switch (cfg.backbone) {
        case BackboneKind::Conv:
            backbone_ = std::make_unique<ConvBlockBackbone>(C, cfg.conv_layers, cfg.activation,
                                                            backbone_seed);
            break;
        case BackboneKind::Mgv:
            backbone_ = std::make_unique<MgBackbone>(MgConfig::from_model(cfg), backbone_seed);
            break;
    }
}

LatentState SelfComposingOp::apply_lifting(const GridField& k, const GridField* f) const {
    const int H = k.height(), W = k.width();
    if (k.channels() != cfg_.k_channels)
        throw dimension_error("apply_lifting: coefficient field has " +
                              std::to_string(k.channels()) + " channels, expected " +
                              std::to_string(cfg_.k_channels));
    Variable k_in(k.values, false);
    Variable f_in;
    if (f) {
        if (f->height() != H || f->width() != W)
            throw dimension_error("apply_lifting: k and f grids differ");
        if (f->channels() != cfg_.f_channels)
            throw dimension_error("apply_lifting: source field has " +
                                  std::to_string(f->channels()) + " channels, expected " +
                                  std::to_string(cfg_.f_channels));
        f_in = Variable(f->values, false);
    } else {
        f_in = Variable(DenseArray::zeros({cfg_.f_channels, H, W}), false);
    }

    LatentState s;
    s.k_feat = conv2d(k_in, lift_k_w_, 1, 0, lift_k_b_);
    s.f_feat = conv2d(f_in, lift_f_w_, 1, 0, lift_f_b_);
    s.u = Variable(DenseArray::zeros({cfg_.channels, H, W}), false);
    return s;
}

LatentState SelfComposingOp::compose(const LatentState& s, int n) const {
    if (n < 1) throw argument_error("compose: n must be at least 1");
    LatentState cur = s;
    for (int i = 0; i < n; ++i) cur = backbone_->apply(cur);
    return cur;
}

Variable SelfComposingOp::project(const LatentState& s) const {
    return conv2d(s.u, proj_w_, 1, 0, proj_b_);
}

Variable SelfComposingOp::forward(const GridField& k, const GridField* f) const {
    return project(compose(apply_lifting(k, f), cfg_.depth));
}

GridField SelfComposingOp::forward_field(const GridField& k, const GridField* f) const {
    detail::NoGradGuard ng;
    const Variable out = forward(k, f);
    return out.shape()[0] == 2 ? GridField::complex(out.value()) : GridField::real(out.value());
}

void SelfComposingOp::set_depth(int n) {
    if (n < 1) throw argument_error("set_depth: depth must be positive");
    cfg_.depth = n;
}

ParamList SelfComposingOp::named_params() const {
    ParamList out;
    out.emplace_back("lift.k.w", lift_k_w_);
    out.emplace_back("lift.k.b", lift_k_b_);
    out.emplace_back("lift.f.w", lift_f_w_);
    out.emplace_back("lift.f.b", lift_f_b_);
    backbone_->collect_params(out);
    out.emplace_back("proj.w", proj_w_);
    out.emplace_back("proj.b", proj_b_);
    return out;
}

long SelfComposingOp::param_count() const {
    long total = 0;
    for (const auto& [name, p] : named_params()) total += static_cast<long>(p.value().size());
    return total;
}

}  // namespace nops
