#include "nops/mg.hpp"

#include <string>

namespace nops {

AdaConvParams AdaConvParams::init(int channels, Rng& rng) {
    AdaConvParams p;
    const int C = channels;
    p.filter_k_w = Variable(init_kernel({C, C, 3, 3}, C * 9, rng), true);
    p.filter_k_b = Variable(DenseArray::zeros({C}), true);
    p.filter_x_w = Variable(init_kernel({C, C, 3, 3}, C * 9, rng), true);
    p.mlp1_w = Variable(init_kernel({C, C, 1, 1}, C, rng), true);
    p.mlp1_b = Variable(DenseArray::zeros({C}), true);
    p.mlp2_w = Variable(init_kernel({C, C, 1, 1}, C, rng), true);
    // Unit gate at start: the modulation begins as an identity and the
    // filters dominate early training.
    p.mlp2_b = Variable(DenseArray::full({C}, 1.0), true);
    return p;
}

void AdaConvParams::collect(const std::string& prefix, ParamList& out) const {
    out.emplace_back(prefix + ".fk.w", filter_k_w);
    out.emplace_back(prefix + ".fk.b", filter_k_b);
    out.emplace_back(prefix + ".fx.w", filter_x_w);
    out.emplace_back(prefix + ".mlp1.w", mlp1_w);
    out.emplace_back(prefix + ".mlp1.b", mlp1_b);
    out.emplace_back(prefix + ".mlp2.w", mlp2_w);
    out.emplace_back(prefix + ".mlp2.b", mlp2_b);
}

Variable ada_conv_gate(const AdaConvParams& p, const Variable& k_feat) {
    Variable y = conv2d(k_feat, p.filter_k_w, 1, 1, p.filter_k_b);
    return conv2d(gelu(conv2d(y, p.mlp1_w, 1, 0, p.mlp1_b)), p.mlp2_w, 1, 0, p.mlp2_b);
}

Variable ada_conv(const AdaConvParams& p, const Variable& k_feat, const Variable& x) {
    if (k_feat.shape() != x.shape())
        throw dimension_error("ada_conv: k_feat " + shape_str(k_feat.shape()) + " vs x " +
                              shape_str(x.shape()));
    return mul(ada_conv_gate(p, k_feat), conv2d(x, p.filter_x_w, 1, 1));
}

MgConfig MgConfig::from_model(const ModelConfig& m) {
    MgConfig c;
    c.channels = m.channels;
    c.grid = m.grid;
    c.levels = m.mg_levels;
    c.nu_pre = m.nu_pre;
    c.nu_post = m.nu_post;
    c.m_coarse = m.m_coarse;
    c.learned_k_restriction = m.learned_k_restriction;
    return c;
}

std::vector<int> mg_level_sizes(int grid, int levels) {
    if (grid < 4) throw argument_error("mg_level_sizes: finest grid must be at least 4");
    std::vector<int> sizes = {grid};
    auto can_halve = [](int g) { return g % 2 == 0 && g / 2 >= 4; };
    if (levels == 0) {
        while (sizes.back() > 8 && can_halve(sizes.back())) sizes.push_back(sizes.back() / 2);
    } else {
        for (int l = 1; l < levels; ++l) {
            if (!can_halve(sizes.back()))
                throw argument_error("mg_level_sizes: cannot halve grid of size " +
                                     std::to_string(sizes.back()));
            sizes.push_back(sizes.back() / 2);
        }
    }
    return sizes;
}

MgBackbone::MgBackbone(const MgConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.grid <= 0) throw argument_error("MgBackbone: finest grid size required");
    if (cfg.nu_pre < 1 || cfg.nu_post < 0 || cfg.m_coarse < 1)
        throw argument_error("MgBackbone: smoothing counts must be positive");
    sizes_ = mg_level_sizes(cfg.grid, cfg.levels);
    const int L = static_cast<int>(sizes_.size());
    const int C = cfg.channels;

    Rng rng(seed);
    for (int l = 0; l < L; ++l) {
        a_params_.push_back(AdaConvParams::init(C, rng));
        s_params_.push_back(AdaConvParams::init(C, rng));
    }
    for (int l = 0; l + 1 < L; ++l) {
        restrict_w_.push_back(Variable(init_kernel({C, C, 3, 3}, C * 9, rng), true));
        prolong_w_.push_back(Variable(init_kernel({C, C, 3, 3}, C * 9, rng), true));
        if (cfg.learned_k_restriction)
            k_restrict_w_.push_back(Variable(init_kernel({C, C, 3, 3}, C * 9, rng), true));
    }
}

const Variable* MgBackbone::cached_gate(int level, const Variable& k_feat, bool smoother) const {
    if (k_src_ == nullptr || level >= static_cast<int>(k_feats_.size())) return nullptr;
    if (k_feats_[level].node().get() != k_feat.node().get()) return nullptr;
    return smoother ? &gate_s_[level] : &gate_a_[level];
}

void MgBackbone::rebuild_cache(const Variable& k_feat) const {
    k_feats_ = restrict_k(k_feat);
    gate_a_.clear();
    gate_s_.clear();
    for (int l = 0; l < levels(); ++l) {
        gate_a_.push_back(ada_conv_gate(a_params_[l], k_feats_[l]));
        gate_s_.push_back(ada_conv_gate(s_params_[l], k_feats_[l]));
    }
    k_src_ = k_feat.node().get();
}

Variable MgBackbone::pde_apply(int level, const Variable& k_feat, const Variable& u) const {
    if (const Variable* gate = cached_gate(level, k_feat, false))
        return mul(*gate, conv2d(u, a_params_[level].filter_x_w, 1, 1));
    return ada_conv(a_params_[level], k_feat, u);
}

Variable MgBackbone::smooth(int level, const Variable& k_feat, const Variable& r) const {
    if (const Variable* gate = cached_gate(level, k_feat, true))
        return mul(*gate, conv2d(r, s_params_[level].filter_x_w, 1, 1));
    return ada_conv(s_params_[level], k_feat, r);
}

std::vector<Variable> MgBackbone::restrict_k(const Variable& k_feat) const {
    std::vector<Variable> feats = {k_feat};
    for (int l = 0; l + 1 < levels(); ++l) {
        if (cfg_.learned_k_restriction)
            feats.push_back(conv2d(feats.back(), k_restrict_w_[l], 2, 1));
        else
            feats.push_back(avg_pool2(feats.back()));
    }
    return feats;
}

Variable MgBackbone::v_cycle(int level, const Variable& u, const std::vector<Variable>& k_feats,
                             const Variable& f) const {
    if (level < 0 || level >= levels()) throw argument_error("v_cycle: level out of range");
    const Variable& k = k_feats[level];

    // Pre-smoothing; the first residual is kept for restriction.
    Variable r0 = sub(f, pde_apply(level, k, u));
    Variable uh = add(u, smooth(level, k, r0));
    for (int t = 1; t < cfg_.nu_pre; ++t) {
        Variable r = sub(f, pde_apply(level, k, uh));
        uh = add(uh, smooth(level, k, r));
    }

    if (level + 1 < levels()) {
        // Restrict the residual from before the pre-smoothing update.
        Variable r2h = conv2d(r0, restrict_w_[level], 2, 1);
        const int coarse = level + 1;
        Variable e(DenseArray::zeros({cfg_.channels, sizes_[coarse], sizes_[coarse]}), false);
        if (coarse == levels() - 1) {
            for (int t = 0; t < cfg_.m_coarse; ++t) {
                Variable rc = sub(r2h, pde_apply(coarse, k_feats[coarse], e));
                e = add(e, smooth(coarse, k_feats[coarse], rc));
            }
        } else {
            e = v_cycle(coarse, e, k_feats, r2h);
        }
        // Even fine sizes need one row/column of output padding to land back
        // on the fine grid exactly.
        const int pad_out = sizes_[level] - ((sizes_[coarse] - 1) * 2 - 2 + 3);
        Variable up = conv2d_transpose(e, prolong_w_[level], 2, 1, pad_out);
        uh = add(uh, up);
    }

    for (int t = 0; t < cfg_.nu_post; ++t) {
        Variable r = sub(f, pde_apply(level, k, uh));
        uh = add(uh, smooth(level, k, r));
    }
    return uh;
}

LatentState MgBackbone::apply(const LatentState& s) {
    const auto& us = s.u.shape();
    if (us[1] != cfg_.grid || us[2] != cfg_.grid)
        throw dimension_error("MgBackbone: state grid " + shape_str(us) +
                              " does not match configured finest grid " +
                              std::to_string(cfg_.grid));
    if (s.k_feat.node().get() != k_src_) rebuild_cache(s.k_feat);
    Variable u = v_cycle(0, s.u, k_feats_, s.f_feat);
    return {u, s.k_feat, s.f_feat};
}

void MgBackbone::collect_params(ParamList& out) const {
    for (int l = 0; l < levels(); ++l) {
        const std::string prefix = "backbone.l" + std::to_string(l);
        a_params_[l].collect(prefix + ".A", out);
        s_params_[l].collect(prefix + ".S", out);
        if (l + 1 < levels()) {
            out.emplace_back(prefix + ".R.w", restrict_w_[l]);
            out.emplace_back(prefix + ".P.w", prolong_w_[l]);
            if (cfg_.learned_k_restriction) out.emplace_back(prefix + ".KR.w", k_restrict_w_[l]);
        }
    }
}

}  // namespace nops
