#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "nops/model.hpp"

namespace nops {

/// Parameters of one Adaptive Convolution: a gate path (3x3 conv with bias,
/// then a two-layer pointwise MLP with GELU between) multiplying a bias-free
/// 3x3 convolution of the primary field, so the map stays exactly linear in
/// the primary field.
struct AdaConvParams {
    Variable filter_k_w;  // [C,C,3,3]
    Variable filter_k_b;  // [C]
    Variable filter_x_w;  // [C,C,3,3], no bias
    Variable mlp1_w;      // [C,C,1,1]
    Variable mlp1_b;      // [C]
    Variable mlp2_w;      // [C,C,1,1]
    Variable mlp2_b;      // [C]

    static AdaConvParams init(int channels, Rng& rng);
    void collect(const std::string& prefix, ParamList& out) const;
};

/// (MLP(Filter_k * k_feat)) elementwise-times (Filter_x * x); stride 1, pad 1.
Variable ada_conv(const AdaConvParams& p, const Variable& k_feat, const Variable& x);

/// The gate factor MLP(Filter_k * k_feat) alone.
Variable ada_conv_gate(const AdaConvParams& p, const Variable& k_feat);

struct MgConfig {
    int channels = 24;
    int grid = 0;        // finest grid size
    int levels = 0;      // 0 = halve while size > 8
    int nu_pre = 1;
    int nu_post = 1;
    int m_coarse = 3;
    bool learned_k_restriction = false;

    static MgConfig from_model(const ModelConfig& m);
};

/// Learnable V-cycle backbone. Each level owns distinct operator (A) and
/// smoother (S) adaptive convolutions; transfers are a stride-2 convolution
/// down and a stride-2 transposed convolution up. Per-level coefficient
/// features come from repeated 2x2 average pooling (or a learned strided
/// convolution when configured) and are derived once per forward pass.
class MgBackbone : public Backbone {
  public:
    MgBackbone(const MgConfig& cfg, std::uint64_t seed);

    LatentState apply(const LatentState& s) override;
    void collect_params(ParamList& out) const override;
    std::string kind() const override { return "mgv"; }

    const MgConfig& config() const { return cfg_; }
    const std::vector<int>& level_sizes() const { return sizes_; }
    int levels() const { return static_cast<int>(sizes_.size()); }

    /// One application of the level's PDE operator A_h (linear in u).
    Variable pde_apply(int level, const Variable& k_feat, const Variable& u) const;
    /// One application of the level's smoother S_h (linear in r).
    Variable smooth(int level, const Variable& k_feat, const Variable& r) const;
    /// The recursive cycle; k_feats must hold one entry per level.
    Variable v_cycle(int level, const Variable& u, const std::vector<Variable>& k_feats,
                     const Variable& f) const;
    /// Coefficient pyramid: k_feats[0] = k_feat, each next level restricted.
    std::vector<Variable> restrict_k(const Variable& k_feat) const;

    /// Direct access for hand-set weights in verification code.
    AdaConvParams& op_params(int level) { return a_params_[level]; }
    AdaConvParams& smoother_params(int level) { return s_params_[level]; }
    Variable& restriction_kernel(int level) { return restrict_w_[level]; }
    Variable& prolongation_kernel(int level) { return prolong_w_[level]; }

  private:
    MgConfig cfg_;
    std::vector<int> sizes_;              // per-level grid sizes, finest first
    std::vector<AdaConvParams> a_params_;  // one per level
    std::vector<AdaConvParams> s_params_;  // one per level
    std::vector<Variable> restrict_w_;     // levels-1 kernels [C,C,3,3]
    std::vector<Variable> prolong_w_;      // levels-1 kernels [C,C,3,3]
    std::vector<Variable> k_restrict_w_;   // only when learned_k_restriction

    // Pyramid and gate cache, rebuilt whenever a new k_feat node is seen.
    // Gates depend only on the coefficient features, so every smoothing step
    // and every composition within one forward shares the same gate nodes;
    // forward passes always lift fresh nodes, so updates never reuse a stale
    // cache.
    mutable const void* k_src_ = nullptr;
    mutable std::vector<Variable> k_feats_;
    mutable std::vector<Variable> gate_a_, gate_s_;

    const Variable* cached_gate(int level, const Variable& k_feat, bool smoother) const;
    void rebuild_cache(const Variable& k_feat) const;
};

/// Level sizes obtained by exact halving: [g, g/2, ...]; every size above the
/// coarsest must be even, all sizes at least 4.
std::vector<int> mg_level_sizes(int grid, int levels);

}  // namespace nops
