#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nops/autodiff.hpp"
#include "nops/grid_field.hpp"
#include "nops/rng.hpp"

namespace nops {

/// Latent iterate plus the lifted conditioning features carried unchanged
/// through every composition.
struct LatentState {
    Variable u;       // [C,H,W] current estimate in latent channels
    Variable k_feat;  // [C,H,W] lifted coefficient/wavenumber features
    Variable f_feat;  // [C,H,W] lifted source features
};

using ParamList = std::vector<std::pair<std::string, Variable>>;

enum class Activation { Gelu, Relu };
enum class BackboneKind { Conv, Mgv };

Variable apply_activation(Activation act, const Variable& x);

/// The repeated block G. Implementations must be pure maps of their
/// parameters and the state: applying twice equals two separate calls.
class Backbone {
  public:
    virtual ~Backbone() = default;
    virtual LatentState apply(const LatentState& s) = 0;
    virtual void collect_params(ParamList& out) const = 0;
    virtual std::string kind() const = 0;
};

struct ModelConfig {
    BackboneKind backbone = BackboneKind::Conv;
    int channels = 24;       // latent width C
    int k_channels = 1;      // channels of the coefficient/wavenumber input
    int f_channels = 1;      // channels of the source input (2 for complex)
    int out_channels = 1;    // 1 Darcy, 2 Helmholtz
    int depth = 1;           // composition count n
    Activation activation = Activation::Gelu;
    // conv backbone
    int conv_layers = 2;
    // multigrid backbone
    int grid = 0;            // finest grid (mgv only)
    int mg_levels = 0;       // 0 = halve down to 8
    int nu_pre = 1;
    int nu_post = 1;
    int m_coarse = 3;
    bool learned_k_restriction = false;
    std::uint64_t init_seed = 1;
};

/// Plain convolutional residual block: the iterate, the coefficient features
/// and the source features are summed, passed through `layers` 3x3
/// conv+activation stages, and added back onto the iterate. A zero-initialized
/// block is the identity on the iterate.
class ConvBlockBackbone : public Backbone {
  public:
    ConvBlockBackbone(int channels, int layers, Activation act, std::uint64_t seed);

    LatentState apply(const LatentState& s) override;
    void collect_params(ParamList& out) const override;
    std::string kind() const override { return "conv"; }

  private:
    Activation act_;
    std::vector<Variable> weights_;  // [C,C,3,3]
    std::vector<Variable> biases_;   // [C]
};

/// O = P o (G o)^n o L with a shared backbone G. L lifts each input with a
/// 1x1 convolution and sets the zero initial iterate; P is a 1x1 projection.
/// The parameter set does not depend on the composition depth n.
class SelfComposingOp {
  public:
    explicit SelfComposingOp(const ModelConfig& cfg);

    /// k and f must share the grid; pass f = nullptr when the task has no
    /// source input (its features become the lifted zero field).
    LatentState apply_lifting(const GridField& k, const GridField* f) const;

    /// Applies the shared backbone n times, holding k_feat/f_feat fixed.
    LatentState compose(const LatentState& s, int n) const;

    Variable project(const LatentState& s) const;

    Variable forward(const GridField& k, const GridField* f) const;

    /// Forward pass without recording gradients.
    GridField forward_field(const GridField& k, const GridField* f) const;

    int depth() const { return cfg_.depth; }
    void set_depth(int n);

    long param_count() const;
    ParamList named_params() const;  // deterministic order
    const ModelConfig& config() const { return cfg_; }
    Backbone& backbone() { return *backbone_; }

  private:
    ModelConfig cfg_;
    Variable lift_k_w_, lift_k_b_;
    Variable lift_f_w_, lift_f_b_;
    Variable proj_w_, proj_b_;
    std::unique_ptr<Backbone> backbone_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initializer used by all modules.
DenseArray init_kernel(std::vector<int> shape, int fan_in, Rng& rng);

}  // namespace nops
