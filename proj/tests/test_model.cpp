#include <doctest.h>

#include <cmath>
#include <set>

#include "nops/model.hpp"
#include "nops/training.hpp"

using namespace nops;

namespace {

GridField random_field(FieldKind kind, int grid, std::uint64_t seed, double lo = -1.0,
                       double hi = 1.0) {
    GridField f = GridField::zeros(kind, grid, grid);
    Rng rng(seed);
    for (double& v : f.values.data) v = rng.next_uniform(lo, hi);
    return f;
}

void zero_all_params(SelfComposingOp& model) {
    for (auto& [name, p] : model.named_params())
        for (double& v : p.mutable_value().data) v = 0.0;
}

ModelConfig small_conv_config(int channels = 4, int depth = 1) {
    ModelConfig mc;
    mc.backbone = BackboneKind::Conv;
    mc.channels = channels;
    mc.depth = depth;
    mc.conv_layers = 2;
    mc.init_seed = 11;
    return mc;
}

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
    REQUIRE(a.shape == b.shape);
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("apply_lifting: zero inputs with zero biases give an all-zero state") {
    SelfComposingOp model(small_conv_config());
    // zero the lifting biases, keep kernels
    for (auto& [name, p] : model.named_params())
        if (name == "lift.k.b" || name == "lift.f.b")
            for (double& v : p.mutable_value().data) v = 0.0;

    const GridField k = GridField::zeros(FieldKind::RealScalar, 8, 8);
    const LatentState s = model.apply_lifting(k, nullptr);
    for (double v : s.k_feat.value().data) CHECK(v == 0.0);
    for (double v : s.f_feat.value().data) CHECK(v == 0.0);
    for (double v : s.u.value().data) CHECK(v == 0.0);
}

TEST_CASE("apply_lifting: the initial iterate is exactly zero regardless of inputs") {
    SelfComposingOp model(small_conv_config());
    const GridField k = random_field(FieldKind::RealScalar, 8, 3);
    const GridField f = random_field(FieldKind::RealScalar, 8, 4);
    const LatentState s = model.apply_lifting(k, &f);
    for (double v : s.u.value().data) CHECK(v == 0.0);
}

TEST_CASE("apply_lifting: linear in k with zero biases, to 1e-12") {
    SelfComposingOp model(small_conv_config());
    for (auto& [name, p] : model.named_params())
        if (name == "lift.k.b")
            for (double& v : p.mutable_value().data) v = 0.0;

    const GridField k1 = random_field(FieldKind::RealScalar, 8, 5);
    const GridField k2 = random_field(FieldKind::RealScalar, 8, 6);
    const double a = 0.7, b = -1.3;
    GridField combo = GridField::zeros(FieldKind::RealScalar, 8, 8);
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        combo.values.data[i] = a * k1.values.data[i] + b * k2.values.data[i];

    const Variable f1 = model.apply_lifting(k1, nullptr).k_feat;
    const Variable f2 = model.apply_lifting(k2, nullptr).k_feat;
    const Variable fc = model.apply_lifting(combo, nullptr).k_feat;
    for (std::size_t i = 0; i < fc.value().data.size(); ++i)
        CHECK(std::abs(fc.value().data[i] - (a * f1.value().data[i] + b * f2.value().data[i])) <
              1e-12);
}

TEST_CASE("apply_lifting: grid mismatch rejected") {
    SelfComposingOp model(small_conv_config());
    const GridField k = random_field(FieldKind::RealScalar, 8, 1);
    const GridField f = random_field(FieldKind::RealScalar, 12, 2);
    CHECK_THROWS_AS(model.apply_lifting(k, &f), Error);
}

TEST_CASE("compose: n must be positive; n=1 is exactly one application") {
    SelfComposingOp model(small_conv_config());
    const GridField k = random_field(FieldKind::RealScalar, 8, 7);
    const LatentState s = model.apply_lifting(k, nullptr);
    CHECK_THROWS_AS(model.compose(s, 0), Error);

    const LatentState once = model.compose(s, 1);
    const LatentState manual = model.backbone().apply(s);
    CHECK(once.u.value().data == manual.u.value().data);  // bitwise
}

TEST_CASE("compose: semigroup property, bit-identical") {
    SelfComposingOp model(small_conv_config());
    const GridField k = random_field(FieldKind::RealScalar, 8, 8);
    const LatentState s = model.apply_lifting(k, nullptr);
    const LatentState ab = model.compose(s, 5);
    const LatentState a_then_b = model.compose(model.compose(s, 2), 3);
    CHECK(ab.u.value().data == a_then_b.u.value().data);
}

TEST_CASE("compose: n=3 equals a hand-written loop of three calls, bit-identical") {
    SelfComposingOp model(small_conv_config());
    const GridField k = random_field(FieldKind::RealScalar, 8, 9);
    LatentState manual = model.apply_lifting(k, nullptr);
    const LatentState composed = model.compose(manual, 3);
    for (int i = 0; i < 3; ++i) manual = model.backbone().apply(manual);
    CHECK(composed.u.value().data == manual.u.value().data);
}

TEST_CASE("forward: all-zero parameters output the projection bias field") {
    SelfComposingOp model(small_conv_config(4, 3));
    zero_all_params(model);
    for (auto& [name, p] : model.named_params())
        if (name == "proj.b") p.mutable_value().data[0] = 0.625;

    const GridField k = random_field(FieldKind::RealScalar, 8, 10);
    const GridField out = model.forward_field(k, nullptr);
    REQUIRE(out.values.shape == std::vector<int>{1, 8, 8});
    for (double v : out.values.data) CHECK(v == 0.625);
}

TEST_CASE("forward: output channel count follows the task configuration") {
    ModelConfig mc = small_conv_config();
    SelfComposingOp darcy(mc);
    const GridField k = random_field(FieldKind::RealScalar, 8, 11);
    CHECK(darcy.forward_field(k, nullptr).values.shape == std::vector<int>{1, 8, 8});

    mc.out_channels = 2;
    mc.f_channels = 2;
    SelfComposingOp helm(mc);
    const GridField f = random_field(FieldKind::Complex, 8, 12);
    CHECK(helm.forward_field(k, &f).values.shape == std::vector<int>{2, 8, 8});
}

TEST_CASE("forward: deterministic") {
    SelfComposingOp model(small_conv_config(4, 4));
    const GridField k = random_field(FieldKind::RealScalar, 8, 13);
    const GridField a = model.forward_field(k, nullptr);
    const GridField b = model.forward_field(k, nullptr);
    CHECK(a.values.data == b.values.data);
}

TEST_CASE("forward: full gradient passes grad_check on 16x16 at depth 3") {
    ModelConfig mc = small_conv_config(3, 3);
    SelfComposingOp model(mc);
    const GridField k = random_field(FieldKind::RealScalar, 16, 14, 0.5, 1.5);
    const GridField target = random_field(FieldKind::RealScalar, 16, 15);

    const auto report = grad_check(
        [&] { return compute_loss(LossKind::Mse, model.forward(k, nullptr), target, k.spacing); },
        model.named_params(), 1e-4);
    CHECK(report.pass);
}

TEST_CASE("param_count: identical at depth 1 and depth 5") {
    SelfComposingOp d1(small_conv_config(6, 1));
    SelfComposingOp d5(small_conv_config(6, 5));
    CHECK(d1.param_count() == d5.param_count());

    std::set<std::string> n1, n5;
    for (const auto& [n, p] : d1.named_params()) n1.insert(n);
    for (const auto& [n, p] : d5.named_params()) n5.insert(n);
    CHECK(n1 == n5);
}

TEST_CASE("param_count: closed-form hand sum for C=8, two 3x3 layers") {
    ModelConfig mc = small_conv_config(8, 1);
    mc.conv_layers = 2;
    SelfComposingOp model(mc);
    const long lifting = 2 * (1 * 8 * 1 * 1) + 2 * 8;
    const long backbone = 2 * (8 * 8 * 3 * 3) + 2 * 8;
    const long projection = 8 * 1 * 1 * 1 + 1;
    CHECK(model.param_count() == lifting + backbone + projection);
}

TEST_CASE("conv_block_backbone: zero-initialized block is the identity on the iterate") {
    SelfComposingOp model(small_conv_config(4, 1));
    zero_all_params(model);
    // restore a nonzero lifting so the latent inputs are not trivial
    Rng rng(20);
    for (auto& [name, p] : model.named_params())
        if (name.rfind("lift.", 0) == 0)
            for (double& v : p.mutable_value().data) v = rng.next_uniform(-1.0, 1.0);

    const GridField k = random_field(FieldKind::RealScalar, 8, 21);
    LatentState s = model.apply_lifting(k, nullptr);
    // seed a nontrivial iterate
    DenseArray u0 = DenseArray::zeros({4, 8, 8});
    for (double& v : u0.data) v = rng.next_normal();
    s.u = Variable(u0);

    const LatentState out = model.backbone().apply(s);
    CHECK(max_abs_diff(out.u.value(), u0) == 0.0);
}

TEST_CASE("conv_block_backbone: zero layer count rejected") {
    CHECK_THROWS_AS(ConvBlockBackbone(4, 0, Activation::Gelu, 1), Error);
}

TEST_CASE("conv_block_backbone: output is sensitive to the coefficient input") {
    SelfComposingOp model(small_conv_config(4, 2));
    GridField k = random_field(FieldKind::RealScalar, 8, 22, 0.5, 1.5);
    const GridField base = model.forward_field(k, nullptr);
    k.at(0, 4, 4) += 1e-3;
    const GridField bumped = model.forward_field(k, nullptr);
    CHECK(max_abs_diff(base.values, bumped.values) > 0.0);
}
