#include "nops/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "nops/metrics.hpp"
#include "nops/rng.hpp"

namespace nops {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

double l2_norm(const DenseArray& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

double h1_seminorm(const DenseArray& a, double h) {
    const int C = a.shape[0], H = a.shape[1], W = a.shape[2];
    double s = 0.0;
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i + 1 < H; ++i)
            for (int j = 0; j < W; ++j) {
                const double d = (a.at3(c, i + 1, j) - a.at3(c, i, j)) / h;
                s += d * d;
            }
        for (int i = 0; i < H; ++i)
            for (int j = 0; j + 1 < W; ++j) {
                const double d = (a.at3(c, i, j + 1) - a.at3(c, i, j)) / h;
                s += d * d;
            }
    }
    return std::sqrt(s);
}

// sqrt(sum of squares of all entries) as a graph node.
Variable l2_norm_var(const Variable& x) { return sqrt_scalar(reduce_sum(mul(x, x))); }

// sqrt(sum |forward differences|^2)/h as a graph node.
Variable h1_seminorm_var(const Variable& x, double h) {
    Variable dh = diff_h(x);
    Variable dw = diff_w(x);
    Variable s = add(reduce_sum(mul(dh, dh)), reduce_sum(mul(dw, dw)));
    return scale(sqrt_scalar(s), 1.0 / h);
}

}  // namespace

std::string loss_name(LossKind k) {
    switch (k) {
        case LossKind::Mse: return "mse";
        case LossKind::RelL2: return "rel_l2";
        case LossKind::RelL2PlusH1: return "rel_l2_plus_h1";
    }
    return "mse";
}

LossKind loss_from_name(const std::string& s) {
    if (s == "mse") return LossKind::Mse;
    if (s == "rel_l2") return LossKind::RelL2;
    if (s == "rel_l2_plus_h1") return LossKind::RelL2PlusH1;
    throw argument_error("unknown loss kind '" + s + "'");
}

Variable compute_loss(LossKind kind, const Variable& pred, const GridField& target, double h) {
    const Variable t(target.values, false);
    if (pred.shape() != t.shape())
        throw dimension_error("compute_loss: pred " + shape_str(pred.shape()) + " vs target " +
                              shape_str(t.shape()));
    if (kind == LossKind::Mse) return mse(pred, t);

    const double tnorm = l2_norm(target.values);
    if (tnorm == 0.0) throw argument_error("compute_loss: relative loss with zero-norm target");
    Variable rel_l2 = scale(l2_norm_var(sub(pred, t)), 1.0 / tnorm);
    if (kind == LossKind::RelL2) return rel_l2;

    const double tsemi = h1_seminorm(target.values, h);
    if (tsemi == 0.0) throw argument_error("compute_loss: relative H1 loss with constant target");
    Variable rel_h1 = scale(h1_seminorm_var(sub(pred, t), h), 1.0 / tsemi);
    return add(rel_l2, rel_h1);
}

void adam_step(const ParamList& params, TrainState& state, const AdamConfig& adam) {
    if (state.m.empty()) {
        for (const auto& [name, p] : params) {
            state.m.emplace_back(name, DenseArray::zeros(p.value().shape));
            state.v.emplace_back(name, DenseArray::zeros(p.value().shape));
        }
    }
    if (state.m.size() != params.size())
        throw dimension_error("adam_step: optimizer state does not match parameter list");

    ++state.step;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& [name, p] = params[pi];
        if (state.m[pi].first != name)
            throw dimension_error("adam_step: state holds '" + state.m[pi].first +
                                  "', parameters hold '" + name + "'");
        Variable param = p;
        const DenseArray& g = param.grad();
        DenseArray& m = state.m[pi].second;
        DenseArray& v = state.v[pi].second;
        double* theta = param.mutable_value().data.data();
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double gi = g.data[i];
            if (!std::isfinite(gi))
                throw numeric_error("adam_step: non-finite gradient in parameter '" + name + "'");
            m.data[i] = adam.beta1 * m.data[i] + (1.0 - adam.beta1) * gi;
            v.data[i] = adam.beta2 * v.data[i] + (1.0 - adam.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            theta[i] -= adam.lr * mhat / (std::sqrt(vhat) + adam.eps);
        }
    }
}

std::string history_csv_header() {
    return "stage_depth,epoch,step,train_loss,val_rel_l2,val_rel_h1,wall_seconds";
}

std::string history_csv_row(const HistoryRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%d,%ld,%.17g,%.17g,%.17g,%.6f", r.stage_depth, r.epoch,
                  r.step, r.train_loss, r.val_rel_l2, r.val_rel_h1, r.wall_seconds);
    return buf;
}

DataSplit split_dataset(std::size_t n, double validation_fraction, std::uint64_t seed) {
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw argument_error("split_dataset: validation fraction must be in [0,1)");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(seed, 0x5eed5));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    const std::size_t n_val = static_cast<std::size_t>(std::lround(validation_fraction * n));
    DataSplit split;
    split.val.assign(idx.begin(), idx.begin() + n_val);
    split.train.assign(idx.begin() + n_val, idx.end());
    return split;
}

std::pair<double, double> validate_model(SelfComposingOp& model, const Dataset& data,
                                         const std::vector<std::size_t>& indices) {
    if (indices.empty()) return {0.0, 0.0};
    double sum_l2 = 0.0, sum_h1 = 0.0;
    for (std::size_t i : indices) {
        const GridField pred =
            model.forward_field(data.conditioning(i), data.source(i));
        const SampleMetrics m = compute_metrics(pred, data.samples[i].target);
        sum_l2 += m.rel_l2;
        sum_h1 += m.rel_h1;
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    return {sum_l2 * inv, sum_h1 * inv};
}

double evaluate_loss(SelfComposingOp& model, const Dataset& data,
                     const std::vector<std::size_t>& indices, LossKind loss) {
    detail::NoGradGuard ng;
    double total = 0.0;
    for (std::size_t i : indices) {
        const Variable pred = model.forward(data.conditioning(i), data.source(i));
        total += compute_loss(loss, pred, data.samples[i].target, data.spacing).value().data[0];
    }
    return indices.empty() ? 0.0 : total / static_cast<double>(indices.size());
}

StageResult train_stage(SelfComposingOp& model, const Dataset& data, const DataSplit& split,
                        const TrainConfig& cfg, int depth, TrainState& state) {
    if (depth < 1) throw argument_error("train_stage: depth must be positive");
    model.set_depth(depth);

    StageResult result;
    result.depth = depth;
    if (cfg.epochs_per_stage <= 0) return result;  // untouched model, empty history

    const ParamList params = model.named_params();
    std::vector<std::size_t> order = split.train;
    if (order.empty()) throw argument_error("train_stage: empty training split");

    auto log_row = [&](int epoch, double train_loss) {
        auto [val_l2, val_h1] = validate_model(model, data, split.val);
        HistoryRow row;
        row.stage_depth = depth;
        row.epoch = epoch;
        row.step = state.step;
        row.train_loss = train_loss;
        row.val_rel_l2 = val_l2;
        row.val_rel_h1 = val_h1;
        row.wall_seconds = now_seconds();
        result.history.push_back(row);
        return row;
    };

    // Pre-update evaluation: how the carried-over weights perform at this depth.
    double loss_now = evaluate_loss(model, data, split.train, cfg.loss);
    log_row(0, loss_now);

    double best_val = result.history.back().val_rel_l2;
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= cfg.epochs_per_stage; ++epoch) {
        const double lr_scale =
            cfg.cosine_decay
                ? 0.5 * (1.0 + std::cos(3.14159265358979323846 * (epoch - 1) / cfg.epochs_per_stage))
                : 1.0;
        AdamConfig adam = cfg.adam;
        adam.lr *= lr_scale;

        // Seed-driven shuffle, unique per (seed, stage, epoch).
        Rng rng(derive_seed(cfg.seed, (static_cast<std::uint64_t>(state.stage_index) << 32) ^
                                          static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            Variable batch_loss;
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                const Variable pred = model.forward(data.conditioning(i), data.source(i));
                const Variable li =
                    compute_loss(cfg.loss, pred, data.samples[i].target, data.spacing);
                batch_loss = batch_loss.defined() ? add(batch_loss, li) : li;
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - start));
            if (!std::isfinite(batch_loss.value().data[0]))
                throw numeric_error("train_stage: non-finite loss at step " +
                                    std::to_string(state.step));
            for (const auto& [name, p] : params) const_cast<Variable&>(p).zero_grad();
            backward(batch_loss);
            adam_step(params, state, adam);
        }

        loss_now = evaluate_loss(model, data, split.train, cfg.loss);
        const HistoryRow row = log_row(epoch, loss_now);

        if (!split.val.empty()) {
            if (row.val_rel_l2 < best_val) {
                best_val = row.val_rel_l2;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= cfg.patience) {
                break;
            }
        }
    }

    result.final_train_loss = result.history.back().train_loss;
    return result;
}

std::vector<StageResult> train_and_unroll(SelfComposingOp& model, const Dataset& data,
                                          const TrainConfig& cfg, const StageCallback& on_stage) {
    if (cfg.schedule.empty()) throw argument_error("train_and_unroll: empty stage schedule");
    for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
        if (cfg.schedule[i] < 1)
            throw argument_error("train_and_unroll: depths must be at least 1");
        if (i > 0 && cfg.schedule[i] <= cfg.schedule[i - 1])
            throw argument_error("train_and_unroll: schedule must be strictly increasing");
    }

    const DataSplit split = split_dataset(data.samples.size(), cfg.validation_fraction, cfg.seed);
    TrainState state;
    std::vector<StageResult> results;
    for (std::size_t si = 0; si < cfg.schedule.size(); ++si) {
        state.stage_index = static_cast<int>(si);
        StageResult r = train_stage(model, data, split, cfg, cfg.schedule[si], state);
        results.push_back(r);
        if (on_stage) on_stage(static_cast<int>(si), results.back(), model, state);
    }
    return results;
}

}  // namespace nops
