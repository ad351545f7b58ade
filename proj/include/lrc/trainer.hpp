#pragma once

// Minibatch SGD with momentum and weight decay over the regularized
// objective loss + lambda * R, with step and cosine learning-rate
// schedules and per-epoch metrics.
//
// Determinism: the seed fully determines initialization, shuffles, and
// sign draws through separate per-role streams, so adding or removing
// the regularizer never perturbs the shuffle sequence. With lambda = 0
// the objective is the bare loss node (R is computed off the tape for
// logging only), which makes the weight trajectory bit-identical to a
// regularizer-free run.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "lrc/data.hpp"
#include "lrc/errors.hpp"
#include "lrc/losses.hpp"
#include "lrc/network.hpp"
#include "lrc/regularizer.hpp"
#include "lrc/rng.hpp"
#include "lrc/tape.hpp"

namespace lrc {

struct ScheduleConfig {
    enum class Kind { Step, Cosine };

    Kind kind{Kind::Step};
    std::vector<std::size_t> milestones;  // step only; empty resolves to 50% and 75% of epochs
    double divisor{10.0};                 // step only; rate divided by this at each milestone
};

// Step: lr0 divided once by divisor^(milestones passed), so decimal
// targets (0.1 -> 0.01 -> 0.001) land on their exact representations.
// Cosine: lr0 (1 + cos(pi epoch/epochs)) / 2, exactly 0 at the end.
inline double lr_at(const ScheduleConfig& schedule, std::size_t epoch, std::size_t epochs, double lr0) {
    if (schedule.kind == ScheduleConfig::Kind::Cosine) {
        if (epochs == 0 || epoch >= epochs) return 0.0;
        return lr0 *
               (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                               static_cast<double>(epochs))) /
               2.0;
    }
    double divisor = 1.0;
    for (std::size_t m : schedule.milestones) {
        if (epoch >= m) divisor *= schedule.divisor;
    }
    return lr0 / divisor;
}

inline ScheduleConfig resolved_schedule(ScheduleConfig schedule, std::size_t epochs) {
    if (schedule.kind == ScheduleConfig::Kind::Step && schedule.milestones.empty()) {
        schedule.milestones = {epochs / 2, (3 * epochs) / 4};
    }
    return schedule;
}

struct TrainConfig {
    LossKind loss{};
    LrcConfig lrc{};
    std::size_t epochs{200};
    std::size_t batch_size{32};
    double lr0{0.05};
    double momentum{0.9};
    double weight_decay{0.0002};
    ScheduleConfig schedule{};
    std::uint64_t seed{1};

    enum class Precision { F32, F64 };
    Precision precision{Precision::F64};
    bool bit_exact{false};
    // Off: no sign draws at all and R is logged as 0. Exists to verify
    // that lambda = 0 training is equivalent to no regularizer.
    bool regularizer_enabled{true};

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(lr0 > 0.0)) throw std::invalid_argument("TrainConfig: lr0 must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) {
            throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
        }
        if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
        if (!(schedule.divisor > 0.0)) throw std::invalid_argument("TrainConfig: divisor must be > 0");
        if (loss.is_hinge() && !(loss.gamma > 0.0)) {
            throw std::invalid_argument("TrainConfig: gamma must be > 0");
        }
        lrc.validate();
    }
};

struct MetricsRecord {
    std::size_t epoch{0};
    double train_loss{0.0};
    double reg_value{0.0};
    double test_loss{0.0};
    double test_accuracy{0.0};
    double lr{0.0};
    std::uint64_t wall_ms{0};
};

struct TrainResult {
    Network net;
    std::vector<MetricsRecord> metrics;
};

using EpochHook = std::function<void(const Network&, const MetricsRecord&)>;

template <typename T>
void sgd_step(TensorT<T>& w, const TensorT<T>& grads, TensorT<T>& velocity, double lr, double momentum,
              double weight_decay) {
    if (grads.shape != w.shape || velocity.shape != w.shape) {
        throw std::invalid_argument("sgd_step: gradient shape " + shape_str(grads.shape) +
                                    " does not match parameters " + shape_str(w.shape));
    }
    const T mu = static_cast<T>(momentum);
    const T wd = static_cast<T>(weight_decay);
    const T step = static_cast<T>(lr);
    for (std::size_t i = 0; i < w.numel(); ++i) {
        velocity.data[i] = mu * velocity.data[i] + (grads.data[i] + wd * w.data[i]);
        w.data[i] -= step * velocity.data[i];
    }
}

// Lowest index wins ties, so prediction is deterministic.
template <typename T>
std::size_t argmax_row(const TensorT<T>& scores, std::size_t row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.cols(); ++j) {
        if (scores.at(row, j) > scores.at(row, best)) best = j;
    }
    return best;
}

template <typename T>
Tensor widen(const TensorT<T>& t) {
    return Tensor(t.shape, std::vector<double>(t.data.begin(), t.data.end()));
}

// (loss, accuracy) on the full set, without the regularizer.
template <typename T>
std::pair<double, double> evaluate(const MlpConfig& config, const TensorT<T>& w, const Dataset& data,
                                   const LossKind& kind) {
    data.validate();
    const TensorT<T> scores = forward_values(config, w, cast_tensor<T>(data.inputs));
    const double loss = loss_value(scores, data.labels, kind);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (argmax_row(scores, i) == static_cast<std::size_t>(data.labels[i])) ++hits;
    }
    return {loss, static_cast<double>(hits) / static_cast<double>(data.size())};
}

namespace detail {

// R for logging when it is not part of the objective; consumes the
// same number of sign draws as the on-tape construction would.
template <typename T>
double reg_value_off_tape(const TensorT<T>& scores, const std::vector<int>& labels,
                          const LossKind& loss, const LrcConfig& lrc, Prng& sigma_rng) {
    if (loss.is_hinge()) {
        const std::vector<T> m = margin_values(scores, labels);
        return lrc_value_hinge(std::vector<double>(m.begin(), m.end()), lrc.k_samples, sigma_rng).value;
    }
    return lrc_value_ce(widen(scores), labels, lrc.k_samples, sigma_rng).value;
}

template <typename T>
TrainResult train_typed(const MlpConfig& arch, const Dataset& train_set, const Dataset& test_set,
                        const TrainConfig& cfg, const EpochHook& hook) {
    cfg.validate();
    arch.validate();
    for (const Dataset* ds : {&train_set, &test_set}) {
        ds->validate();
        if (ds->dim() != arch.input_dim || ds->classes != arch.classes) {
            throw std::invalid_argument("train: dataset (d=" + std::to_string(ds->dim()) + ", c=" +
                                        std::to_string(ds->classes) + ") does not match network (d=" +
                                        std::to_string(arch.input_dim) + ", c=" +
                                        std::to_string(arch.classes) + ")");
        }
    }

    Prng init_rng(cfg.seed + seed_role::init);
    Network net = init_network(arch, init_rng);
    TensorT<T> w = cast_tensor<T>(net.w);
    TensorT<T> velocity = TensorT<T>::zeros(w.shape);
    Prng shuffle_rng(cfg.seed + seed_role::shuffle);
    Prng sigma_rng(cfg.seed + seed_role::sigma);
    const ScheduleConfig schedule = resolved_schedule(cfg.schedule, cfg.epochs);

    const std::size_t n = train_set.size();
    const std::size_t d = train_set.dim();
    std::vector<std::size_t> order(n);

    TrainResult result;
    result.metrics.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(schedule, epoch, cfg.epochs, cfg.lr0);

        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % (i + 1));
            std::swap(order[i], order[j]);
        }

        double loss_weighted = 0.0;
        double reg_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++batches) {
            const std::size_t count = std::min(cfg.batch_size, n - begin);
            TensorT<T> xb = TensorT<T>::zeros({count, d});
            std::vector<int> yb(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = order[begin + i];
                for (std::size_t j = 0; j < d; ++j) {
                    xb.at(i, j) = static_cast<T>(train_set.inputs.at(src, j));
                }
                yb[i] = train_set.labels[src];
            }

            TapeT<T> tape;
            const int w_node = tape.leaf(w, true);
            const int x_node = tape.leaf(std::move(xb));
            const int scores = forward(tape, arch, w_node, x_node);
            const int loss = loss_node(tape, scores, yb, cfg.loss);
            int root = loss;
            double reg_value = 0.0;
            if (cfg.regularizer_enabled) {
                if (cfg.lrc.lambda > 0.0) {
                    const RegTerm reg = lrc_regularizer(tape, scores, yb, cfg.loss, cfg.lrc, sigma_rng);
                    reg_value = reg.value;
                    root = tape.add(loss, tape.scale(reg.node, cfg.lrc.lambda));
                } else {
                    reg_value =
                        reg_value_off_tape(tape.value(scores), yb, cfg.loss, cfg.lrc, sigma_rng);
                }
            }
            const double loss_val = static_cast<double>(tape.value(loss).value());
            const double objective = static_cast<double>(tape.value(root).value());
            if (!std::isfinite(objective) || !std::isfinite(reg_value)) {
                throw NumericalError("train: non-finite objective at epoch " + std::to_string(epoch) +
                                     ", minibatch " + std::to_string(batches));
            }
            tape.backward(root);
            sgd_step(w, tape.grad(w_node), velocity, lr, cfg.momentum, cfg.weight_decay);
            loss_weighted += loss_val * static_cast<double>(count);
            reg_sum += reg_value;
        }

        const auto [test_loss, test_acc] = evaluate(arch, w, test_set, cfg.loss);
        MetricsRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_weighted / static_cast<double>(n);
        rec.reg_value = reg_sum / static_cast<double>(batches);
        rec.test_loss = test_loss;
        rec.test_accuracy = test_acc;
        rec.lr = lr;
        rec.wall_ms = cfg.bit_exact
                          ? 0
                          : static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                           std::chrono::steady_clock::now() - t0)
                                                           .count());
        result.metrics.push_back(rec);
        if (hook) {
            net.w = widen(w);
            hook(net, rec);
        }
    }
    net.w = widen(w);
    result.net = std::move(net);
    return result;
}

}  // namespace detail

inline TrainResult train(const MlpConfig& arch, const Dataset& train_set, const Dataset& test_set,
                         const TrainConfig& cfg, const EpochHook& hook = {}) {
    return cfg.precision == TrainConfig::Precision::F32
               ? detail::train_typed<float>(arch, train_set, test_set, cfg, hook)
               : detail::train_typed<double>(arch, train_set, test_set, cfg, hook);
}

}  // namespace lrc
