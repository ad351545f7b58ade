#pragma once

// Margin, clipped hinge, and cross-entropy losses, in two forms:
// tape builders (differentiable, for training) and plain value
// helpers (for evaluation and logging without a tape).

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrc/tape.hpp"
#include "lrc/tensor.hpp"

namespace lrc {

// Loss selector. gamma is the hinge margin scale and must be positive;
// the cross-entropy path ignores it.
struct LossKind {
    enum class Kind { Hinge, CrossEntropy };

    Kind kind{Kind::Hinge};
    double gamma{1.0};

    static LossKind hinge(double gamma = 1.0) {
        if (!(gamma > 0.0)) {
            throw std::invalid_argument("LossKind: gamma must be > 0, got " + std::to_string(gamma));
        }
        return LossKind{Kind::Hinge, gamma};
    }
    static LossKind cross_entropy() { return LossKind{Kind::CrossEntropy, 1.0}; }

    bool is_hinge() const noexcept { return kind == Kind::Hinge; }
};

// Clipped hinge: 1 for x < 0, 1 - x on [0, 1], 0 for x > 1.
inline double phi(double x) { return x < 0.0 ? 1.0 : (x > 1.0 ? 0.0 : 1.0 - x); }

namespace detail {

template <typename T>
void check_scores(const TensorT<T>& scores, const std::vector<int>& labels, const char* who) {
    if (scores.rank() != 2 || scores.cols() < 2) {
        throw std::invalid_argument(std::string(who) + ": need a B x c score matrix with c >= 2, got " +
                                    shape_str(scores.shape));
    }
    if (labels.size() != scores.rows()) {
        throw std::invalid_argument(std::string(who) + ": " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(scores.rows()) + " rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= scores.cols()) {
            throw std::invalid_argument(std::string(who) + ": label " + std::to_string(labels[i]) +
                                        " out of range [0, " + std::to_string(scores.cols()) +
                                        ") at row " + std::to_string(i));
        }
    }
}

}  // namespace detail

// --- tape builders ---------------------------------------------------

// Per-row margin: score[y] - max over the other classes. Masking the
// true class with the lowest finite value keeps it out of the max
// without introducing infinities.
template <typename T>
int margin(TapeT<T>& tape, int scores, const std::vector<int>& labels) {
    detail::check_scores(tape.value(scores), labels, "margin");
    int own = tape.gather(scores, labels);
    int others = tape.mask_fill(scores, labels, std::numeric_limits<T>::lowest());
    int best_other = tape.max_over_axis(others);
    return tape.sub(own, best_other);
}

// Batch hinge loss: mean of phi(margin / gamma), always in [0, 1].
template <typename T>
int hinge_loss(TapeT<T>& tape, int scores, const std::vector<int>& labels, double gamma) {
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("hinge_loss: gamma must be > 0, got " + std::to_string(gamma));
    }
    int m = margin(tape, scores, labels);
    return tape.mean(tape.phi(tape.scale(m, 1.0 / gamma)));
}

// Per-row log softmax probability of the labeled class,
// score[y] - logsumexp(row), computed with the shifted logsumexp.
template <typename T>
int softmax_log_prob(TapeT<T>& tape, int scores, const std::vector<int>& labels) {
    detail::check_scores(tape.value(scores), labels, "softmax_log_prob");
    return tape.sub(tape.gather(scores, labels), tape.logsumexp(scores));
}

// Batch cross-entropy: mean of -log softmax probability.
template <typename T>
int cross_entropy_loss(TapeT<T>& tape, int scores, const std::vector<int>& labels) {
    detail::check_scores(tape.value(scores), labels, "cross_entropy_loss");
    return tape.mean(tape.sub(tape.logsumexp(scores), tape.gather(scores, labels)));
}

template <typename T>
int loss_node(TapeT<T>& tape, int scores, const std::vector<int>& labels, const LossKind& kind) {
    return kind.is_hinge() ? hinge_loss(tape, scores, labels, kind.gamma)
                           : cross_entropy_loss(tape, scores, labels);
}

// --- value helpers (no tape) -----------------------------------------

template <typename T>
std::vector<T> margin_values(const TensorT<T>& scores, const std::vector<int>& labels) {
    detail::check_scores(scores, labels, "margin_values");
    std::vector<T> out(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        T best = std::numeric_limits<T>::lowest();
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            if (j != y) best = std::max(best, scores.at(i, j));
        }
        out[i] = scores.at(i, y) - best;
    }
    return out;
}

template <typename T>
T logsumexp_row(const TensorT<T>& scores, std::size_t row) {
    T mx = scores.at(row, 0);
    for (std::size_t j = 1; j < scores.cols(); ++j) mx = std::max(mx, scores.at(row, j));
    T acc = 0;
    for (std::size_t j = 0; j < scores.cols(); ++j) acc += std::exp(scores.at(row, j) - mx);
    return mx + std::log(acc);
}

template <typename T>
double hinge_value(const TensorT<T>& scores, const std::vector<int>& labels, double gamma) {
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("hinge_value: gamma must be > 0, got " + std::to_string(gamma));
    }
    std::vector<T> m = margin_values(scores, labels);
    double acc = 0.0;
    for (T v : m) acc += phi(static_cast<double>(v) / gamma);
    return acc / static_cast<double>(m.size());
}

template <typename T>
std::vector<T> neg_log_prob_values(const TensorT<T>& scores, const std::vector<int>& labels) {
    detail::check_scores(scores, labels, "neg_log_prob_values");
    std::vector<T> out(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        out[i] = logsumexp_row(scores, i) - scores.at(i, static_cast<std::size_t>(labels[i]));
    }
    return out;
}

template <typename T>
double cross_entropy_value(const TensorT<T>& scores, const std::vector<int>& labels) {
    std::vector<T> nlp = neg_log_prob_values(scores, labels);
    double acc = 0.0;
    for (T v : nlp) acc += static_cast<double>(v);
    return acc / static_cast<double>(nlp.size());
}

template <typename T>
double loss_value(const TensorT<T>& scores, const std::vector<int>& labels, const LossKind& kind) {
    return kind.is_hinge() ? hinge_value(scores, labels, kind.gamma)
                           : cross_entropy_value(scores, labels);
}

}  // namespace lrc
