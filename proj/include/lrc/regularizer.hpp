#pragma once

// Sign-correlation regularizer terms, in three forms: differentiable
// tape builders (the training-time objects), value-only Monte-Carlo
// estimators (for logging and cross-checks), and exact enumeration
// over all sign patterns (the verification oracle).
//
// Per sign draw the hinge form is (1/B) |sum_i sigma_i m_i| over the
// batch margins, and the multiclass score form is
// (1/(B c)) |sum_i sum_{j != y_i} sigma_ij (s_ij - s_iy_i)|; a
// regularizer value averages K independent draws. Signs are constants:
// gradients flow through margins and scores only.

#include <cstdint>
#include <utility>
#include <vector>

#include "lrc/losses.hpp"
#include "lrc/rng.hpp"
#include "lrc/tape.hpp"
#include "lrc/tensor.hpp"

namespace lrc {

struct LrcConfig {
    double lambda{0.0};
    std::size_t k_samples{1};
    double gamma{1.0};  // hinge margin scale, carried to the loss
    std::uint64_t seed{0};

    void validate() const {
        if (!(lambda >= 0.0)) {
            throw std::invalid_argument("LrcConfig: lambda must be >= 0, got " + std::to_string(lambda));
        }
        if (k_samples < 1) throw std::invalid_argument("LrcConfig: k_samples must be >= 1");
        if (!(gamma > 0.0)) {
            throw std::invalid_argument("LrcConfig: gamma must be > 0, got " + std::to_string(gamma));
        }
    }
};

// A built regularizer: the scalar tape node plus its forward value and
// the standard error across the K averaged draws (0 when K = 1).
struct RegTerm {
    int node{-1};
    double value{0.0};
    double std_error{0.0};
};

struct MonteCarloEstimate {
    double value{0.0};
    double std_error{0.0};
};

// --- tape builders ----------------------------------------------------

template <typename T>
int lrc_hinge_sample(TapeT<T>& tape, int margins, const SignVector& signs) {
    const TensorT<T>& m = tape.value(margins);
    if (m.rank() != 1 || m.numel() == 0) {
        throw std::invalid_argument("lrc_hinge_sample: margins must be a non-empty vector, got " +
                                    shape_str(m.shape));
    }
    if (signs.size() != m.numel()) {
        throw std::invalid_argument("lrc_hinge_sample: " + std::to_string(signs.size()) + " signs for " +
                                    std::to_string(m.numel()) + " margins");
    }
    TensorT<T> w = TensorT<T>::zeros(m.shape);
    for (std::size_t i = 0; i < m.numel(); ++i) w.data[i] = static_cast<T>(signs[i]);
    const double batch = static_cast<double>(m.numel());
    return tape.scale(tape.abs(tape.inner(margins, std::move(w))), 1.0 / batch);
}

// The double sum collapses to one inner product with a constant weight
// matrix: weight sigma_ij at (i, j != y_i) and minus the row's sign sum
// at (i, y_i). signs are row-major, row i covering classes j != y_i in
// ascending order.
template <typename T>
int lrc_ce_sample(TapeT<T>& tape, int scores, const std::vector<int>& labels, const SignVector& signs) {
    const TensorT<T>& s = tape.value(scores);
    detail::check_scores(s, labels, "lrc_ce_sample");
    const std::size_t batch = s.rows();
    const std::size_t classes = s.cols();
    if (signs.size() != batch * (classes - 1)) {
        throw std::invalid_argument("lrc_ce_sample: " + std::to_string(signs.size()) + " signs for " +
                                    std::to_string(batch) + "x" + std::to_string(classes - 1) + " slots");
    }
    TensorT<T> w = TensorT<T>::zeros(s.shape);
    std::size_t next = 0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        double row_sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            if (j == y) continue;
            const double sign = signs[next++];
            w.at(i, j) = static_cast<T>(sign);
            row_sum += sign;
        }
        w.at(i, y) = static_cast<T>(-row_sum);
    }
    return tape.scale(tape.abs(tape.inner(scores, std::move(w))),
                      1.0 / (static_cast<double>(batch) * static_cast<double>(classes)));
}

// Average of K fresh-sign sample terms on the tape. The margins node
// for the hinge form is built from the scores, sharing the forward
// pass with the loss.
template <typename T>
RegTerm lrc_regularizer(TapeT<T>& tape, int scores, const std::vector<int>& labels, const LossKind& kind,
                        const LrcConfig& cfg, Prng& p) {
    cfg.validate();
    const TensorT<T>& s = tape.value(scores);
    detail::check_scores(s, labels, "lrc_regularizer");
    const std::size_t batch = s.rows();
    const std::size_t classes = s.cols();
    const int margins = kind.is_hinge() ? margin(tape, scores, labels) : -1;

    const std::size_t k_total = cfg.k_samples;
    int acc = -1;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < k_total; ++k) {
        int term;
        if (kind.is_hinge()) {
            term = lrc_hinge_sample(tape, margins, sample_signs(p, batch));
        } else {
            term = lrc_ce_sample(tape, scores, labels, sample_sign_matrix(p, batch, classes - 1));
        }
        const double v = static_cast<double>(tape.value(term).value());
        sum += v;
        sum_sq += v * v;
        acc = k == 0 ? term : tape.add(acc, term);
    }
    RegTerm out;
    out.node = k_total == 1 ? acc : tape.scale(acc, 1.0 / static_cast<double>(k_total));
    out.value = static_cast<double>(tape.value(out.node).value());
    if (k_total > 1) {
        const double kd = static_cast<double>(k_total);
        const double var = std::max(0.0, (sum_sq - sum * sum / kd) / (kd - 1.0));
        out.std_error = std::sqrt(var / kd);
    }
    return out;
}

// --- value-only estimators and enumeration oracles --------------------

// Flattened score differences s_ij - s_iy_i for j != y_i, row-major,
// ascending j within each row: the CE regularizer's sign slots.
std::vector<double> ce_pairwise_diffs(const Tensor& scores, const std::vector<int>& labels);

// Monte-Carlo mean and standard error of the per-draw term, without a
// tape. Matches lrc_regularizer's value when fed the same sign stream.
MonteCarloEstimate lrc_value_hinge(const std::vector<double>& margins, std::size_t k_samples, Prng& p);
MonteCarloEstimate lrc_value_ce(const Tensor& scores, const std::vector<int>& labels,
                                std::size_t k_samples, Prng& p);

// Exact E over all 2^n sign patterns of |sum_i sigma_i v_i| (no
// normalization). Capacity error beyond 20 signs.
double mean_abs_sign_combination(const std::vector<double>& values);

// Exact expectations of the per-draw regularizer terms.
double lrc_exact_hinge(const std::vector<double>& margins);
double lrc_exact_ce(const Tensor& scores, const std::vector<int>& labels);

}  // namespace lrc
