#include "lrc/regularizer.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "lrc/errors.hpp"

namespace lrc {

namespace {

constexpr std::size_t kMaxEnumerationSigns = 20;

MonteCarloEstimate running_stats(double sum, double sum_sq, std::size_t k) {
    MonteCarloEstimate out;
    const double kd = static_cast<double>(k);
    out.value = sum / kd;
    if (k > 1) {
        const double var = std::max(0.0, (sum_sq - sum * sum / kd) / (kd - 1.0));
        out.std_error = std::sqrt(var / kd);
    }
    return out;
}

}  // namespace

std::vector<double> ce_pairwise_diffs(const Tensor& scores, const std::vector<int>& labels) {
    detail::check_scores(scores, labels, "ce_pairwise_diffs");
    std::vector<double> diffs;
    diffs.reserve(scores.rows() * (scores.cols() - 1));
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            if (j != y) diffs.push_back(scores.at(i, j) - scores.at(i, y));
        }
    }
    return diffs;
}

MonteCarloEstimate lrc_value_hinge(const std::vector<double>& margins, std::size_t k_samples, Prng& p) {
    if (margins.empty()) throw std::invalid_argument("lrc_value_hinge: empty margin vector");
    if (k_samples < 1) throw std::invalid_argument("lrc_value_hinge: k_samples must be >= 1");
    const double batch = static_cast<double>(margins.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < k_samples; ++k) {
        const SignVector signs = sample_signs(p, margins.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < margins.size(); ++i) acc += signs[i] * margins[i];
        const double v = std::abs(acc) / batch;
        sum += v;
        sum_sq += v * v;
    }
    return running_stats(sum, sum_sq, k_samples);
}

MonteCarloEstimate lrc_value_ce(const Tensor& scores, const std::vector<int>& labels,
                                std::size_t k_samples, Prng& p) {
    if (k_samples < 1) throw std::invalid_argument("lrc_value_ce: k_samples must be >= 1");
    const std::vector<double> diffs = ce_pairwise_diffs(scores, labels);
    const double norm = static_cast<double>(scores.rows()) * static_cast<double>(scores.cols());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < k_samples; ++k) {
        const SignVector signs = sample_signs(p, diffs.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < diffs.size(); ++i) acc += signs[i] * diffs[i];
        const double v = std::abs(acc) / norm;
        sum += v;
        sum_sq += v * v;
    }
    return running_stats(sum, sum_sq, k_samples);
}

double mean_abs_sign_combination(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mean_abs_sign_combination: empty vector");
    if (values.size() > kMaxEnumerationSigns) {
        throw CapacityError("mean_abs_sign_combination: " + std::to_string(values.size()) +
                            " signs exceed the enumeration limit of " +
                            std::to_string(kMaxEnumerationSigns));
    }
    const std::size_t n = values.size();
    const std::uint64_t patterns = std::uint64_t{1} << n;
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += ((mask >> i) & 1U) ? -values[i] : values[i];
        }
        total += std::abs(acc);
    }
    return total / static_cast<double>(patterns);
}

double lrc_exact_hinge(const std::vector<double>& margins) {
    return mean_abs_sign_combination(margins) / static_cast<double>(margins.size());
}

double lrc_exact_ce(const Tensor& scores, const std::vector<int>& labels) {
    const std::vector<double> diffs = ce_pairwise_diffs(scores, labels);
    const double norm = static_cast<double>(scores.rows()) * static_cast<double>(scores.cols());
    return mean_abs_sign_combination(diffs) / norm;
}

}  // namespace lrc
