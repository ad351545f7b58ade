#pragma once

// Empirical sign-correlation complexity estimation and bound
// verification on desk-scale networks.
//
// Every estimator reduces to one core: a finite class of per-slot
// value vectors (network outputs composed with a loss, evaluated at
// sampled parameter-ball members), Monte-Carlo or exhaustive
// expectation over random sign assignments of the per-draw supremum of
// the normalized sign-weighted sum. Sampled sups underestimate the
// true ball sup, so bound checks are conservative on the left side.
//
// verify_theorem1 checks the margin-loss chain
//   lhs  <=  |mean center correlation|  +  delta_margin / gamma
// with the same sign draws on both sides (deterministic given shared
// samples), plus the perturbation premise delta_margin <= 3 l_hat r.
// verify_theorem2 checks the cross-entropy contraction
//   lhs  <=  sqrt(2(c-1)) * pairwise-difference sup estimate
// statistically, within 3 combined standard errors. Both reports also
// carry the closed-form right side with the Lipschitz plug-in term.

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "lrc/data.hpp"
#include "lrc/network.hpp"
#include "lrc/rng.hpp"

namespace lrc {

struct RcEstimate {
    double value{0.0};
    double std_error{0.0};
    std::size_t sigma_samples{0};
    std::size_t ball_samples{1};  // 1 for estimates over an explicit class
};

struct LipschitzEstimate {
    double l_hat{0.0};         // max-norm output change per unit parameter change
    double delta_margin{0.0};  // max observed margin change over the sample
    std::size_t sample_count{0};
};

struct EstimateBudgets {
    std::size_t sigma_samples{2000};
    std::size_t ball_samples{64};
    bool enumerate_sigma{false};  // exhaustive sign patterns instead of Monte-Carlo
    std::size_t threads{1};
};

struct BoundReport {
    int theorem{1};
    RcEstimate lhs;
    double first_term{0.0};  // |mean center correlation|, paired with the lhs draws
    double first_term_stderr{0.0};
    double delta_margin{0.0};
    double l_hat{0.0};
    double rhs{0.0};  // the bound actually compared against lhs
    double rhs_stderr{0.0};
    bool satisfied{false};
    double margin_of_satisfaction{0.0};
    double statement_first_term{0.0};  // closed-form first term at the center
    double statement_rhs{0.0};         // statement_first_term + Lipschitz plug-in term
    double perturbation_ratio{0.0};    // delta_margin / (l_hat * radius)
    double radius{0.0};
    double gamma{1.0};
    EstimateBudgets budgets;
    std::uint64_t seed{0};
};

// Monte-Carlo estimate over sign draws of the sup over a finite class:
// each member is a vector of n per-point values, the per-draw statistic
// is sup over members of (1/n) sum_i sigma_i value_i.
RcEstimate estimate_global_rc(const std::vector<std::vector<double>>& function_class,
                              std::size_t sigma_samples, Prng& p);

// Exact expectation over all 2^n sign patterns; capacity error past 20.
RcEstimate enumerate_global_rc(const std::vector<std::vector<double>>& function_class);

// Sup over a sampled parameter ball of the clipped-hinge class
// phi(margin/gamma) (estimate_lrc_margin) or the negative log softmax
// class (estimate_lrc_ce). The ball and sign draws both come from p,
// ball first; growing ball_samples extends the same member prefix.
RcEstimate estimate_lrc_margin(const Network& center, double r, const Dataset& batch, double gamma,
                               const EstimateBudgets& budgets, Prng& p);
RcEstimate estimate_lrc_ce(const Network& center, double r, const Dataset& batch,
                           const EstimateBudgets& budgets, Prng& p);

// Plug-in constants over the shared ball sample: worst-case output
// change per unit parameter change, and the worst observed margin
// change. Requires at least one nonzero offset.
LipschitzEstimate estimate_lipschitz(const Network& center, double r, const Dataset& batch,
                                     const BallSample& ball);

// Per-member raw margin values over the batch, the scalar reduction
// used by the "global" estimation kind.
std::vector<std::vector<double>> margin_value_class(const Network& center, const BallSample& ball,
                                                    const Dataset& batch);

BoundReport verify_theorem1(const Network& center, double r, const Dataset& batch, double gamma,
                            const EstimateBudgets& budgets, std::uint64_t seed);
BoundReport verify_theorem2(const Network& center, double r, const Dataset& batch,
                            const EstimateBudgets& budgets, std::uint64_t seed);

// log(1 + sum_j exp(v_j)), shifted for stability.
double logsumexp1p(const std::vector<double>& v);

// Checks |logsumexp1p(u) - logsumexp1p(v)| <= sqrt(m) ||u - v||_2 on
// random pairs with dimension m in [1, max_dim]; the premise behind
// the theorem-2 contraction factor.
struct LipschitzPremiseReport {
    double max_ratio{0.0};
    std::size_t pairs{0};
    std::size_t max_dim{0};
    bool pass{false};
};
LipschitzPremiseReport check_logsumexp1p_lipschitz(std::size_t pairs, std::size_t max_dim, Prng& p);

nlohmann::ordered_json rc_estimate_json(const RcEstimate& e);
nlohmann::ordered_json bound_report_json(const BoundReport& r);

}  // namespace lrc
