#include "lrc/lab.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>

#include "lrc/errors.hpp"
#include "lrc/losses.hpp"
#include "lrc/regularizer.hpp"

namespace lrc {

namespace {

// Absorbs last-ulp rounding in chains that hold exactly in real
// arithmetic; all compared quantities are O(1).
constexpr double kRoundingGuard = 1e-9;
constexpr std::size_t kMaxEnumSlots = 20;

struct MeanStats {
    double value{0.0};
    double std_error{0.0};
};

// Fixed-order reduction: results do not depend on thread count.
MeanStats reduce_in_order(const std::vector<double>& xs) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double x : xs) {
        sum += x;
        sum_sq += x * x;
    }
    MeanStats out;
    const double n = static_cast<double>(xs.size());
    out.value = sum / n;
    if (xs.size() > 1) {
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
        out.std_error = std::sqrt(var / n);
    }
    return out;
}

struct CorrelationSummary {
    MeanStats sup;
    std::vector<MeanStats> tracked;  // signed correlation means, paired with the sup draws
    std::size_t draws{0};
};

double correlate(const std::vector<double>& values, const SignVector& signs, double norm) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += signs[i] * values[i];
    return norm * acc;
}

void check_class(const std::vector<std::vector<double>>& members, const char* who) {
    if (members.empty()) throw std::invalid_argument(std::string(who) + ": empty function class");
    if (members[0].empty()) throw std::invalid_argument(std::string(who) + ": members have no values");
    for (const auto& m : members) {
        if (m.size() != members[0].size()) {
            throw std::invalid_argument(std::string(who) + ": inconsistent member lengths");
        }
    }
}

void run_chunked(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count < 2) {
        for (std::size_t s = 0; s < count; ++s) fn(s);
        return;
    }
    const std::size_t workers = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t s = t; s < count; s += workers) fn(s);
        });
    }
    for (std::thread& th : pool) th.join();
}

// Monte-Carlo: per draw, signs come from an independently seeded
// stream, so results are identical for any thread count and the draw
// sequence is a prefix-stable function of the master generator.
CorrelationSummary mc_sup_correlation(const std::vector<std::vector<double>>& members,
                                      const std::vector<std::vector<double>>& tracked, double norm,
                                      std::size_t draws, std::size_t threads, Prng& p) {
    check_class(members, "mc_sup_correlation");
    if (draws < 1) throw std::invalid_argument("mc_sup_correlation: need at least one sign draw");
    const std::size_t slots = members[0].size();

    std::vector<std::uint64_t> seeds(draws);
    for (std::uint64_t& s : seeds) s = p.next_u64();

    std::vector<double> sups(draws);
    std::vector<std::vector<double>> tracked_vals(tracked.size(), std::vector<double>(draws));
    run_chunked(draws, threads, [&](std::size_t s) {
        Prng ps(seeds[s]);
        const SignVector signs = sample_signs(ps, slots);
        double best = correlate(members[0], signs, norm);
        for (std::size_t m = 1; m < members.size(); ++m) {
            best = std::max(best, correlate(members[m], signs, norm));
        }
        sups[s] = best;
        for (std::size_t t = 0; t < tracked.size(); ++t) {
            tracked_vals[t][s] = correlate(tracked[t], signs, norm);
        }
    });

    CorrelationSummary out;
    out.sup = reduce_in_order(sups);
    for (const auto& tv : tracked_vals) out.tracked.push_back(reduce_in_order(tv));
    out.draws = draws;
    return out;
}

// Exhaustive version over all 2^slots sign patterns; exact, zero
// standard error.
CorrelationSummary exact_sup_correlation(const std::vector<std::vector<double>>& members,
                                         const std::vector<std::vector<double>>& tracked, double norm) {
    check_class(members, "exact_sup_correlation");
    const std::size_t slots = members[0].size();
    if (slots > kMaxEnumSlots) {
        throw CapacityError("exact_sup_correlation: " + std::to_string(slots) +
                            " sign slots exceed the enumeration limit of " +
                            std::to_string(kMaxEnumSlots));
    }
    const std::uint64_t patterns = std::uint64_t{1} << slots;
    SignVector signs;
    signs.signs.assign(slots, 1.0);
    double sup_sum = 0.0;
    std::vector<double> tracked_sum(tracked.size(), 0.0);
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        for (std::size_t i = 0; i < slots; ++i) signs.signs[i] = ((mask >> i) & 1U) ? -1.0 : 1.0;
        double best = correlate(members[0], signs, norm);
        for (std::size_t m = 1; m < members.size(); ++m) {
            best = std::max(best, correlate(members[m], signs, norm));
        }
        sup_sum += best;
        for (std::size_t t = 0; t < tracked.size(); ++t) {
            tracked_sum[t] += correlate(tracked[t], signs, norm);
        }
    }
    CorrelationSummary out;
    out.sup.value = sup_sum / static_cast<double>(patterns);
    for (double ts : tracked_sum) {
        out.tracked.push_back({ts / static_cast<double>(patterns), 0.0});
    }
    out.draws = static_cast<std::size_t>(patterns);
    return out;
}

CorrelationSummary run_sup_correlation(const std::vector<std::vector<double>>& members,
                                       const std::vector<std::vector<double>>& tracked, double norm,
                                       const EstimateBudgets& budgets, Prng& sigma_rng) {
    return budgets.enumerate_sigma
               ? exact_sup_correlation(members, tracked, norm)
               : mc_sup_correlation(members, tracked, norm, budgets.sigma_samples, budgets.threads,
                                    sigma_rng);
}

Tensor member_weights(const Tensor& center, const Tensor& offset) {
    Tensor w = center;
    for (std::size_t i = 0; i < w.numel(); ++i) w.data[i] += offset.data[i];
    return w;
}

void check_center(const Network& center, const Dataset& batch) {
    center.config.validate();
    batch.validate();
    if (center.w.numel() != center.config.param_count()) {
        throw std::invalid_argument("lab: parameter length does not match network config");
    }
    if (batch.dim() != center.config.input_dim || batch.classes != center.config.classes) {
        throw std::invalid_argument("lab: dataset (d=" + std::to_string(batch.dim()) + ", c=" +
                                    std::to_string(batch.classes) + ") does not match network (d=" +
                                    std::to_string(center.config.input_dim) + ", c=" +
                                    std::to_string(center.config.classes) + ")");
    }
}

// Per-member value vectors over the batch for each estimation target.
std::vector<std::vector<double>> build_class(
    const Network& center, const BallSample& ball, const Dataset& batch,
    const std::function<std::vector<double>(const Tensor& scores)>& per_member) {
    std::vector<std::vector<double>> members;
    members.reserve(ball.offsets.size());
    for (const Tensor& offset : ball.offsets) {
        const Tensor scores =
            forward_values<double>(center.config, member_weights(center.w, offset), batch.inputs);
        members.push_back(per_member(scores));
    }
    return members;
}

std::vector<std::vector<double>> phi_class(const Network& center, const BallSample& ball,
                                           const Dataset& batch, double gamma) {
    return build_class(center, ball, batch, [&](const Tensor& scores) {
        std::vector<double> m = margin_values(scores, batch.labels);
        for (double& v : m) v = phi(v / gamma);
        return m;
    });
}

std::vector<std::vector<double>> nlp_class(const Network& center, const BallSample& ball,
                                           const Dataset& batch) {
    return build_class(center, ball, batch,
                       [&](const Tensor& scores) { return neg_log_prob_values(scores, batch.labels); });
}

std::vector<std::vector<double>> diff_class(const Network& center, const BallSample& ball,
                                            const Dataset& batch) {
    return build_class(center, ball, batch,
                       [&](const Tensor& scores) { return ce_pairwise_diffs(scores, batch.labels); });
}

LipschitzEstimate lipschitz_or_zero(const Network& center, double r, const Dataset& batch,
                                    const BallSample& ball) {
    for (std::size_t s = 1; s < ball.offsets.size(); ++s) {
        if (l2_norm(ball.offsets[s]) > 0.0) return estimate_lipschitz(center, r, batch, ball);
    }
    return LipschitzEstimate{};  // center-only ball: no perturbation terms
}

}  // namespace

RcEstimate estimate_global_rc(const std::vector<std::vector<double>>& function_class,
                              std::size_t sigma_samples, Prng& p) {
    check_class(function_class, "estimate_global_rc");
    const double norm = 1.0 / static_cast<double>(function_class[0].size());
    const CorrelationSummary s = mc_sup_correlation(function_class, {}, norm, sigma_samples, 1, p);
    return RcEstimate{s.sup.value, s.sup.std_error, s.draws, 1};
}

RcEstimate enumerate_global_rc(const std::vector<std::vector<double>>& function_class) {
    check_class(function_class, "enumerate_global_rc");
    const double norm = 1.0 / static_cast<double>(function_class[0].size());
    const CorrelationSummary s = exact_sup_correlation(function_class, {}, norm);
    return RcEstimate{s.sup.value, 0.0, s.draws, 1};
}

RcEstimate estimate_lrc_margin(const Network& center, double r, const Dataset& batch, double gamma,
                               const EstimateBudgets& budgets, Prng& p) {
    check_center(center, batch);
    if (!(r > 0.0)) throw std::invalid_argument("estimate_lrc_margin: r must be > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("estimate_lrc_margin: gamma must be > 0");
    Prng ball_rng(p.next_u64());
    Prng sigma_rng(p.next_u64());
    const BallSample ball = sample_ball(center.w, r, budgets.ball_samples, ball_rng);
    const auto members = phi_class(center, ball, batch, gamma);
    const CorrelationSummary s =
        run_sup_correlation(members, {}, 1.0 / static_cast<double>(batch.size()), budgets, sigma_rng);
    return RcEstimate{s.sup.value, s.sup.std_error, s.draws, ball.offsets.size()};
}

RcEstimate estimate_lrc_ce(const Network& center, double r, const Dataset& batch,
                           const EstimateBudgets& budgets, Prng& p) {
    check_center(center, batch);
    if (!(r > 0.0)) throw std::invalid_argument("estimate_lrc_ce: r must be > 0");
    Prng ball_rng(p.next_u64());
    Prng sigma_rng(p.next_u64());
    const BallSample ball = sample_ball(center.w, r, budgets.ball_samples, ball_rng);
    const auto members = nlp_class(center, ball, batch);
    const CorrelationSummary s =
        run_sup_correlation(members, {}, 1.0 / static_cast<double>(batch.size()), budgets, sigma_rng);
    return RcEstimate{s.sup.value, s.sup.std_error, s.draws, ball.offsets.size()};
}

LipschitzEstimate estimate_lipschitz(const Network& center, double r, const Dataset& batch,
                                     const BallSample& ball) {
    check_center(center, batch);
    if (!(r > 0.0)) throw std::invalid_argument("estimate_lipschitz: r must be > 0");
    const Tensor center_scores = forward_values<double>(center.config, center.w, batch.inputs);
    const std::vector<double> center_margins = margin_values(center_scores, batch.labels);

    LipschitzEstimate out;
    bool any_nonzero = false;
    for (const Tensor& offset : ball.offsets) {
        const double offset_norm = l2_norm(offset);
        if (offset_norm == 0.0) continue;
        any_nonzero = true;
        const Tensor scores =
            forward_values<double>(center.config, member_weights(center.w, offset), batch.inputs);
        const std::vector<double> margins = margin_values(scores, batch.labels);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            double sup_change = 0.0;
            for (std::size_t j = 0; j < scores.cols(); ++j) {
                sup_change = std::max(sup_change, std::abs(scores.at(i, j) - center_scores.at(i, j)));
            }
            out.l_hat = std::max(out.l_hat, sup_change / offset_norm);
            out.delta_margin = std::max(out.delta_margin, std::abs(margins[i] - center_margins[i]));
        }
        out.sample_count += batch.size();
    }
    if (!any_nonzero) {
        throw std::invalid_argument("estimate_lipschitz: all offsets are zero");
    }
    return out;
}

std::vector<std::vector<double>> margin_value_class(const Network& center, const BallSample& ball,
                                                    const Dataset& batch) {
    check_center(center, batch);
    return build_class(center, ball, batch,
                       [&](const Tensor& scores) { return margin_values(scores, batch.labels); });
}

BoundReport verify_theorem1(const Network& center, double r, const Dataset& batch, double gamma,
                            const EstimateBudgets& budgets, std::uint64_t seed) {
    check_center(center, batch);
    if (!(r > 0.0)) throw std::invalid_argument("verify_theorem1: r must be > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("verify_theorem1: gamma must be > 0");

    Prng ball_rng(seed + seed_role::ball);
    const BallSample ball = sample_ball(center.w, r, budgets.ball_samples, ball_rng);
    const auto members = phi_class(center, ball, batch, gamma);
    const std::vector<double> center_margins =
        margin_values(forward_values<double>(center.config, center.w, batch.inputs), batch.labels);
    const LipschitzEstimate lip = lipschitz_or_zero(center, r, batch, ball);

    Prng sigma_rng(seed + seed_role::sigma);
    const CorrelationSummary s = run_sup_correlation(
        members, {members[0], center_margins}, 1.0 / static_cast<double>(batch.size()), budgets,
        sigma_rng);

    BoundReport rep;
    rep.theorem = 1;
    rep.lhs = RcEstimate{s.sup.value, s.sup.std_error, s.draws, ball.offsets.size()};
    rep.first_term = std::abs(s.tracked[0].value);
    rep.first_term_stderr = s.tracked[0].std_error;
    rep.statement_first_term = std::abs(s.tracked[1].value) / gamma;
    rep.delta_margin = lip.delta_margin;
    rep.l_hat = lip.l_hat;
    rep.rhs = rep.first_term + rep.delta_margin / gamma;
    rep.rhs_stderr = rep.first_term_stderr;
    rep.statement_rhs = rep.statement_first_term + 3.0 * rep.l_hat * r / gamma;
    rep.perturbation_ratio = rep.l_hat > 0.0 ? rep.delta_margin / (rep.l_hat * r) : 0.0;
    const bool chain_ok = rep.lhs.value <= rep.rhs + kRoundingGuard;
    const bool perturbation_ok = rep.delta_margin <= 3.0 * rep.l_hat * r + kRoundingGuard;
    rep.satisfied = chain_ok && perturbation_ok;
    rep.margin_of_satisfaction = rep.rhs - rep.lhs.value;
    rep.radius = r;
    rep.gamma = gamma;
    rep.budgets = budgets;
    rep.seed = seed;
    return rep;
}

BoundReport verify_theorem2(const Network& center, double r, const Dataset& batch,
                            const EstimateBudgets& budgets, std::uint64_t seed) {
    check_center(center, batch);
    if (!(r > 0.0)) throw std::invalid_argument("verify_theorem2: r must be > 0");
    const double classes = static_cast<double>(batch.classes);
    const double kappa = std::sqrt(2.0 * (classes - 1.0));
    const double norm = 1.0 / static_cast<double>(batch.size());

    Prng ball_rng(seed + seed_role::ball);
    const BallSample ball = sample_ball(center.w, r, budgets.ball_samples, ball_rng);
    const auto members_nlp = nlp_class(center, ball, batch);
    const auto members_diff = diff_class(center, ball, batch);
    const std::vector<double> center_diffs = ce_pairwise_diffs(
        forward_values<double>(center.config, center.w, batch.inputs), batch.labels);
    const LipschitzEstimate lip = lipschitz_or_zero(center, r, batch, ball);

    Prng lhs_rng(seed + seed_role::sigma);
    const CorrelationSummary lhs_sum = run_sup_correlation(members_nlp, {}, norm, budgets, lhs_rng);
    Prng rhs_rng(seed + seed_role::estimator);
    const CorrelationSummary rhs_sum =
        run_sup_correlation(members_diff, {center_diffs}, norm, budgets, rhs_rng);

    BoundReport rep;
    rep.theorem = 2;
    rep.lhs = RcEstimate{lhs_sum.sup.value, lhs_sum.sup.std_error, lhs_sum.draws, ball.offsets.size()};
    rep.first_term = kappa * std::abs(rhs_sum.tracked[0].value);
    rep.first_term_stderr = kappa * rhs_sum.tracked[0].std_error;
    rep.statement_first_term = rep.first_term;
    rep.delta_margin = lip.delta_margin;
    rep.l_hat = lip.l_hat;
    rep.rhs = kappa * rhs_sum.sup.value;
    rep.rhs_stderr = kappa * rhs_sum.sup.std_error;
    rep.statement_rhs = rep.statement_first_term + 2.0 * kappa * (classes - 1.0) * rep.l_hat * r;
    rep.perturbation_ratio = rep.l_hat > 0.0 ? rep.delta_margin / (rep.l_hat * r) : 0.0;
    const double combined_stderr =
        std::sqrt(rep.lhs.std_error * rep.lhs.std_error + rep.rhs_stderr * rep.rhs_stderr);
    rep.satisfied = rep.lhs.value <= rep.rhs + 3.0 * combined_stderr + kRoundingGuard;
    rep.margin_of_satisfaction = rep.rhs + 3.0 * combined_stderr - rep.lhs.value;
    rep.radius = r;
    rep.gamma = 1.0;
    rep.budgets = budgets;
    rep.seed = seed;
    return rep;
}

double logsumexp1p(const std::vector<double>& v) {
    double mx = 0.0;  // the implicit exp(0) term
    for (double x : v) mx = std::max(mx, x);
    double acc = std::exp(-mx);
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

LipschitzPremiseReport check_logsumexp1p_lipschitz(std::size_t pairs, std::size_t max_dim, Prng& p) {
    if (pairs < 1 || max_dim < 1) {
        throw std::invalid_argument("check_logsumexp1p_lipschitz: need pairs >= 1 and max_dim >= 1");
    }
    LipschitzPremiseReport rep;
    rep.pairs = pairs;
    rep.max_dim = max_dim;
    for (std::size_t k = 0; k < pairs; ++k) {
        const std::size_t dim = 1 + static_cast<std::size_t>(p.next_u64() % max_dim);
        std::vector<double> u(dim);
        std::vector<double> v(dim);
        double dist_sq = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            u[i] = 20.0 * p.next_unit() - 10.0;
            v[i] = 20.0 * p.next_unit() - 10.0;
            dist_sq += (u[i] - v[i]) * (u[i] - v[i]);
        }
        if (dist_sq == 0.0) continue;
        const double ratio = std::abs(logsumexp1p(u) - logsumexp1p(v)) /
                             (std::sqrt(static_cast<double>(dim)) * std::sqrt(dist_sq));
        rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
    rep.pass = rep.max_ratio <= 1.0 + 1e-12;
    return rep;
}

nlohmann::ordered_json rc_estimate_json(const RcEstimate& e) {
    return nlohmann::ordered_json{{"value", e.value},
                                  {"std_error", e.std_error},
                                  {"sigma_samples", e.sigma_samples},
                                  {"ball_samples", e.ball_samples}};
}

nlohmann::ordered_json bound_report_json(const BoundReport& r) {
    nlohmann::ordered_json j;
    j["theorem"] = r.theorem;
    j["lhs"] = r.lhs.value;
    j["lhs_stderr"] = r.lhs.std_error;
    j["first_term"] = r.first_term;
    j["first_term_stderr"] = r.first_term_stderr;
    j["delta_margin"] = r.delta_margin;
    j["l_hat"] = r.l_hat;
    j["rhs"] = r.rhs;
    j["rhs_stderr"] = r.rhs_stderr;
    j["satisfied"] = r.satisfied;
    j["margin_of_satisfaction"] = r.margin_of_satisfaction;
    j["statement_first_term"] = r.statement_first_term;
    j["statement_rhs"] = r.statement_rhs;
    j["perturbation_ratio"] = r.perturbation_ratio;
    j["gamma"] = r.gamma;
    j["budgets"] = nlohmann::ordered_json{{"sigma_samples", r.budgets.sigma_samples},
                                          {"ball_samples", r.budgets.ball_samples},
                                          {"r", r.radius},
                                          {"enumerate_sigma", r.budgets.enumerate_sigma},
                                          {"threads", r.budgets.threads}};
    j["seed"] = r.seed;
    return j;
}

}  // namespace lrc
