// Acceptance harness: one PASS/FAIL line per release criterion.
//
//  1. analytic gradients of both regularized objectives match central
//     finite differences on random small MLPs
//  2. the Monte-Carlo regularizer agrees with exact sign enumeration
//  3. the enumerated regularizer obeys the two-sided norm sandwich
//  4. the sampled margin-chain bound holds on random tiny networks
//  5. the statistical multiclass chain bound holds, and the row-wise
//     log-sum-exp premise is sqrt(dim)-Lipschitz empirically
//  6. training on easy blobs reaches 95% test accuracy across seeds,
//     regularizer strengths, and both losses
//  7. bit-exact runs are byte identical, and lambda = 0 equals the
//     regularizer-disabled trajectory
//  8. the step schedule reproduces exact decimal learning rates
//  9. the binary image reader parses fixtures bit-exactly and rejects
//     truncated files
//
// Exits 0 iff every criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lrc/data.hpp"
#include "lrc/errors.hpp"
#include "lrc/gradcheck.hpp"
#include "lrc/lab.hpp"
#include "lrc/losses.hpp"
#include "lrc/network.hpp"
#include "lrc/regularizer.hpp"
#include "lrc/rng.hpp"
#include "lrc/tape.hpp"
#include "lrc/trainer.hpp"

namespace fs = std::filesystem;
using namespace lrc;

namespace {

int criteria_failed = 0;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int criterion, bool pass, double seconds, const std::string& detail) {
    if (!pass) ++criteria_failed;
    std::printf("criterion %d: %s (%.1f s) %s\n", criterion, pass ? "PASS" : "FAIL", seconds,
                detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return std::string(buf);
}

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "lrclab_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(LRCLAB_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
}

// Random batch whose margins stay clear of the surrogate kinks at
// 0 and gamma, so central differences remain valid near the center.
struct GradProblem {
    MlpConfig arch;
    Network net;
    Tensor x;
    std::vector<int> labels;
};

GradProblem make_grad_problem(std::uint64_t seed, double gamma) {
    Prng p(seed);
    for (int attempt = 0; attempt < 50; ++attempt) {
        GradProblem g;
        g.arch.input_dim = 1 + p.next_u64() % 8;
        g.arch.hidden = {1 + p.next_u64() % 16, 1 + p.next_u64() % 16};
        g.arch.classes = 2 + p.next_u64() % 4;
        const std::size_t batch = 2 + p.next_u64() % 7;

        Prng init_rng(p.next_u64());
        g.net = init_network(g.arch, init_rng);
        g.x = Tensor::zeros({batch, g.arch.input_dim});
        for (auto& v : g.x.data) v = p.next_gaussian();
        g.labels.resize(batch);
        for (auto& l : g.labels) l = static_cast<int>(p.next_u64() % g.arch.classes);

        const Tensor scores = forward_values(g.net.config, g.net.w, g.x);
        const std::vector<double> margins = margin_values(scores, g.labels);
        bool clear = true;
        for (const double m : margins) {
            const double s = m / gamma;
            if (std::abs(s) < 1e-4 || std::abs(s - 1.0) < 1e-4) clear = false;
        }
        if (clear) return g;
    }
    throw std::runtime_error("could not draw a kink-free gradient problem");
}

void criterion_gradients() {
    Timer timer;
    double worst = 0.0;
    bool pass = true;
    std::string failure;
    for (int rep = 0; rep < 20 && pass; ++rep) {
        const double gamma = (rep % 3 == 0) ? 0.5 : (rep % 3 == 1 ? 1.0 : 2.0);
        const GradProblem g = make_grad_problem(9000 + rep, gamma);
        const std::uint64_t sigma_seed = 7000 + rep;

        for (const LossKind kind : {LossKind::hinge(gamma), LossKind::cross_entropy()}) {
            const auto objective = [&](const Tensor& w) {
                Tape tape;
                const int wn = tape.leaf(w, true);
                const int xn = tape.leaf(g.x);
                const int scores = forward(tape, g.arch, wn, xn);
                const int base = loss_node(tape, scores, g.labels, kind);
                Prng sigma_rng(sigma_seed);  // frozen: same draws on every call
                const LrcConfig cfg{0.5, 2, gamma, 0};
                const RegTerm reg = lrc_regularizer(tape, scores, g.labels, kind, cfg, sigma_rng);
                const int root = tape.add(base, tape.scale(reg.node, cfg.lambda));
                tape.backward(root);
                return std::make_pair(tape.value(root).value(), tape.grad(wn));
            };
            const GradcheckReport rep_out = gradcheck(objective, g.net.w, 1e-6, 1e-5);
            worst = std::max(worst, rep_out.max_rel_error);
            if (!rep_out.pass) {
                pass = false;
                failure = fmt(" first failure: net %d %s rel_err=%.3e at w[%zu]", rep,
                              kind.is_hinge() ? "margin-loss" : "ce-loss", rep_out.max_rel_error,
                              rep_out.worst_index);
                break;
            }
        }
    }
    const double secs = timer.seconds();
    pass = pass && secs < 30.0;
    report(1, pass, secs,
           fmt("gradients of 20 random MLPs, both regularized objectives; max rel err %.2e%s", worst,
               failure.c_str()));
}

void criterion_enumeration() {
    Timer timer;
    Prng p(4242);
    const std::size_t k_draws = 100000;
    double worst_z = 0.0;
    bool pass = true;

    for (int rep = 0; rep < 50 && pass; ++rep) {
        const std::size_t b = 1 + p.next_u64() % 12;
        std::vector<double> margins(b);
        for (auto& m : margins) m = 4.0 * p.next_unit() - 2.0;
        const double exact = lrc_exact_hinge(margins);
        Prng est(p.next_u64());
        const MonteCarloEstimate mc = lrc_value_hinge(margins, k_draws, est);
        const double gap = std::abs(mc.value - exact);
        if (mc.std_error > 0.0) worst_z = std::max(worst_z, gap / mc.std_error);
        if (gap > 3.0 * mc.std_error + 1e-12) pass = false;
    }

    for (int rep = 0; rep < 50 && pass; ++rep) {
        const std::size_t c = 2 + p.next_u64() % 3;       // 2..4 classes
        const std::size_t b = 1 + p.next_u64() % (12 / (c - 1));
        Tensor scores = Tensor::zeros({b, c});
        for (auto& v : scores.data) v = p.next_gaussian();
        std::vector<int> labels(b);
        for (auto& l : labels) l = static_cast<int>(p.next_u64() % c);
        const double exact = lrc_exact_ce(scores, labels);
        Prng est(p.next_u64());
        const MonteCarloEstimate mc = lrc_value_ce(scores, labels, k_draws, est);
        const double gap = std::abs(mc.value - exact);
        if (mc.std_error > 0.0) worst_z = std::max(worst_z, gap / mc.std_error);
        if (gap > 3.0 * mc.std_error + 1e-12) pass = false;
    }

    const double secs = timer.seconds();
    pass = pass && secs < 60.0;
    report(2, pass, secs,
           fmt("Monte-Carlo (K=%zu) vs exact enumeration, 50 margin + 50 score draws; worst z=%.2f",
               k_draws, worst_z));
}

void criterion_sandwich() {
    Timer timer;
    Prng p(515);
    bool pass = true;
    for (int rep = 0; rep < 100 && pass; ++rep) {
        const std::size_t b = 1 + p.next_u64() % 12;
        std::vector<double> m(b);
        for (auto& v : m) v = 3.0 * p.next_gaussian();
        double norm_sq = 0.0;
        for (const double v : m) norm_sq += v * v;
        const double norm = std::sqrt(norm_sq);
        const double exact = lrc_exact_hinge(m);
        const double lo = norm / (static_cast<double>(b) * std::sqrt(2.0)) - 1e-12;
        const double hi = norm / static_cast<double>(b) + 1e-12;
        if (exact < lo || exact > hi) pass = false;
    }
    const double secs = timer.seconds();
    pass = pass && secs < 5.0;
    report(3, pass, secs, "enumerated sign average within [||m||/(B sqrt 2), ||m||/B] on 100 draws");
}

Dataset random_batch(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t classes) {
    Prng p(seed);
    Dataset ds;
    ds.inputs = Tensor::zeros({n, d});
    for (auto& v : ds.inputs.data) v = p.next_gaussian();
    ds.labels.resize(n);
    for (auto& l : ds.labels) l = static_cast<int>(p.next_u64() % classes);
    ds.classes = classes;
    ds.name = "random";
    return ds;
}

void criterion_margin_chain() {
    Timer timer;
    bool pass = true;
    std::string failure;
    double worst_margin = 1e300;
    for (int rep = 0; rep < 10 && pass; ++rep) {
        Prng p(600 + rep);
        MlpConfig arch{2 + p.next_u64() % 3, {3 + p.next_u64() % 4}, 2 + p.next_u64() % 3};
        Prng init_rng(p.next_u64());
        const Network net{arch, init_network(arch, init_rng).w};
        const Dataset batch = random_batch(p.next_u64(), 6 + p.next_u64() % 7, arch.input_dim,
                                           arch.classes);
        const double gamma = (rep % 2) ? 1.0 : 0.5;
        const double r = 0.02 * l2_norm(net.w);
        EstimateBudgets budgets;
        budgets.sigma_samples = 2000;
        budgets.ball_samples = 32;
        const BoundReport rp = verify_theorem1(net, r, batch, gamma, budgets, 100 + rep);
        worst_margin = std::min(worst_margin, rp.margin_of_satisfaction);
        if (!rp.satisfied) {
            pass = false;
            failure = fmt(" run %d: lhs %.6e > rhs %.6e", rep, rp.lhs.value, rp.rhs);
        }
        if (rp.delta_margin > 3.0 * rp.l_hat * r + 1e-12) {
            pass = false;
            failure += fmt(" run %d: margin shift %.3e exceeds 3*L*r %.3e", rep, rp.delta_margin,
                           3.0 * rp.l_hat * r);
        }
    }
    const double secs = timer.seconds();
    pass = pass && secs < 60.0;
    report(4, pass, secs,
           fmt("sampled margin chain on 10 random networks; worst slack %.3e%s", worst_margin,
               failure.c_str()));
}

void criterion_statistical_chain() {
    Timer timer;
    bool pass = true;
    std::string failure;
    const std::size_t class_choices[3] = {2, 3, 5};
    for (int rep = 0; rep < 10 && pass; ++rep) {
        Prng p(800 + rep);
        MlpConfig arch{2 + p.next_u64() % 3, {3 + p.next_u64() % 4}, class_choices[rep % 3]};
        Prng init_rng(p.next_u64());
        const Network net{arch, init_network(arch, init_rng).w};
        const Dataset batch = random_batch(p.next_u64(), 6 + p.next_u64() % 7, arch.input_dim,
                                           arch.classes);
        const double r = 0.02 * l2_norm(net.w);
        EstimateBudgets budgets;
        budgets.sigma_samples = 2000;
        budgets.ball_samples = 32;
        const BoundReport rp = verify_theorem2(net, r, batch, budgets, 300 + rep);
        if (!rp.satisfied) {
            pass = false;
            failure = fmt(" run %d (c=%zu): lhs %.6e > rhs %.6e", rep, arch.classes, rp.lhs.value,
                          rp.rhs);
        }
    }

    Prng premise_rng(11);
    const LipschitzPremiseReport premise = check_logsumexp1p_lipschitz(10000, 16, premise_rng);
    if (!premise.pass) {
        pass = false;
        failure += fmt(" log-sum-exp premise violated: max ratio %.6f", premise.max_ratio);
    }

    const double secs = timer.seconds();
    pass = pass && secs < 120.0;
    report(5, pass, secs,
           fmt("statistical multiclass chain on 10 networks; log-sum-exp ratio %.4f on 10^4 pairs%s",
               premise.max_ratio, failure.c_str()));
}

struct TrainOutcome {
    double test_acc;
    double final_reg;
    std::size_t classes_predicted;
};

TrainOutcome run_blobs_training(std::uint64_t seed, double lambda, const LossKind& kind) {
    Prng data_rng(seed + seed_role::data);
    const Dataset ds = gen_blobs(3, 200, 2, 0.15, data_rng);
    Prng split_rng(seed + seed_role::split);
    const auto parts = split(ds, 0.8, 0.1, 0.1, split_rng);

    TrainConfig cfg;
    cfg.loss = kind;
    cfg.lrc = LrcConfig{lambda, 1, kind.is_hinge() ? kind.gamma : 1.0, seed};
    cfg.epochs = 200;
    cfg.seed = seed;
    cfg.bit_exact = true;
    const TrainResult res = train({2, {32, 32}, 3}, parts[0], parts[2], cfg);

    TrainOutcome out;
    out.test_acc = res.metrics.back().test_accuracy;
    out.final_reg = res.metrics.back().reg_value;
    const Tensor scores = forward_values(res.net.config, res.net.w, parts[2].inputs);
    std::vector<bool> seen(3, false);
    for (std::size_t i = 0; i < parts[2].size(); ++i) seen[argmax_row(scores, i)] = true;
    out.classes_predicted = static_cast<std::size_t>(seen[0]) + seen[1] + seen[2];
    return out;
}

void criterion_training() {
    Timer timer;
    int passed_runs = 0;
    std::vector<std::string> failures;
    double reg_sum[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [loss][lambda index]

    for (int loss_idx = 0; loss_idx < 2; ++loss_idx) {
        const LossKind kind = loss_idx == 0 ? LossKind::hinge(1.0) : LossKind::cross_entropy();
        for (int lam_idx = 0; lam_idx < 2; ++lam_idx) {
            const double lambda = lam_idx == 0 ? 0.0 : 0.5;
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                const TrainOutcome out = run_blobs_training(seed, lambda, kind);
                reg_sum[loss_idx][lam_idx] += out.final_reg;
                if (out.test_acc >= 0.95) {
                    ++passed_runs;
                } else {
                    failures.push_back(fmt(
                        "  %s lambda=%.1f seed=%llu: test_acc=%.4f, predicts %zu/3 classes%s",
                        loss_idx == 0 ? "hinge" : "ce", lambda,
                        static_cast<unsigned long long>(seed), out.test_acc, out.classes_predicted,
                        out.classes_predicted < 3 ? " (degenerate: init never covered a class and the"
                                                    " clipped surrogate gives misclassified points"
                                                    " zero gradient, so they are never recruited)"
                                                  : ""));
                }
            }
        }
    }

    const double secs = timer.seconds();
    const bool pass = passed_runs == 20 && secs < 300.0;
    report(6, pass, secs,
           fmt("%d/20 blob training runs reached 95%% test accuracy "
               "(5 seeds x lambda {0, 0.5} x {hinge, ce})",
               passed_runs));
    for (const std::string& f : failures) std::printf("%s\n", f.c_str());
    for (int loss_idx = 0; loss_idx < 2; ++loss_idx) {
        const double reg0 = reg_sum[loss_idx][0] / 5.0;
        const double reg5 = reg_sum[loss_idx][1] / 5.0;
        std::printf("  trend (reported, non-gating): %s mean final reg lambda=0.5 %.4f vs lambda=0 "
                    "%.4f -> within +5%%: %s\n",
                    loss_idx == 0 ? "hinge" : "ce", reg5, reg0,
                    reg5 <= 1.05 * reg0 ? "yes" : "no");
    }
    std::fflush(stdout);
}

void criterion_determinism() {
    Timer timer;
    bool pass = true;
    std::string detail;

    const fs::path a = work_dir() / "det_a.jsonl";
    const fs::path b = work_dir() / "det_b.jsonl";
    const std::string common =
        " --data blobs:3x40 --epochs 8 --batch-size 16 --lambda 0.5 --seed 11 --bit-exact --out ";
    if (run_tool("train" + common + a.string()) != 0 || run_tool("train" + common + b.string()) != 0) {
        pass = false;
        detail = "tool invocation failed; ";
    } else {
        const std::string bytes_a = read_file(a);
        if (bytes_a.empty() || bytes_a != read_file(b)) {
            pass = false;
            detail = "repeat runs differ; ";
        }
    }

    Prng data_rng(3 + seed_role::data);
    const Dataset ds = gen_blobs(3, 40, 2, 0.1, data_rng);
    Prng split_rng(3 + seed_role::split);
    const auto parts = split(ds, 0.8, 0.1, 0.1, split_rng);
    TrainConfig cfg;
    cfg.loss = LossKind::hinge(1.0);
    cfg.lrc = LrcConfig{0.0, 1, 1.0, 3};
    cfg.epochs = 10;
    cfg.batch_size = 16;
    cfg.seed = 3;
    cfg.bit_exact = true;
    TrainConfig disabled = cfg;
    disabled.regularizer_enabled = false;
    const TrainResult lam0 = train({2, {8}, 3}, parts[0], parts[2], cfg);
    const TrainResult off = train({2, {8}, 3}, parts[0], parts[2], disabled);
    if (lam0.net.w.data != off.net.w.data) {
        pass = false;
        detail += "lambda=0 weights differ from regularizer-disabled; ";
    }
    for (std::size_t e = 0; e < lam0.metrics.size(); ++e) {
        if (lam0.metrics[e].train_loss != off.metrics[e].train_loss ||
            lam0.metrics[e].test_loss != off.metrics[e].test_loss) {
            pass = false;
            detail += "lambda=0 trajectory diverges from regularizer-disabled; ";
            break;
        }
    }

    report(7, pass, timer.seconds(),
           detail.empty() ? "byte-identical repeat runs; lambda=0 trajectory == regularizer disabled"
                          : detail);
}

void criterion_schedule() {
    Timer timer;
    ScheduleConfig sched;
    sched.kind = ScheduleConfig::Kind::Step;
    sched.milestones = {82, 123};
    const bool pass = lr_at(sched, 0, 164, 0.1) == 0.1 && lr_at(sched, 100, 164, 0.1) == 0.01 &&
                      lr_at(sched, 150, 164, 0.1) == 0.001;
    report(8, pass, timer.seconds(),
           "step schedule 0.1 with milestones {82,123}: exactly 0.1/0.01/0.001 at epochs 0/100/150");
}

void criterion_image_reader() {
    Timer timer;
    bool pass = true;
    std::string detail;

    const fs::path fixture = work_dir() / "batch_fixture.bin";
    {
        std::ofstream out(fixture, std::ios::binary);
        std::vector<unsigned char> rec(3073);
        rec[0] = 3;
        for (std::size_t j = 0; j < 3072; ++j) rec[1 + j] = static_cast<unsigned char>(j % 256);
        out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
        rec[0] = 9;
        for (std::size_t j = 0; j < 3072; ++j) rec[1 + j] = 255;
        out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
    }
    try {
        const Dataset ds = load_cifar10_binary({fixture.string()});
        if (ds.size() != 2 || ds.dim() != 3072 || ds.classes != 10) {
            pass = false;
            detail += "fixture shape wrong; ";
        } else if (ds.labels[0] != 3 || ds.labels[1] != 9) {
            pass = false;
            detail += "fixture labels wrong; ";
        } else {
            for (std::size_t j = 0; j < 3072 && pass; ++j) {
                if (ds.inputs.at(0, j) != static_cast<double>(j % 256) / 255.0 ||
                    ds.inputs.at(1, j) != 1.0) {
                    pass = false;
                    detail += "fixture pixels not bit-exact; ";
                }
            }
        }
    } catch (const std::exception& e) {
        pass = false;
        detail += fmt("fixture load threw: %s; ", e.what());
    }

    const fs::path truncated = work_dir() / "batch_truncated.bin";
    {
        std::ofstream out(truncated, std::ios::binary);
        const std::vector<char> bytes(3073 + 1000, 7);
        out.write(bytes.data(), bytes.size());
    }
    try {
        load_cifar10_binary({truncated.string()});
        pass = false;
        detail += "truncated file accepted; ";
    } catch (const DataError&) {
        // expected
    }

    std::string optional_note = "real-data check skipped (set CIFAR10_DIR to enable)";
    if (const char* dir = std::getenv("CIFAR10_DIR")) {
        std::vector<std::string> paths;
        for (int i = 1; i <= 5; ++i) {
            paths.push_back(std::string(dir) + "/data_batch_" + std::to_string(i) + ".bin");
        }
        try {
            const Dataset full = load_cifar10_binary(paths);
            optional_note = fmt("real train split n=%zu", full.size());
            if (full.size() != 50000) {
                pass = false;
                detail += "real train split is not 50000 examples; ";
            }
        } catch (const std::exception& e) {
            pass = false;
            detail += fmt("real-data load threw: %s; ", e.what());
        }
    }

    report(9, pass, timer.seconds(),
           detail.empty() ? fmt("synthetic fixtures bit-exact, truncated rejected; %s",
                                optional_note.c_str())
                          : detail);
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_enumeration();
    criterion_sandwich();
    criterion_margin_chain();
    criterion_statistical_chain();
    criterion_training();
    criterion_determinism();
    criterion_schedule();
    criterion_image_reader();

    std::printf("acceptance: %d/9 criteria passed\n", 9 - criteria_failed);
    return criteria_failed == 0 ? 0 : 1;
}
