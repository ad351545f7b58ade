// lrclab: train MLPs with the sign-correlation regularizer, estimate
// local complexity around a checkpoint, and verify the two bound
// chains end to end.
//
// Exit codes: 0 success, 1 gradcheck failure, 2 usage or capacity
// error, 3 data error, 4 numerical error, 5 bound not satisfied.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lrc/data.hpp"
#include "lrc/errors.hpp"
#include "lrc/gradcheck.hpp"
#include "lrc/lab.hpp"
#include "lrc/losses.hpp"
#include "lrc/network.hpp"
#include "lrc/regularizer.hpp"
#include "lrc/rng.hpp"
#include "lrc/tape.hpp"
#include "lrc/tensor.hpp"
#include "lrc/trainer.hpp"

namespace {

using nlohmann::ordered_json;
using namespace lrc;

bool parses_as_double(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

double parse_double_token(const std::string& s, const std::string& what) {
    if (!parses_as_double(s)) {
        throw std::invalid_argument(what + ": '" + s + "' is not a number");
    }
    return std::strtod(s.c_str(), nullptr);
}

std::size_t parse_size_token(const std::string& s, const std::string& what) {
    if (s.empty()) throw std::invalid_argument(what + ": empty count");
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || s[0] == '-') {
        throw std::invalid_argument(what + ": '" + s + "' is not a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

std::vector<std::string> split_string(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    if (s.empty()) return out;
    for (const std::string& tok : split_string(s, ',')) out.push_back(parse_size_token(tok, what));
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    if (s.empty()) return out;
    for (const std::string& tok : split_string(s, ',')) out.push_back(parse_double_token(tok, what));
    return out;
}

// `--lambda` used as a bare flag means "turn the regularizer on" at
// strength 0.5; a following token that parses as a number is the
// explicit strength.
std::vector<std::string> normalize_lambda_args(int argc, char** argv) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(argc) + 1);
    for (int i = 0; i < argc; ++i) {
        const std::string tok = argv[i];
        out.push_back(tok);
        if (tok == "--lambda" && (i + 1 >= argc || !parses_as_double(argv[i + 1]))) {
            out.push_back("0.5");
        }
    }
    return out;
}

// SPEC grammar: blobs:CxN[:spread] | spirals:N[:noise] | csv:PATH:classes |
// cifar10:DIR[:std]. Generated sets draw from the data stream of `seed`.
Dataset load_data_spec(const std::string& spec, std::uint64_t seed) {
    const std::vector<std::string> parts = split_string(spec, ':');
    const std::string& kind = parts[0];
    Prng p(seed + seed_role::data);
    if (kind == "blobs") {
        if (parts.size() < 2 || parts.size() > 3) {
            throw std::invalid_argument("data spec: expected blobs:CxN[:spread], got '" + spec + "'");
        }
        const std::vector<std::string> cxn = split_string(parts[1], 'x');
        if (cxn.size() != 2) {
            throw std::invalid_argument("data spec: expected CxN after blobs:, got '" + parts[1] + "'");
        }
        const std::size_t classes = parse_size_token(cxn[0], "data spec");
        const std::size_t per_class = parse_size_token(cxn[1], "data spec");
        const double spread = parts.size() == 3 ? parse_double_token(parts[2], "data spec") : 0.1;
        return gen_blobs(classes, per_class, 2, spread, p);
    }
    if (kind == "spirals") {
        if (parts.size() < 2 || parts.size() > 3) {
            throw std::invalid_argument("data spec: expected spirals:N[:noise], got '" + spec + "'");
        }
        const std::size_t per_class = parse_size_token(parts[1], "data spec");
        const double noise = parts.size() == 3 ? parse_double_token(parts[2], "data spec") : 0.0;
        return gen_two_spirals(per_class, noise, p);
    }
    if (kind == "csv") {
        if (parts.size() != 3) {
            throw std::invalid_argument("data spec: expected csv:PATH:classes, got '" + spec + "'");
        }
        return load_csv(parts[1], parse_size_token(parts[2], "data spec"));
    }
    if (kind == "cifar10") {
        const bool standardize = parts.size() == 3 && parts[2] == "std";
        if (parts.size() < 2 || parts.size() > 3 || (parts.size() == 3 && !standardize)) {
            throw std::invalid_argument("data spec: expected cifar10:DIR[:std], got '" + spec + "'");
        }
        std::vector<std::string> paths;
        for (int i = 1; i <= 5; ++i) {
            paths.push_back(parts[1] + "/data_batch_" + std::to_string(i) + ".bin");
        }
        return load_cifar10_binary(paths, standardize);
    }
    throw std::invalid_argument("data spec: unknown kind '" + kind +
                                "' (expected blobs, spirals, csv, or cifar10)");
}

void check_dims(const Network& net, const Dataset& ds, const std::string& who) {
    if (ds.dim() != net.config.input_dim || ds.classes != net.config.classes) {
        throw std::invalid_argument(who + ": dataset (d=" + std::to_string(ds.dim()) + ", c=" +
                                    std::to_string(ds.classes) + ") does not match checkpoint (d=" +
                                    std::to_string(net.config.input_dim) + ", c=" +
                                    std::to_string(net.config.classes) + ")");
    }
}

double default_radius(const Network& net, double requested, const std::string& who) {
    const double r = requested > 0.0 ? requested : 0.01 * l2_norm(net.w);
    if (!(r > 0.0)) throw std::invalid_argument(who + ": radius must be > 0");
    return r;
}

void write_json_output(const ordered_json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::printf("%s\n", j.dump(2).c_str());
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw DataError("cannot open output file " + out_path);
    f << j.dump(2) << "\n";
    if (!f) throw DataError("failed writing output file " + out_path);
}

// ---------------------------------------------------------------- train

struct TrainCli {
    std::string loss{"hinge"};
    double lambda{0.0};
    double gamma{1.0};
    std::size_t k_samples{1};
    std::size_t epochs{200};
    std::size_t batch_size{32};
    double lr{0.05};
    double momentum{0.9};
    double weight_decay{0.0002};
    std::string schedule{"step"};
    std::string milestones;  // empty = 50% and 75% of epochs
    double lr_divisor{10.0};
    std::uint64_t seed{1};
    std::string data;
    std::string out;
    bool bit_exact{false};
    std::string precision{"f64"};
    std::string hidden{"32,32"};
    std::string split_spec{"0.8,0.1,0.1"};
    std::string config_path;
    bool print_config{false};
    std::string checkpoint_out;
    std::size_t checkpoint_every{0};
};

double json_number(const ordered_json& j, const std::string& key) {
    if (!j.at(key).is_number()) throw std::invalid_argument("config: key '" + key + "' must be a number");
    return j.at(key).get<double>();
}

std::size_t json_count(const ordered_json& j, const std::string& key) {
    if (!j.at(key).is_number_unsigned()) {
        throw std::invalid_argument("config: key '" + key + "' must be a non-negative integer");
    }
    return j.at(key).get<std::size_t>();
}

std::string json_string(const ordered_json& j, const std::string& key) {
    if (!j.at(key).is_string()) throw std::invalid_argument("config: key '" + key + "' must be a string");
    return j.at(key).get<std::string>();
}

bool json_flag(const ordered_json& j, const std::string& key) {
    if (!j.at(key).is_boolean()) throw std::invalid_argument("config: key '" + key + "' must be a boolean");
    return j.at(key).get<bool>();
}

// Arrays are carried back to the comma-string form the flags use.
std::string json_joined(const ordered_json& j, const std::string& key) {
    if (!j.at(key).is_array()) throw std::invalid_argument("config: key '" + key + "' must be an array");
    std::string out;
    for (const auto& item : j.at(key)) {
        if (!item.is_number()) {
            throw std::invalid_argument("config: key '" + key + "' must hold numbers");
        }
        if (!out.empty()) out += ',';
        ordered_json v = item;
        out += v.dump();
    }
    return out;
}

// File values fill any slot whose flag was not passed; flags win.
void apply_config_file(TrainCli& o, const std::map<std::string, CLI::Option*>& opts) {
    std::ifstream f(o.config_path);
    if (!f) throw DataError("config: cannot open " + o.config_path);
    ordered_json j;
    try {
        j = ordered_json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: " + o.config_path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

    static const std::map<std::string, int> known = {
        {"loss", 0},       {"lambda", 1},     {"gamma", 1},          {"K", 2},
        {"epochs", 2},     {"batch_size", 2}, {"lr", 1},             {"momentum", 1},
        {"weight_decay", 1}, {"schedule", 0}, {"milestones", 3},     {"lr_divisor", 1},
        {"seed", 2},       {"data", 0},       {"out", 0},            {"bit_exact", 4},
        {"precision", 0},  {"hidden", 3},     {"split", 3},          {"checkpoint_out", 0},
        {"checkpoint_every", 2}};
    for (const auto& item : j.items()) {
        if (known.find(item.key()) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + item.key() + "'");
        }
    }

    const auto fresh = [&](const char* flag) { return opts.at(flag)->count() == 0; };
    if (j.contains("loss") && fresh("--loss")) o.loss = json_string(j, "loss");
    if (j.contains("lambda") && fresh("--lambda")) o.lambda = json_number(j, "lambda");
    if (j.contains("gamma") && fresh("--gamma")) o.gamma = json_number(j, "gamma");
    if (j.contains("K") && fresh("--K")) o.k_samples = json_count(j, "K");
    if (j.contains("epochs") && fresh("--epochs")) o.epochs = json_count(j, "epochs");
    if (j.contains("batch_size") && fresh("--batch-size")) o.batch_size = json_count(j, "batch_size");
    if (j.contains("lr") && fresh("--lr")) o.lr = json_number(j, "lr");
    if (j.contains("momentum") && fresh("--momentum")) o.momentum = json_number(j, "momentum");
    if (j.contains("weight_decay") && fresh("--weight-decay")) {
        o.weight_decay = json_number(j, "weight_decay");
    }
    if (j.contains("schedule") && fresh("--schedule")) o.schedule = json_string(j, "schedule");
    if (j.contains("milestones") && fresh("--milestones")) o.milestones = json_joined(j, "milestones");
    if (j.contains("lr_divisor") && fresh("--lr-divisor")) o.lr_divisor = json_number(j, "lr_divisor");
    if (j.contains("seed") && fresh("--seed")) o.seed = json_count(j, "seed");
    if (j.contains("data") && fresh("--data")) o.data = json_string(j, "data");
    if (j.contains("out") && fresh("--out")) o.out = json_string(j, "out");
    if (j.contains("bit_exact") && fresh("--bit-exact")) o.bit_exact = json_flag(j, "bit_exact");
    if (j.contains("precision") && fresh("--precision")) o.precision = json_string(j, "precision");
    if (j.contains("hidden") && fresh("--hidden")) o.hidden = json_joined(j, "hidden");
    if (j.contains("split") && fresh("--split")) o.split_spec = json_joined(j, "split");
    if (j.contains("checkpoint_out") && fresh("--checkpoint-out")) {
        o.checkpoint_out = json_string(j, "checkpoint_out");
    }
    if (j.contains("checkpoint_every") && fresh("--checkpoint-every")) {
        o.checkpoint_every = json_count(j, "checkpoint_every");
    }
}

int run_train(TrainCli& o, const std::map<std::string, CLI::Option*>& opts) {
    if (!o.config_path.empty()) apply_config_file(o, opts);

    if (o.lambda < 0.0) throw std::invalid_argument("train: --lambda must be >= 0");
    if (!(o.gamma > 0.0)) throw std::invalid_argument("train: --gamma must be > 0");
    if (o.loss != "hinge" && o.loss != "ce") {
        throw std::invalid_argument("train: --loss must be hinge or ce");
    }
    if (o.schedule != "step" && o.schedule != "cosine") {
        throw std::invalid_argument("train: --schedule must be step or cosine");
    }
    if (o.precision != "f32" && o.precision != "f64") {
        throw std::invalid_argument("train: --precision must be f32 or f64");
    }
    if (o.checkpoint_every > 0 && o.checkpoint_out.empty()) {
        throw std::invalid_argument("train: --checkpoint-every requires --checkpoint-out");
    }
    const std::vector<double> fractions = parse_double_list(o.split_spec, "train: --split");
    if (fractions.size() != 3) {
        throw std::invalid_argument("train: --split expects three comma-separated fractions");
    }

    TrainConfig cfg;
    cfg.loss = o.loss == "hinge" ? LossKind::hinge(o.gamma) : LossKind::cross_entropy();
    cfg.lrc = LrcConfig{o.lambda, o.k_samples, o.gamma, o.seed};
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch_size;
    cfg.lr0 = o.lr;
    cfg.momentum = o.momentum;
    cfg.weight_decay = o.weight_decay;
    cfg.schedule.kind =
        o.schedule == "step" ? ScheduleConfig::Kind::Step : ScheduleConfig::Kind::Cosine;
    cfg.schedule.milestones = parse_size_list(o.milestones, "train: --milestones");
    cfg.schedule.divisor = o.lr_divisor;
    cfg.seed = o.seed;
    cfg.precision = o.precision == "f32" ? TrainConfig::Precision::F32 : TrainConfig::Precision::F64;
    cfg.bit_exact = o.bit_exact;
    cfg.validate();

    const std::vector<std::size_t> hidden = parse_size_list(o.hidden, "train: --hidden");

    if (o.print_config) {
        const ScheduleConfig resolved = resolved_schedule(cfg.schedule, cfg.epochs);
        ordered_json c;
        c["loss"] = o.loss;
        c["lambda"] = o.lambda;
        c["gamma"] = o.gamma;
        c["K"] = o.k_samples;
        c["epochs"] = o.epochs;
        c["batch_size"] = o.batch_size;
        c["lr"] = o.lr;
        c["momentum"] = o.momentum;
        c["weight_decay"] = o.weight_decay;
        c["schedule"] = o.schedule;
        c["milestones"] = resolved.milestones;
        c["lr_divisor"] = o.lr_divisor;
        c["seed"] = o.seed;
        c["data"] = o.data;
        c["out"] = o.out;
        c["bit_exact"] = o.bit_exact;
        c["precision"] = o.precision;
        c["hidden"] = hidden;
        c["split"] = fractions;
        c["checkpoint_out"] = o.checkpoint_out;
        c["checkpoint_every"] = o.checkpoint_every;
        std::printf("%s\n", c.dump(2).c_str());
        return 0;
    }

    const Dataset full = load_data_spec(o.data, o.seed);
    Prng split_rng(o.seed + seed_role::split);
    const std::array<Dataset, 3> parts =
        split(full, fractions[0], fractions[1], fractions[2], split_rng);
    const Dataset& train_set = parts[0];
    const Dataset& test_set = parts[2];

    MlpConfig arch{full.dim(), hidden, full.classes};
    arch.validate();

    std::ofstream metrics(o.out);
    if (!metrics) throw DataError("train: cannot open output file " + o.out);
    const EpochHook hook = [&](const Network& net, const MetricsRecord& m) {
        ordered_json line;
        line["epoch"] = m.epoch;
        line["train_loss"] = m.train_loss;
        line["reg_value"] = m.reg_value;
        line["test_loss"] = m.test_loss;
        line["test_acc"] = m.test_accuracy;
        line["lr"] = m.lr;
        line["wall_ms"] = m.wall_ms;
        metrics << line.dump() << "\n";
        if (o.checkpoint_every > 0 && (m.epoch + 1) % o.checkpoint_every == 0) {
            save_checkpoint(o.checkpoint_out, net);
        }
    };

    const TrainResult result = train(arch, train_set, test_set, cfg, hook);

    const std::size_t tail = std::min<std::size_t>(5, result.metrics.size());
    double acc5 = 0.0;
    double loss5 = 0.0;
    std::uint64_t total_ms = 0;
    for (const MetricsRecord& m : result.metrics) total_ms += m.wall_ms;
    for (std::size_t i = result.metrics.size() - tail; i < result.metrics.size(); ++i) {
        acc5 += result.metrics[i].test_accuracy;
        loss5 += result.metrics[i].test_loss;
    }
    const MetricsRecord& last = result.metrics.back();
    ordered_json s;
    s["epochs"] = result.metrics.size();
    s["train_loss"] = last.train_loss;
    s["test_loss"] = last.test_loss;
    s["test_acc"] = last.test_accuracy;
    s["mean_last5_test_loss"] = loss5 / static_cast<double>(tail);
    s["mean_last5_test_acc"] = acc5 / static_cast<double>(tail);
    s["params"] = arch.param_count();
    s["total_wall_ms"] = total_ms;
    ordered_json summary;
    summary["summary"] = s;
    metrics << summary.dump() << "\n";
    if (!metrics) throw DataError("train: failed writing output file " + o.out);
    metrics.close();

    if (!o.checkpoint_out.empty()) save_checkpoint(o.checkpoint_out, result.net);
    std::printf("trained %zu epochs on %s: test_acc=%.4f, test_loss=%.6f (metrics: %s)\n",
                result.metrics.size(), full.name.c_str(), last.test_accuracy, last.test_loss,
                o.out.c_str());
    return 0;
}

// ---------------------------------------------------------- estimate-rc

struct EstimateCli {
    std::string checkpoint;
    std::string data;
    std::string kind{"lrc-margin"};
    double r{0.0};  // 0 = 1% of checkpoint weight norm
    std::size_t sigma_samples{2000};
    std::size_t ball_samples{64};
    bool enumerate_sigma{false};
    double gamma{1.0};
    std::uint64_t seed{1};
    std::string out;
    std::size_t threads{1};
};

int run_estimate(const EstimateCli& o) {
    const Network net = load_checkpoint(o.checkpoint);
    const Dataset ds = load_data_spec(o.data, o.seed);
    check_dims(net, ds, "estimate-rc");
    const double r = default_radius(net, o.r, "estimate-rc");
    const EstimateBudgets budgets{o.sigma_samples, o.ball_samples, o.enumerate_sigma, o.threads};

    RcEstimate est;
    if (o.kind == "global") {
        Prng ball_rng(o.seed + seed_role::ball);
        const BallSample ball = sample_ball(net.w, r, o.ball_samples, ball_rng);
        const std::vector<std::vector<double>> cls = margin_value_class(net, ball, ds);
        if (o.enumerate_sigma) {
            est = enumerate_global_rc(cls);
        } else {
            Prng sigma_rng(o.seed + seed_role::sigma);
            est = estimate_global_rc(cls, o.sigma_samples, sigma_rng);
        }
        est.ball_samples = o.ball_samples;
    } else {
        if (o.ball_samples == 1) {
            std::fprintf(stderr, "warning: --ball-samples 1 explores only the ball center\n");
        }
        Prng p(o.seed + seed_role::estimator);
        est = o.kind == "lrc-margin" ? estimate_lrc_margin(net, r, ds, o.gamma, budgets, p)
                                     : estimate_lrc_ce(net, r, ds, budgets, p);
    }

    ordered_json j;
    j["kind"] = o.kind;
    j["r"] = r;
    j["gamma"] = o.gamma;
    j["seed"] = o.seed;
    j["data"] = ds.name;
    j["n"] = ds.size();
    j["threads"] = o.threads;
    j["enumerate_sigma"] = o.enumerate_sigma;
    j["estimate"] = rc_estimate_json(est);
    write_json_output(j, o.out);
    return 0;
}

// -------------------------------------------------------- verify-bounds

struct VerifyCli {
    std::string checkpoint;
    std::string data;
    int theorem{1};
    double r{0.0};
    std::size_t sigma_samples{2000};
    std::size_t ball_samples{64};
    bool enumerate_sigma{false};
    double gamma{1.0};
    std::uint64_t seed{1};
    std::string out;
    std::size_t threads{1};
};

int run_verify(const VerifyCli& o) {
    const Network net = load_checkpoint(o.checkpoint);
    const Dataset ds = load_data_spec(o.data, o.seed);
    check_dims(net, ds, "verify-bounds");
    const double r = default_radius(net, o.r, "verify-bounds");
    const EstimateBudgets budgets{o.sigma_samples, o.ball_samples, o.enumerate_sigma, o.threads};

    const BoundReport report = o.theorem == 1
                                   ? verify_theorem1(net, r, ds, o.gamma, budgets, o.seed)
                                   : verify_theorem2(net, r, ds, budgets, o.seed);

    const ordered_json j = bound_report_json(report);
    const std::string verdict =
        "bound " + std::to_string(o.theorem) + (report.satisfied ? " satisfied" : " VIOLATED") +
        ": lhs=" + std::to_string(report.lhs.value) + " rhs=" + std::to_string(report.rhs) +
        " margin=" + std::to_string(report.margin_of_satisfaction);
    if (o.out.empty()) {
        write_json_output(j, "");
        std::fprintf(stderr, "%s\n", verdict.c_str());
    } else {
        write_json_output(j, o.out);
        std::printf("%s (report: %s)\n", verdict.c_str(), o.out.c_str());
    }
    return report.satisfied ? 0 : 5;
}

// ------------------------------------------------------------ gradcheck

struct GradcheckCli {
    std::string loss{"hinge"};
    double lambda{0.5};
    std::size_t k_samples{2};
    double gamma{1.0};
    std::uint64_t seed{1};
    double tolerance{1e-5};
    double step{1e-6};
    bool sabotage{false};
};

int run_gradcheck(const GradcheckCli& o) {
    if (o.loss != "hinge" && o.loss != "ce") {
        throw std::invalid_argument("gradcheck: --loss must be hinge or ce");
    }
    if (o.lambda < 0.0) throw std::invalid_argument("gradcheck: --lambda must be >= 0");
    const LossKind kind = o.loss == "hinge" ? LossKind::hinge(o.gamma) : LossKind::cross_entropy();
    const LrcConfig lrc{o.lambda, o.k_samples, o.gamma, o.seed};
    lrc.validate();

    const std::size_t batch = 5;
    const MlpConfig arch{3, {4}, 3};
    Prng data_rng(o.seed + seed_role::data);
    Tensor x = Tensor::zeros({batch, arch.input_dim});
    for (double& v : x.data) v = data_rng.next_gaussian();
    std::vector<int> labels(batch);
    for (int& y : labels) y = static_cast<int>(data_rng.next_u64() % arch.classes);

    Prng init_rng(o.seed + seed_role::init);
    const Network net = init_network(arch, init_rng);

    const ScalarGradFn f = [&](const Tensor& w) {
        Tape tape;
        const int w_node = tape.leaf(w, true);
        const int x_node = tape.leaf(x);
        const int scores = forward(tape, arch, w_node, x_node);
        int root = loss_node(tape, scores, labels, kind);
        if (lrc.lambda > 0.0) {
            Prng sigma_rng(o.seed + seed_role::sigma);  // same sign draws every call
            const RegTerm reg = lrc_regularizer(tape, scores, labels, kind, lrc, sigma_rng);
            root = tape.add(root, tape.scale(reg.node, lrc.lambda));
        }
        const double value = tape.value(root).value();
        tape.backward(root);
        Tensor grads = tape.grad(w_node);
        if (o.sabotage) grads.data[0] += 0.25;  // negative control
        return std::make_pair(value, grads);
    };

    const GradcheckReport rep = gradcheck(f, net.w, o.step, o.tolerance);
    std::printf("gradcheck %s: objective=%.9f max_rel_error=%.3e tolerance=%.1e\n",
                rep.pass ? "PASS" : "FAIL", rep.value, rep.max_rel_error, rep.tolerance);
    std::printf("  worst coordinate %zu: analytic=%.12g numeric=%.12g\n", rep.worst_index,
                rep.worst_analytic, rep.worst_numeric);
    return rep.pass ? 0 : 1;
}

// ------------------------------------------------------------- gen-data

struct GenDataCli {
    std::string kind{"blobs"};
    std::size_t classes{3};
    std::size_t per_class{100};
    std::size_t dim{2};
    double spread{0.1};
    double noise{0.0};
    std::uint64_t seed{1};
    std::string out;
};

int run_gen_data(const GenDataCli& o) {
    Prng p(o.seed + seed_role::data);
    Dataset ds;
    if (o.kind == "blobs") {
        ds = gen_blobs(o.classes, o.per_class, o.dim, o.spread, p);
    } else if (o.kind == "spirals") {
        ds = gen_two_spirals(o.per_class, o.noise, p);
    } else {
        throw std::invalid_argument("gen-data: --kind must be blobs or spirals");
    }
    write_csv(o.out, ds);
    std::printf("wrote %zu examples (%zu classes, dim %zu) to %s\n", ds.size(), ds.classes, ds.dim(),
                o.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> tokens = normalize_lambda_args(argc, argv);
    std::vector<const char*> args;
    args.reserve(tokens.size());
    for (const std::string& t : tokens) args.push_back(t.c_str());

    CLI::App app{"MLP training lab with sign-correlation complexity control"};
    app.require_subcommand(1);
    int rc = 0;

    TrainCli tc;
    std::map<std::string, CLI::Option*> topt;
    CLI::App* t = app.add_subcommand("train", "Train an MLP, writing one JSON metrics line per epoch");
    topt["--loss"] = t->add_option("--loss", tc.loss, "Loss: hinge | ce (default hinge)");
    topt["--lambda"] = t->add_option("--lambda", tc.lambda,
                                     "Regularizer strength; bare flag means 0.5 (default 0)");
    topt["--gamma"] = t->add_option("--gamma", tc.gamma, "Hinge margin scale (default 1)");
    topt["--K"] = t->add_option("--K", tc.k_samples, "Sign draws per minibatch (default 1)");
    topt["--epochs"] = t->add_option("--epochs", tc.epochs, "Epochs (default 200)");
    topt["--batch-size"] = t->add_option("--batch-size", tc.batch_size, "Minibatch size (default 32)");
    topt["--lr"] = t->add_option("--lr", tc.lr, "Initial learning rate (default 0.05)");
    topt["--momentum"] = t->add_option("--momentum", tc.momentum, "Momentum (default 0.9)");
    topt["--weight-decay"] =
        t->add_option("--weight-decay", tc.weight_decay, "Weight decay (default 2e-4)");
    topt["--schedule"] = t->add_option("--schedule", tc.schedule, "Schedule: step | cosine");
    topt["--milestones"] = t->add_option("--milestones", tc.milestones,
                                         "Step epochs, e.g. 100,150 (default 50%,75% of epochs)");
    topt["--lr-divisor"] =
        t->add_option("--lr-divisor", tc.lr_divisor, "Step divisor per milestone (default 10)");
    topt["--seed"] = t->add_option("--seed", tc.seed, "Seed (default 1)");
    topt["--data"] = t->add_option("--data", tc.data,
                                   "Data spec: blobs:CxN[:spread] | spirals:N[:noise] | "
                                   "csv:PATH:classes | cifar10:DIR[:std]")
                         ->required();
    topt["--out"] = t->add_option("--out", tc.out, "Metrics JSONL path")->required();
    topt["--bit-exact"] =
        t->add_flag("--bit-exact", tc.bit_exact, "Zero wall-clock fields for reproducible output");
    topt["--precision"] = t->add_option("--precision", tc.precision, "f32 | f64 (default f64)");
    topt["--hidden"] = t->add_option("--hidden", tc.hidden, "Hidden widths (default 32,32)");
    topt["--split"] =
        t->add_option("--split", tc.split_spec, "train,val,test fractions (default 0.8,0.1,0.1)");
    t->add_option("--config", tc.config_path, "JSON config file; explicit flags override it");
    t->add_flag("--print-config", tc.print_config, "Print the resolved config and exit");
    topt["--checkpoint-out"] =
        t->add_option("--checkpoint-out", tc.checkpoint_out, "Write the final weights here");
    topt["--checkpoint-every"] = t->add_option("--checkpoint-every", tc.checkpoint_every,
                                               "Also write the checkpoint every N epochs");
    t->callback([&] { rc = run_train(tc, topt); });

    EstimateCli ec;
    CLI::App* e = app.add_subcommand("estimate-rc", "Estimate complexity around a checkpoint");
    e->add_option("--checkpoint", ec.checkpoint, "Checkpoint path")->required();
    e->add_option("--data", ec.data, "Data spec")->required();
    e->add_option("--kind", ec.kind, "global | lrc-margin | lrc-ce")
        ->check(CLI::IsMember({"global", "lrc-margin", "lrc-ce"}));
    e->add_option("--r", ec.r, "Ball radius (default 1% of weight norm)");
    e->add_option("--sigma-samples", ec.sigma_samples, "Sign draws (default 2000)");
    e->add_option("--ball-samples", ec.ball_samples, "Ball members incl. center (default 64)");
    e->add_flag("--enumerate-sigma", ec.enumerate_sigma, "Enumerate all sign patterns (n <= 20)");
    e->add_option("--gamma", ec.gamma, "Hinge margin scale (default 1)");
    e->add_option("--seed", ec.seed, "Seed (default 1)");
    e->add_option("--out", ec.out, "Report path (default stdout)");
    e->add_option("--threads", ec.threads, "Worker threads (default 1)");
    e->callback([&] { rc = run_estimate(ec); });

    VerifyCli vc;
    CLI::App* v = app.add_subcommand("verify-bounds", "Check a bound chain around a checkpoint");
    v->add_option("--checkpoint", vc.checkpoint, "Checkpoint path")->required();
    v->add_option("--data", vc.data, "Data spec")->required();
    v->add_option("--theorem", vc.theorem, "1 = margin chain, 2 = cross-entropy chain")
        ->check(CLI::Range(1, 2));
    v->add_option("--r", vc.r, "Ball radius (default 1% of weight norm)");
    v->add_option("--sigma-samples", vc.sigma_samples, "Sign draws (default 2000)");
    v->add_option("--ball-samples", vc.ball_samples, "Ball members incl. center (default 64)");
    v->add_flag("--enumerate-sigma", vc.enumerate_sigma, "Enumerate all sign patterns (n <= 20)");
    v->add_option("--gamma", vc.gamma, "Hinge margin scale (default 1)");
    v->add_option("--seed", vc.seed, "Seed (default 1)");
    v->add_option("--out", vc.out, "Report path (default stdout)");
    v->add_option("--threads", vc.threads, "Worker threads (default 1)");
    v->callback([&] { rc = run_verify(vc); });

    GradcheckCli gc;
    CLI::App* g = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
    g->add_option("--loss", gc.loss, "hinge | ce (default hinge)");
    g->add_option("--lambda", gc.lambda, "Regularizer strength (default 0.5)");
    g->add_option("--K", gc.k_samples, "Sign draws (default 2)");
    g->add_option("--gamma", gc.gamma, "Hinge margin scale (default 1)");
    g->add_option("--seed", gc.seed, "Seed (default 1)");
    g->add_option("--tolerance", gc.tolerance, "Max relative error (default 1e-5)");
    g->add_option("--step", gc.step, "Finite-difference step (default 1e-6)");
    g->add_flag("--sabotage", gc.sabotage)->group("");  // negative control, hidden
    g->callback([&] { rc = run_gradcheck(gc); });

    GenDataCli dc;
    CLI::App* d = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
    d->add_option("--kind", dc.kind, "blobs | spirals (default blobs)");
    d->add_option("--classes", dc.classes, "Blob classes (default 3)");
    d->add_option("--per-class", dc.per_class, "Examples per class (default 100)");
    d->add_option("--dim", dc.dim, "Blob dimension (default 2)");
    d->add_option("--spread", dc.spread, "Blob noise scale (default 0.1)");
    d->add_option("--noise", dc.noise, "Spiral noise scale (default 0)");
    d->add_option("--seed", dc.seed, "Seed (default 1)");
    d->add_option("--out", dc.out, "CSV path")->required();
    d->callback([&] { rc = run_gen_data(dc); });

    try {
        app.parse(static_cast<int>(args.size()), args.data());
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex);
        return code == 0 ? 0 : 2;
    } catch (const DataError& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 3;
    } catch (const NumericalError& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 4;
    } catch (const CapacityError& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    } catch (const std::invalid_argument& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    }
    return rc;
}
