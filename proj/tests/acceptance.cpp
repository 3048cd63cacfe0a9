// Acceptance gate: eight seeded end-to-end criteria, one pass/fail line
// each. Exits nonzero if any criterion fails. Tolerances and instance
// counts are stated inline next to each check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stud/config.hpp"
#include "stud/error.hpp"
#include "stud/distiller.hpp"
#include "stud/experiment.hpp"
#include "stud/metrics.hpp"
#include "stud/trainer.hpp"

using namespace stud;
namespace fs = std::filesystem;

namespace {

struct CriterionResult {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4f", v);
    return buffer;
}

// ---------------------------------------------------------------------
// Criterion 1: math identities on >= 1000 random instances each.

CriterionResult criterion_math_identities() {
    Rng rng(1001);
    std::size_t instances = 0;

    // Energy shift law: E(f + c) = E(f) - c, relative 1e-12.
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = 2 + uniform_below(rng, 7);
        const auto f = oracle::random_vector(rng, k, -30.0, 30.0);
        const double c = oracle::uniform_in(rng, -50.0, 50.0);
        auto shifted = f;
        for (double& x : shifted) x += c;
        if (oracle::rel_gap(energy(shifted), energy(f) - c) > 1e-12) {
            return {false, "energy shift law violated"};
        }
        ++instances;
    }

    // Distillation weight shift invariance, relative 1e-12 per element.
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + uniform_below(rng, 8);
        const auto s = oracle::random_vector(rng, n, -40.0, 40.0);
        const double c = oracle::uniform_in(rng, -40.0, 40.0);
        auto shifted = s;
        for (double& x : shifted) x += c;
        const auto a = distill_weights(s);
        const auto b = distill_weights(shifted);
        for (std::size_t j = 0; j < n; ++j) {
            if (oracle::rel_gap(a[j], b[j]) > 1e-12) {
                return {false, "weight shift invariance violated"};
            }
        }
        ++instances;
    }

    // Weights are a distribution: alpha_j >= 0, sum = 1 within 1e-9.
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + uniform_below(rng, 10);
        const auto s = oracle::random_vector(rng, n, -200.0, 200.0);
        const auto a = distill_weights(s);
        double sum = 0.0;
        for (const double w : a) {
            if (w < 0.0) return {false, "negative distillation weight"};
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            return {false, "distillation weights do not sum to 1"};
        }
        ++instances;
    }

    // Distilled features stay in the pool's coordinate-wise convex hull
    // (tolerance 1e-9), with weights forming a distribution.
    for (int i = 0; i < 1000; ++i) {
        const std::size_t m = 2 + uniform_below(rng, 4);
        const ModelParams params =
            oracle::random_params(rng, m, 3, 3, Nonlinearity::kTanh);
        CandidatePool pool;
        const std::size_t n = 1 + uniform_below(rng, 6);
        for (std::size_t j = 0; j < n; ++j) {
            pool.features.push_back(oracle::random_vector(rng, m, -4.0, 4.0));
            pool.provenance.push_back({0, j});
        }
        const std::vector<std::vector<double>> keys = {
            oracle::random_vector(rng, m, -4.0, 4.0)};
        const auto unknowns = distill_from_pool(params, keys, pool);
        if (unknowns.size() != 1) return {false, "missing distilled unknown"};
        for (std::size_t d = 0; d < m; ++d) {
            double lo = pool.features[0][d], hi = pool.features[0][d];
            for (std::size_t j = 1; j < n; ++j) {
                lo = std::min(lo, pool.features[j][d]);
                hi = std::max(hi, pool.features[j][d]);
            }
            const double v = unknowns[0].feature[d];
            if (v < lo - 1e-9 || v > hi + 1e-9) {
                return {false, "distilled feature left the convex hull"};
            }
        }
        ++instances;
    }

    return {true, std::to_string(instances) + " instances"};
}

// ---------------------------------------------------------------------
// Criterion 2: analytic gradients vs central finite differences,
// relative error <= 1e-4, >= 200 instances, m <= 8, K <= 4.

CriterionResult criterion_gradients() {
    Rng rng(2002);
    std::size_t instances = 0;
    const double tol = 1e-4;

    const auto dims = [&rng]() {
        struct Dims {
            std::size_t m, d_enc, k;
        };
        return Dims{2 + uniform_below(rng, 7), 2 + uniform_below(rng, 7),
                    2 + uniform_below(rng, 3)};
    };

    for (int i = 0; i < 40; ++i) {  // encoder backward
        const auto [m, d_enc, k] = dims();
        ModelParams params =
            oracle::random_params(rng, m, d_enc, k,
                                  i % 2 ? Nonlinearity::kTanh
                                        : Nonlinearity::kIdentity);
        auto h = oracle::random_vector(rng, m, -2.0, 2.0);
        const auto upstream = oracle::random_vector(rng, d_enc, -1.0, 1.0);
        Gradients grads = Gradients::zeros_like(params);
        backward_encode(params, h, upstream, grads);
        const auto loss = [&]() {
            const auto e = encode(params, h);
            double acc = 0.0;
            for (std::size_t d = 0; d < e.size(); ++d) acc += upstream[d] * e[d];
            return acc;
        };
        if (oracle::rel_gap(grads.enc1.weight,
                            oracle::fd_grad(loss, params.enc1.weight)) > tol ||
            oracle::rel_gap(grads.enc1.bias,
                            oracle::fd_grad(loss, params.enc1.bias)) > tol ||
            oracle::rel_gap(grads.enc2.weight,
                            oracle::fd_grad(loss, params.enc2.weight)) > tol ||
            oracle::rel_gap(grads.enc2.bias,
                            oracle::fd_grad(loss, params.enc2.bias)) > tol) {
            return {false, "encoder gradient mismatch"};
        }
        ++instances;
    }

    for (int i = 0; i < 40; ++i) {  // prediction head backward + d_input
        const auto [m, d_enc, k] = dims();
        ModelParams params =
            oracle::random_params(rng, m, d_enc, k, Nonlinearity::kTanh);
        auto h = oracle::random_vector(rng, m, -2.0, 2.0);
        const auto upstream = oracle::random_vector(rng, k, -1.0, 1.0);
        Gradients grads = Gradients::zeros_like(params);
        std::vector<double> d_input;
        backward_class_logits(params, h, upstream, grads, &d_input);
        const auto loss = [&]() {
            const auto f = class_logits(params, h);
            double acc = 0.0;
            for (std::size_t j = 0; j < f.size(); ++j) acc += upstream[j] * f[j];
            return acc;
        };
        if (oracle::rel_gap(grads.pred.weight,
                            oracle::fd_grad(loss, params.pred.weight)) > tol ||
            oracle::rel_gap(grads.pred.bias,
                            oracle::fd_grad(loss, params.pred.bias)) > tol ||
            oracle::rel_gap(d_input, oracle::fd_grad(loss, h)) > tol) {
            return {false, "prediction head gradient mismatch"};
        }
        ++instances;
    }

    for (int i = 0; i < 40; ++i) {  // energy chain
        const auto [m, d_enc, k] = dims();
        ModelParams params =
            oracle::random_params(rng, m, d_enc, k, Nonlinearity::kTanh);
        auto h = oracle::random_vector(rng, m, -2.0, 2.0);
        Gradients grads = Gradients::zeros_like(params);
        std::vector<double> d_input;
        const auto logits = class_logits(params, h);
        backward_class_logits(params, h, backward_energy(logits, 1.0), grads,
                              &d_input);
        const auto loss = [&]() { return energy(class_logits(params, h)); };
        if (oracle::rel_gap(grads.pred.weight,
                            oracle::fd_grad(loss, params.pred.weight)) > tol ||
            oracle::rel_gap(grads.pred.bias,
                            oracle::fd_grad(loss, params.pred.bias)) > tol ||
            oracle::rel_gap(d_input, oracle::fd_grad(loss, h)) > tol) {
            return {false, "energy chain gradient mismatch"};
        }
        ++instances;
    }

    for (int i = 0; i < 40; ++i) {  // ood probability partials
        double e = oracle::uniform_in(rng, -6.0, 6.0);
        double theta = oracle::uniform_in(rng, 0.1, 3.0);
        const OodProbabilityGrad grad = backward_ood_probability(e, theta, 1.0);
        const auto prob = [&]() { return ood_probability(e, theta); };
        std::span<double> e_view(&e, 1);
        std::span<double> theta_view(&theta, 1);
        if (oracle::rel_gap(grad.d_energy, oracle::fd_grad(prob, e_view)[0]) >
                tol ||
            oracle::rel_gap(grad.d_theta_u,
                            oracle::fd_grad(prob, theta_view)[0]) > tol) {
            return {false, "ood probability gradient mismatch"};
        }
        ++instances;
    }

    for (int i = 0; i < 40; ++i) {  // detection loss
        const auto [m, d_enc, k] = dims();
        ModelParams params =
            oracle::random_params(rng, m, d_enc, k, Nonlinearity::kTanh);
        std::vector<LabeledFeature> objects;
        const std::size_t n = 1 + uniform_below(rng, 5);
        for (std::size_t j = 0; j < n; ++j) {
            objects.push_back({oracle::random_vector(rng, m, -2.0, 2.0),
                               static_cast<int>(uniform_below(rng, k))});
        }
        const LossValue out = detection_loss(params, objects);
        const auto loss = [&]() { return detection_loss(params, objects).value; };
        if (oracle::rel_gap(out.grads.pred.weight,
                            oracle::fd_grad(loss, params.pred.weight)) > tol ||
            oracle::rel_gap(out.grads.pred.bias,
                            oracle::fd_grad(loss, params.pred.bias)) > tol) {
            return {false, "detection loss gradient mismatch"};
        }
        ++instances;
    }

    for (int i = 0; i < 40; ++i) {  // uncertainty loss, including theta_u
        const auto [m, d_enc, k] = dims();
        ModelParams params =
            oracle::random_params(rng, m, d_enc, k, Nonlinearity::kTanh);
        std::vector<std::vector<double>> ids, unknowns;
        for (std::size_t j = 0; j < 1 + uniform_below(rng, 4); ++j) {
            ids.push_back(oracle::random_vector(rng, m, -2.0, 2.0));
        }
        for (std::size_t j = 0; j < 1 + uniform_below(rng, 4); ++j) {
            unknowns.push_back(oracle::random_vector(rng, m, -2.0, 2.0));
        }
        const UncertaintyLoss out = uncertainty_loss(params, ids, unknowns);
        const auto loss = [&]() {
            return uncertainty_loss(params, ids, unknowns).value;
        };
        std::span<double> theta_view(&params.theta_u, 1);
        if (oracle::rel_gap(out.grads.pred.weight,
                            oracle::fd_grad(loss, params.pred.weight)) > tol ||
            oracle::rel_gap(out.grads.pred.bias,
                            oracle::fd_grad(loss, params.pred.bias)) > tol ||
            oracle::rel_gap(out.grads.theta_u,
                            oracle::fd_grad(loss, theta_view)[0]) > tol) {
            return {false, "uncertainty loss gradient mismatch"};
        }
        ++instances;
    }

    return {true, std::to_string(instances) + " instances, rel tol 1e-4"};
}

// ---------------------------------------------------------------------
// Criterion 3: rank metrics equal brute-force oracles exactly on
// >= 500 random instances with n <= 50.

CriterionResult criterion_metric_oracles() {
    Rng rng(3003);
    std::size_t instances = 0;
    for (int i = 0; i < 600; ++i) {
        const std::size_t n_id = 1 + uniform_below(rng, 50);
        const std::size_t n_ood = 1 + uniform_below(rng, 50);
        const bool lattice = i % 2 == 0;
        std::vector<double> id_scores, ood_scores;
        for (std::size_t j = 0; j < n_id; ++j) {
            id_scores.push_back(lattice
                                    ? static_cast<double>(uniform_below(rng, 9))
                                    : oracle::uniform_in(rng, -2.0, 2.0));
        }
        for (std::size_t j = 0; j < n_ood; ++j) {
            ood_scores.push_back(
                lattice ? static_cast<double>(uniform_below(rng, 9))
                        : oracle::uniform_in(rng, -2.5, 1.5));
        }
        if (auroc(id_scores, ood_scores) !=
            oracle::auroc_pairwise(id_scores, ood_scores)) {
            return {false, "auroc differs from the pairwise oracle"};
        }
        const std::size_t den = 2 + uniform_below(rng, 19);
        const std::size_t num = 1 + uniform_below(rng, den);
        const double tpr = static_cast<double>(num) / static_cast<double>(den);
        if (fpr_at_tpr(id_scores, ood_scores, tpr) !=
            oracle::fpr_bruteforce(id_scores, ood_scores, num, den)) {
            return {false, "fpr_at_tpr differs from the brute-force oracle"};
        }
        ++instances;
    }
    return {true, std::to_string(instances) + " instances, exact"};
}

// ---------------------------------------------------------------------
// Criterion 4: the full distillation pipeline matches an independent
// straight-line reimplementation within 1e-9, >= 200 instances.

struct StraightPipeline {
    std::vector<std::vector<double>> pool;
    std::vector<oracle::DistillStraight> unknowns;
};

std::vector<double> straight_logits_ld(const ModelParams& params,
                                       const std::vector<double>& h) {
    std::vector<double> f(params.pred.out_dim);
    for (std::size_t o = 0; o < params.pred.out_dim; ++o) {
        long double acc = params.pred.bias[o];
        for (std::size_t i = 0; i < params.pred.in_dim; ++i) {
            acc += static_cast<long double>(
                       params.pred.weight[o * params.pred.in_dim + i]) *
                   h[i];
        }
        f[o] = static_cast<double>(acc);
    }
    return f;
}

StraightPipeline straight_distill(const ModelParams& params,
                                  const FrameProposals& key_frame,
                                  const std::vector<FrameProposals>& refs,
                                  const DistillSettings& settings) {
    StraightPipeline out;
    // Keys: ID-truth proposals above the objectness threshold, frame order.
    std::vector<std::vector<double>> keys;
    for (const ObjectProposal& p : key_frame.proposals) {
        if (p.objectness >= settings.objectness_threshold && !p.truth.is_ood()) {
            keys.push_back(p.feature);
        }
    }
    // Per reference frame: collect, rank by energy ascending, keep the
    // 1-based ranks r with lo*n <= 100*r <= hi*n.
    for (const FrameProposals& frame : refs) {
        std::vector<std::vector<double>> collected;
        for (const ObjectProposal& p : frame.proposals) {
            if (p.objectness >= settings.objectness_threshold) {
                collected.push_back(p.feature);
            }
        }
        const std::size_t n = collected.size();
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t i = 0; i < n; ++i) {
            ranked.emplace_back(
                -oracle::logsumexp_ld(straight_logits_ld(params, collected[i])),
                i);
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) {
                             return a.first < b.first;
                         });
        std::vector<std::size_t> selected;
        for (std::size_t pos = 0; pos < n; ++pos) {
            const double r100 = 100.0 * static_cast<double>(pos + 1);
            if (r100 >= settings.percentile_lo * static_cast<double>(n) &&
                r100 <= settings.percentile_hi * static_cast<double>(n)) {
                selected.push_back(ranked[pos].second);
            }
        }
        std::sort(selected.begin(), selected.end());
        for (std::size_t i : selected) out.pool.push_back(collected[i]);
    }
    if (keys.empty() || out.pool.empty()) return out;
    for (const auto& key : keys) {
        out.unknowns.push_back(oracle::distill_straight(params, key, out.pool));
    }
    return out;
}

CriterionResult criterion_distillation_oracle() {
    Rng rng(4004);
    std::size_t instances = 0;
    const std::vector<std::pair<double, double>> bands = {
        {40.0, 60.0}, {0.0, 100.0}, {0.0, 20.0}, {80.0, 100.0}};

    while (instances < 200) {
        const std::size_t m = 3 + uniform_below(rng, 4);
        const ModelParams params =
            oracle::random_params(rng, m, 3, 3, Nonlinearity::kTanh);
        DistillSettings settings;
        const auto& band = bands[uniform_below(rng, bands.size())];
        settings.percentile_lo = band.first;
        settings.percentile_hi = band.second;

        const auto make_frame = [&](std::size_t index, bool with_truth) {
            FrameProposals frame;
            frame.frame_index = index;
            const std::size_t count = 4 + uniform_below(rng, 7);
            for (std::size_t i = 0; i < count; ++i) {
                ObjectProposal p;
                p.feature = oracle::random_vector(rng, m, -3.0, 3.0);
                p.objectness = oracle::uniform_in(rng, 0.0, 1.0);
                p.truth = with_truth && uniform_below(rng, 4) != 0
                              ? Truth::id(static_cast<int>(uniform_below(rng, 3)))
                              : Truth::ood();
                frame.proposals.push_back(std::move(p));
            }
            return frame;
        };
        const FrameProposals key_frame = make_frame(0, true);
        std::vector<FrameProposals> refs;
        for (std::size_t t = 0; t < 2 + uniform_below(rng, 3); ++t) {
            refs.push_back(make_frame(t + 1, false));
        }

        const auto got = distill_unknowns(params, key_frame, refs, settings);
        const StraightPipeline want =
            straight_distill(params, key_frame, refs, settings);
        if (got.size() != want.unknowns.size()) {
            return {false, "unknown count differs from the oracle"};
        }
        if (got.empty()) continue;  // degenerate draw, does not count
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (got[i].weights.size() != want.pool.size()) {
                return {false, "pool size differs from the oracle"};
            }
            for (std::size_t j = 0; j < want.pool.size(); ++j) {
                if (std::abs(got[i].weights[j] - want.unknowns[i].weights[j]) >
                    1e-9) {
                    return {false, "weights differ from the oracle"};
                }
            }
            for (std::size_t d = 0; d < m; ++d) {
                if (std::abs(got[i].feature[d] - want.unknowns[i].feature[d]) >
                    1e-9) {
                    return {false, "distilled feature differs from the oracle"};
                }
            }
        }
        ++instances;
    }
    return {true, std::to_string(instances) + " instances, tol 1e-9"};
}

// ---------------------------------------------------------------------
// Shared benchmark plumbing for criteria 5 and 6.

struct BenchmarkRun {
    ModelParams initial;
    TrainResult trained;
    Stream eval_stream;
};

BenchmarkRun run_benchmark(std::uint64_t seed, double beta) {
    ExperimentConfig config = default_config();
    config.sim.seed = seed;
    config.train.seed = seed;
    config.train.beta = beta;

    BenchmarkRun run;
    const Stream train_stream =
        generate_stream(config.sim, config.train_videos, kTrainStreamSalt);
    run.initial = init_model(config.sim.feature_dim, config.d_enc,
                             config.sim.num_classes, config.nonlin,
                             derive_seed(config.train.seed, kModelInitSalt));
    run.trained = train(train_stream, run.initial, config.train);
    run.eval_stream =
        generate_stream(config.sim, config.eval.eval_videos, kEvalStreamSalt);
    return run;
}

// ---------------------------------------------------------------------
// Criterion 5: on the default benchmark the unknown-vs-ID energy gap
// widens and the stud AUROC beats its initialization by >= 0.10 while
// reaching >= 0.85.

CriterionResult criterion_separation_trend() {
    const BenchmarkRun run = run_benchmark(7, 0.05);

    std::map<std::size_t, std::pair<double, std::size_t>> per_epoch;
    for (const TrainLogRecord& r : run.trained.log.records) {
        if (std::isnan(r.mean_energy_unknown)) continue;
        auto& [sum, count] = per_epoch[r.epoch];
        sum += r.mean_energy_unknown - r.mean_energy_id;
        ++count;
    }
    if (per_epoch.size() < 2) {
        return {false, "not enough epochs with distilled unknowns"};
    }
    const auto first = per_epoch.begin();
    const auto last = std::prev(per_epoch.end());
    const double gap_first = first->second.first /
                             static_cast<double>(first->second.second);
    const double gap_last =
        last->second.first / static_cast<double>(last->second.second);

    const double auroc_init =
        evaluate(run.initial, run.eval_stream, Method::kStud, 0.5).auroc;
    const double auroc_trained =
        evaluate(run.trained.params, run.eval_stream, Method::kStud, 0.5).auroc;

    const bool gap_ok = gap_last > gap_first;
    const bool gain_ok = auroc_trained >= auroc_init + 0.10;
    const bool level_ok = auroc_trained >= 0.85;
    std::string detail = "gap " + fmt(gap_first) + " -> " + fmt(gap_last) +
                         ", auroc " + fmt(auroc_init) + " -> " +
                         fmt(auroc_trained);
    if (!gap_ok) detail += " [gap did not widen]";
    if (!gain_ok) detail += " [gain < 0.10]";
    if (!level_ok) detail += " [auroc < 0.85]";
    return {gap_ok && gain_ok && level_ok, detail};
}

// ---------------------------------------------------------------------
// Criterion 6: over seeds {7, 8, 9}, mean stud AUROC (beta = 0.05) is at
// least the mean msp and mean energy AUROC on beta = 0 models.

CriterionResult criterion_baseline_ordering() {
    double sum_stud = 0.0, sum_msp = 0.0, sum_energy = 0.0;
    for (const std::uint64_t seed : {7ULL, 8ULL, 9ULL}) {
        const BenchmarkRun stud_run = run_benchmark(seed, 0.05);
        sum_stud += evaluate(stud_run.trained.params, stud_run.eval_stream,
                             Method::kStud, 0.5)
                        .auroc;
        const BenchmarkRun plain_run = run_benchmark(seed, 0.0);
        sum_msp += evaluate(plain_run.trained.params, plain_run.eval_stream,
                            Method::kMsp, 0.5)
                       .auroc;
        sum_energy += evaluate(plain_run.trained.params, plain_run.eval_stream,
                               Method::kEnergy, 0.5)
                          .auroc;
    }
    const double mean_stud = sum_stud / 3.0;
    const double mean_msp = sum_msp / 3.0;
    const double mean_energy = sum_energy / 3.0;
    const bool pass = mean_stud >= mean_msp && mean_stud >= mean_energy;
    return {pass, "mean auroc stud " + fmt(mean_stud) + ", msp " +
                      fmt(mean_msp) + ", energy " + fmt(mean_energy)};
}

// ---------------------------------------------------------------------
// Criterion 7: R and percentile sweeps complete, emit one summary row per
// value, and reproduce byte-identically when re-run.

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EvalError("missing " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

CriterionResult check_sweep(const std::string& dir, const std::string& axis,
                            const std::vector<std::string>& tokens) {
    ConfigFile file = ConfigFile::parse_text(
        "[sweep]\naxis = " + axis + "\nvalues = [" + tokens[0] + ", " +
            tokens[1] + ", " + tokens[2] + "]\n[output]\ndir = " + dir + "\n",
        "<acceptance>");
    const ExperimentConfig config = resolve_config(file);
    RunOptions quiet;
    quiet.quiet = true;

    fs::remove_all(dir);
    const RunResult result = run_experiment(config, quiet);
    if (!result.swept || result.sweep_rows.size() != tokens.size()) {
        return {false, axis + " sweep did not produce one row per value"};
    }

    const std::string summary = read_file(dir + "/sweep_summary.csv");
    std::istringstream lines(summary);
    std::string line;
    if (!std::getline(lines, line) || line != "axis_value,fpr95,auroc") {
        return {false, axis + " sweep summary header is wrong"};
    }
    for (const std::string& token : tokens) {
        if (!std::getline(lines, line) || line.rfind(token + ",", 0) != 0) {
            return {false, axis + " sweep summary misses a row for " + token};
        }
    }
    if (std::getline(lines, line)) {
        return {false, axis + " sweep summary has extra rows"};
    }

    std::map<std::string, std::string> snapshot;
    snapshot["sweep_summary.csv"] = summary;
    snapshot["manifest.txt"] = read_file(dir + "/manifest.txt");
    if (snapshot["manifest.txt"].find("status = complete") ==
        std::string::npos) {
        return {false, axis + " sweep manifest is not complete"};
    }
    for (const std::string& token : tokens) {
        const std::string sub = axis + "_" + token + "/manifest.txt";
        snapshot[sub] = read_file(dir + "/" + sub);
        if (snapshot[sub].find("status = complete") == std::string::npos) {
            return {false, axis + " sweep subrun " + token + " incomplete"};
        }
    }

    run_experiment(config, quiet);
    for (const auto& [name, bytes] : snapshot) {
        if (read_file(dir + "/" + name) != bytes) {
            return {false, axis + " sweep re-run changed " + name};
        }
    }
    return {true, ""};
}

CriterionResult criterion_sweeps() {
    const CriterionResult r_sweep =
        check_sweep("acceptance_out/sweep_R", "R", {"3", "9", "inf"});
    if (!r_sweep.pass) return r_sweep;
    const CriterionResult p_sweep =
        check_sweep("acceptance_out/sweep_percentile", "percentile",
                    {"0-20", "40-60", "80-100"});
    if (!p_sweep.pass) return p_sweep;
    return {true, "R and percentile sweeps, 3 rows each, byte-stable re-runs"};
}

// ---------------------------------------------------------------------
// Criterion 8: two runs of the default config are byte-identical on
// train_log.csv, the params file, and every metrics CSV.

CriterionResult criterion_determinism() {
    RunOptions quiet;
    quiet.quiet = true;
    ExperimentConfig config = default_config();

    const std::string dir_a = "acceptance_out/default_a";
    const std::string dir_b = "acceptance_out/default_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    config.output_dir = dir_a;
    run_experiment(config, quiet);
    config.output_dir = dir_b;
    run_experiment(config, quiet);

    std::vector<std::string> names = {"train_log.csv", "params.txt"};
    for (const std::string tag : {"stud", "msp", "energy"}) {
        names.push_back("metrics_" + tag + ".txt");
        names.push_back("scores_" + tag + ".csv");
        names.push_back("hist_scores_" + tag + ".csv");
        names.push_back("hist_energies_" + tag + ".csv");
    }
    for (const std::string& name : names) {
        if (read_file(dir_a + "/" + name) != read_file(dir_b + "/" + name)) {
            return {false, name + " differs between identical runs"};
        }
    }
    return {true, std::to_string(names.size()) + " files byte-identical"};
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        std::string name;
        double time_limit_s;
        std::function<CriterionResult()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "math identities", 10.0, criterion_math_identities},
        {2, "gradient finite differences", 30.0, criterion_gradients},
        {3, "metric oracles", 10.0, criterion_metric_oracles},
        {4, "distillation oracle", 10.0, criterion_distillation_oracle},
        {5, "separation trend", 300.0, criterion_separation_trend},
        {6, "baseline ordering", 900.0, criterion_baseline_ordering},
        {7, "sweep harness", 900.0, criterion_sweeps},
        {8, "determinism", 300.0, criterion_determinism},
    };

    bool all_pass = true;
    for (const Criterion& criterion : criteria) {
        const auto start = Clock::now();
        CriterionResult result;
        try {
            result = criterion.run();
        } catch (const std::exception& e) {
            result = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed = seconds_since(start);
        if (elapsed > criterion.time_limit_s) {
            result.pass = false;
            result.detail += " [exceeded " +
                             std::to_string(criterion.time_limit_s) +
                             "s budget]";
        }
        std::printf("%s criterion %d (%s): %s (%.2fs)\n",
                    result.pass ? "PASS" : "FAIL", criterion.number,
                    criterion.name.c_str(), result.detail.c_str(), elapsed);
        std::fflush(stdout);
        all_pass = all_pass && result.pass;
    }
    return all_pass ? 0 : 1;
}
