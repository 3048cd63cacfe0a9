#pragma once

#include <span>
#include <string>
#include <vector>

#include "stud/model.hpp"
#include "stud/sim.hpp"

// Test-time OOD scoring and binary separability metrics. Scores are
// oriented so that higher means more ID. AUROC gives half credit to ties
// (Mann-Whitney convention); the FPR95 threshold gamma is an order
// statistic of the ID scores, never interpolated.

namespace stud {

enum class Method { kStud, kMsp, kEnergy };

std::string method_name(Method method);
Method parse_method(std::string_view token);

// sigmoid(-theta_u * E(class_logits(params, h))): the uncertainty-branch
// probability of the object being ID.
double stud_score(const ModelParams& params, std::span<const double> h);

struct BaselineScores {
    double msp = 0.0;           // max softmax probability
    double energy_score = 0.0;  // -E = logsumexp(f)
};

BaselineScores baseline_scores(const ModelParams& params,
                               std::span<const double> h);

// The k-th largest ID score with k = ceil(tpr_target * n): the largest
// gamma such that at least that many ID scores are >= gamma.
double choose_threshold(std::span<const double> id_scores,
                        double tpr_target = 0.95);

// Fraction of OOD scores >= choose_threshold(id_scores, tpr_target).
double fpr_at_tpr(std::span<const double> id_scores,
                  std::span<const double> ood_scores,
                  double tpr_target = 0.95);

// (#{id > ood} + 0.5 * #{id == ood}) / (n_id * n_ood).
double auroc(std::span<const double> id_scores,
             std::span<const double> ood_scores);

struct ScoredObject {
    double score = 0.0;
    bool is_ood = false;
    double energy = 0.0;
};

struct Histogram {
    std::vector<double> bin_left;
    std::vector<double> bin_right;
    std::vector<std::size_t> count_id;
    std::vector<std::size_t> count_ood;
};

inline constexpr std::size_t kHistogramBins = 50;

// Fixed-width bins over the observed value range; every object lands in
// exactly one bin (the top edge closes the last bin).
Histogram build_histogram(std::span<const ScoredObject> objects,
                          bool over_energy);

struct MetricsReport {
    Method method = Method::kStud;
    double fpr95 = 0.0;
    double auroc = 0.0;
    double gamma = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    Histogram score_hist;
    Histogram energy_hist;
    std::vector<ScoredObject> rows;
};

// Scores every collected object in the stream with `method`. Throws
// EvalError naming the missing truth class when either side is absent.
MetricsReport evaluate(const ModelParams& params, const Stream& eval_stream,
                       Method method, double objectness_threshold);

// key: value text report.
void write_metrics_report(const MetricsReport& report, const std::string& path);
// CSV: score,truth,energy
void write_scores_csv(const MetricsReport& report, const std::string& path);
// CSV: bin_left,bin_right,count_id,count_ood
void write_histogram_csv(const Histogram& hist, const std::string& path);

}  // namespace stud
