#include "stud/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>

#include "stud/error.hpp"
#include "stud/mathutil.hpp"
#include "stud/text.hpp"

namespace stud {

std::string method_name(Method method) {
    switch (method) {
        case Method::kStud: return "stud";
        case Method::kMsp: return "msp";
        case Method::kEnergy: return "energy";
    }
    return "stud";
}

Method parse_method(std::string_view token) {
    if (token == "stud") return Method::kStud;
    if (token == "msp") return Method::kMsp;
    if (token == "energy") return Method::kEnergy;
    throw ConfigError("unknown method '" + std::string(token) +
                      "' (expected stud, msp or energy)");
}

double stud_score(const ModelParams& params, std::span<const double> h) {
    return ood_probability(energy(class_logits(params, h)), params.theta_u);
}

BaselineScores baseline_scores(const ModelParams& params,
                               std::span<const double> h) {
    const std::vector<double> f = class_logits(params, h);
    std::vector<double> p;
    softmax(f, p);
    BaselineScores out;
    out.msp = *std::max_element(p.begin(), p.end());
    out.energy_score = -energy(f);
    return out;
}

namespace {

// ceil(tpr * n) with a guard against the product landing a hair above an
// integer it mathematically equals.
std::size_t required_id_count(double tpr_target, std::size_t n) {
    const double raw = tpr_target * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    if (k < 1) k = 1;
    if (k > n) k = n;
    return k;
}

}  // namespace

double choose_threshold(std::span<const double> id_scores, double tpr_target) {
    if (id_scores.empty()) {
        throw EvalError("choose_threshold: no ID scores");
    }
    if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
        throw EvalError("choose_threshold: tpr_target must be in (0, 1]");
    }
    std::vector<double> sorted(id_scores.begin(), id_scores.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    return sorted[required_id_count(tpr_target, sorted.size()) - 1];
}

double fpr_at_tpr(std::span<const double> id_scores,
                  std::span<const double> ood_scores, double tpr_target) {
    if (ood_scores.empty()) {
        throw EvalError("fpr_at_tpr: no OOD scores");
    }
    const double gamma = choose_threshold(id_scores, tpr_target);
    std::size_t false_positives = 0;
    for (double s : ood_scores) {
        if (s >= gamma) ++false_positives;
    }
    return static_cast<double>(false_positives) /
           static_cast<double>(ood_scores.size());
}

double auroc(std::span<const double> id_scores,
             std::span<const double> ood_scores) {
    if (id_scores.empty() || ood_scores.empty()) {
        throw EvalError("auroc: both score lists must be nonempty");
    }
    std::vector<double> ood_sorted(ood_scores.begin(), ood_scores.end());
    std::sort(ood_sorted.begin(), ood_sorted.end());

    // 2 * wins + ties, accumulated in integers so the result is the exact
    // rational that an all-pairs count would produce.
    std::uint64_t twice_wins_plus_ties = 0;
    for (double s : id_scores) {
        const auto lo = std::lower_bound(ood_sorted.begin(), ood_sorted.end(), s);
        const auto hi = std::upper_bound(lo, ood_sorted.end(), s);
        const auto below = static_cast<std::uint64_t>(lo - ood_sorted.begin());
        const auto ties = static_cast<std::uint64_t>(hi - lo);
        twice_wins_plus_ties += 2 * below + ties;
    }
    return static_cast<double>(twice_wins_plus_ties) /
           (2.0 * static_cast<double>(id_scores.size()) *
            static_cast<double>(ood_scores.size()));
}

Histogram build_histogram(std::span<const ScoredObject> objects,
                          bool over_energy) {
    if (objects.empty()) {
        throw EvalError("build_histogram: no scored objects");
    }
    auto value_of = [over_energy](const ScoredObject& o) {
        return over_energy ? o.energy : o.score;
    };
    double lo = value_of(objects.front());
    double hi = lo;
    for (const ScoredObject& o : objects) {
        lo = std::min(lo, value_of(o));
        hi = std::max(hi, value_of(o));
    }
    if (hi == lo) hi = lo + 1.0;  // degenerate range: everything in bin 0

    Histogram hist;
    hist.bin_left.resize(kHistogramBins);
    hist.bin_right.resize(kHistogramBins);
    hist.count_id.assign(kHistogramBins, 0);
    hist.count_ood.assign(kHistogramBins, 0);
    const double width = (hi - lo) / static_cast<double>(kHistogramBins);
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
        hist.bin_left[b] = lo + width * static_cast<double>(b);
        hist.bin_right[b] = lo + width * static_cast<double>(b + 1);
    }
    for (const ScoredObject& o : objects) {
        auto b = static_cast<std::size_t>((value_of(o) - lo) / width);
        if (b >= kHistogramBins) b = kHistogramBins - 1;
        if (o.is_ood) {
            ++hist.count_ood[b];
        } else {
            ++hist.count_id[b];
        }
    }
    return hist;
}

MetricsReport evaluate(const ModelParams& params, const Stream& eval_stream,
                       Method method, double objectness_threshold) {
    MetricsReport report;
    report.method = method;

    for (const Video& video : eval_stream) {
        for (const FrameProposals& frame : video.frames) {
            for (const auto& c : collect_features(frame, objectness_threshold)) {
                ScoredObject obj;
                obj.is_ood = frame.proposals[c.index].truth.is_ood();
                obj.energy = energy(class_logits(params, c.feature));
                switch (method) {
                    case Method::kStud:
                        obj.score = ood_probability(obj.energy, params.theta_u);
                        break;
                    case Method::kMsp:
                        obj.score = baseline_scores(params, c.feature).msp;
                        break;
                    case Method::kEnergy:
                        obj.score = -obj.energy;
                        break;
                }
                report.rows.push_back(obj);
            }
        }
    }

    std::vector<double> id_scores;
    std::vector<double> ood_scores;
    for (const ScoredObject& o : report.rows) {
        (o.is_ood ? ood_scores : id_scores).push_back(o.score);
    }
    if (id_scores.empty()) {
        throw EvalError("evaluate: no ID objects above the objectness threshold");
    }
    if (ood_scores.empty()) {
        throw EvalError("evaluate: no OOD objects above the objectness threshold");
    }
    report.n_id = id_scores.size();
    report.n_ood = ood_scores.size();
    report.gamma = choose_threshold(id_scores);
    report.fpr95 = fpr_at_tpr(id_scores, ood_scores);
    report.auroc = auroc(id_scores, ood_scores);
    report.score_hist = build_histogram(report.rows, /*over_energy=*/false);
    report.energy_hist = build_histogram(report.rows, /*over_energy=*/true);
    return report;
}

void write_metrics_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << "method: " << method_name(report.method) << '\n'
        << "fpr95: " << format_double(report.fpr95) << '\n'
        << "auroc: " << format_double(report.auroc) << '\n'
        << "gamma: " << format_double(report.gamma) << '\n'
        << "n_id: " << report.n_id << '\n'
        << "n_ood: " << report.n_ood << '\n';
}

void write_scores_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << "score,truth,energy\n";
    for (const ScoredObject& o : report.rows) {
        out << format_double(o.score) << ',' << (o.is_ood ? "ood" : "id") << ','
            << format_double(o.energy) << '\n';
    }
}

void write_histogram_csv(const Histogram& hist, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << "bin_left,bin_right,count_id,count_ood\n";
    for (std::size_t b = 0; b < hist.bin_left.size(); ++b) {
        out << format_double(hist.bin_left[b]) << ','
            << format_double(hist.bin_right[b]) << ',' << hist.count_id[b]
            << ',' << hist.count_ood[b] << '\n';
    }
}

}  // namespace stud
