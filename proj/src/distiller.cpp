#include "stud/distiller.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "stud/error.hpp"
#include "stud/mathutil.hpp"
#include "stud/text.hpp"

namespace stud {

std::vector<std::size_t> filter_candidates(std::span<const double> energies,
                                           double percentile_lo,
                                           double percentile_hi) {
    if (!(percentile_lo >= 0.0 && percentile_lo < percentile_hi &&
          percentile_hi <= 100.0)) {
        throw ConfigError("energy filtering percentiles must satisfy "
                          "0 <= p < q <= 100");
    }
    const std::size_t n = energies.size();
    if (n == 0) return {};

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&energies](std::size_t a, std::size_t b) {
                         return energies[a] < energies[b];
                     });

    std::vector<std::size_t> selected;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const double rank100 = 100.0 * static_cast<double>(pos + 1);
        if (rank100 >= percentile_lo * static_cast<double>(n) &&
            rank100 <= percentile_hi * static_cast<double>(n)) {
            selected.push_back(order[pos]);
        }
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

double dissimilarity(std::span<const double> encoded_key,
                     std::span<const double> encoded_ref) {
    return squared_l2_distance(encoded_key, encoded_ref);
}

std::vector<double> distill_weights(std::span<const double> scores) {
    std::vector<double> alpha;
    softmax(scores, alpha);
    return alpha;
}

CandidateSet select_candidates(const ModelParams& params,
                               const FrameProposals& frame,
                               const DistillSettings& settings) {
    CandidateSet set;
    set.frame_index = frame.frame_index;

    const auto collected =
        collect_features(frame, settings.objectness_threshold);
    std::vector<double> energies(collected.size());
    for (std::size_t i = 0; i < collected.size(); ++i) {
        energies[i] = energy(class_logits(params, collected[i].feature));
    }
    const auto kept = filter_candidates(energies, settings.percentile_lo,
                                        settings.percentile_hi);
    set.entries.reserve(kept.size());
    for (std::size_t i : kept) {
        set.entries.push_back(
            {collected[i].index, collected[i].feature, energies[i]});
    }
    return set;
}

CandidatePool pool_candidates(std::span<const CandidateSet> sets) {
    CandidatePool pool;
    for (const CandidateSet& set : sets) {
        for (const CandidateEntry& e : set.entries) {
            pool.features.push_back(e.feature);
            pool.provenance.push_back({set.frame_index, e.proposal_index});
        }
    }
    return pool;
}

std::vector<DistilledUnknown> distill_from_pool(
    const ModelParams& params,
    std::span<const std::vector<double>> key_features,
    const CandidatePool& pool) {
    std::vector<DistilledUnknown> unknowns;
    const std::size_t n = pool.features.size();
    if (n == 0 || key_features.empty()) return unknowns;

    std::vector<std::vector<double>> encoded_pool(n);
    for (std::size_t j = 0; j < n; ++j) {
        encoded_pool[j] = encode(params, pool.features[j]);
    }

    const std::size_t m = pool.features.front().size();
    unknowns.reserve(key_features.size());
    std::vector<double> scores(n);
    for (const auto& key : key_features) {
        const std::vector<double> encoded_key = encode(params, key);
        for (std::size_t j = 0; j < n; ++j) {
            scores[j] = dissimilarity(encoded_key, encoded_pool[j]);
        }
        DistilledUnknown u;
        u.weights = distill_weights(scores);
        u.feature.assign(m, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t d = 0; d < m; ++d) {
                u.feature[d] += u.weights[j] * pool.features[j][d];
            }
        }
        u.provenance = pool.provenance;
        unknowns.push_back(std::move(u));
    }
    return unknowns;
}

std::vector<DistilledUnknown> distill_unknowns(
    const ModelParams& params, const FrameProposals& key_frame,
    std::span<const FrameProposals> reference_frames,
    const DistillSettings& settings) {
    std::vector<std::vector<double>> key_features;
    for (const auto& c :
         collect_features(key_frame, settings.objectness_threshold)) {
        if (!key_frame.proposals[c.index].truth.is_ood()) {
            key_features.push_back(c.feature);
        }
    }
    if (key_features.empty()) return {};

    std::vector<CandidateSet> sets;
    sets.reserve(reference_frames.size());
    for (const FrameProposals& frame : reference_frames) {
        sets.push_back(select_candidates(params, frame, settings));
    }
    return distill_from_pool(params, key_features, pool_candidates(sets));
}

void add_encoder_grads_through_weights(
    const ModelParams& params,
    std::span<const std::vector<double>> key_features,
    std::span<const DistilledUnknown> unknowns, const CandidatePool& pool,
    std::span<const double> d_unknown_energy, Gradients& grads) {
    const std::size_t n = pool.features.size();
    if (n == 0 || unknowns.empty()) return;

    std::vector<std::vector<double>> encoded_pool(n);
    for (std::size_t j = 0; j < n; ++j) {
        encoded_pool[j] = encode(params, pool.features[j]);
    }
    std::vector<std::vector<double>> d_encoded_pool(
        n, std::vector<double>(params.encoded_dim(), 0.0));

    const std::size_t m = pool.features.front().size();
    Gradients scratch = Gradients::zeros_like(params);  // unused pred slots
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        const DistilledUnknown& u = unknowns[i];
        // dL/do_hat through the energy of the distilled feature.
        const std::vector<double> logits = class_logits(params, u.feature);
        const std::vector<double> d_logits =
            backward_energy(logits, d_unknown_energy[i]);
        std::vector<double> d_feature;
        backward_class_logits(params, u.feature, d_logits, scratch, &d_feature);

        // dL/dalpha_j = <dL/do_hat, h_j>, then the softmax Jacobian.
        std::vector<double> d_alpha(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t d = 0; d < m; ++d) {
                acc += d_feature[d] * pool.features[j][d];
            }
            d_alpha[j] = acc;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += u.weights[j] * d_alpha[j];

        const std::vector<double> encoded_key = encode(params, key_features[i]);
        std::vector<double> d_encoded_key(params.encoded_dim(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double ds = u.weights[j] * (d_alpha[j] - dot);
            for (std::size_t e = 0; e < params.encoded_dim(); ++e) {
                const double diff = encoded_key[e] - encoded_pool[j][e];
                d_encoded_key[e] += 2.0 * diff * ds;
                d_encoded_pool[j][e] -= 2.0 * diff * ds;
            }
        }
        backward_encode(params, key_features[i], d_encoded_key, grads);
    }
    for (std::size_t j = 0; j < n; ++j) {
        backward_encode(params, pool.features[j], d_encoded_pool[j], grads);
    }
}

void dump_unknowns(std::span<const DistilledUnknown> unknowns,
                   const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    for (const DistilledUnknown& u : unknowns) {
        out << "feature";
        for (double v : u.feature) out << ',' << format_double(v);
        out << ";provenance";
        for (const Provenance& p : u.provenance) {
            out << ',' << p.frame_index << ':' << p.proposal_index;
        }
        out << ";weights";
        for (double w : u.weights) out << ',' << format_double(w);
        out << '\n';
    }
}

}  // namespace stud
