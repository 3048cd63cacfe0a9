#pragma once

#include <span>
#include <vector>

#include "stud/model.hpp"
#include "stud/sim.hpp"

// Unknown distillation: energy-based candidate selection in each reference
// frame, dissimilarity scoring against the key-frame object in encoder
// space, softmax weight normalization over the pooled candidates, and a
// convex combination of the candidates' raw features.

namespace stud {

struct DistillSettings {
    double objectness_threshold = 0.5;
    double percentile_lo = 40.0;  // p
    double percentile_hi = 60.0;  // q
};

// Indices whose 1-based ascending-energy rank r satisfies
// p*N/100 <= r <= q*N/100 (both bounds inclusive). Ties break on original
// index. Returned in ascending index order. An empty input yields an
// empty result; p >= q is a configuration error.
std::vector<std::size_t> filter_candidates(std::span<const double> energies,
                                           double percentile_lo,
                                           double percentile_hi);

// Squared L2 distance between two encoded features.
double dissimilarity(std::span<const double> encoded_key,
                     std::span<const double> encoded_ref);

// softmax(s), max-subtracted.
std::vector<double> distill_weights(std::span<const double> scores);

struct CandidateEntry {
    std::size_t proposal_index = 0;
    std::vector<double> feature;
    double energy = 0.0;
};

// Energy-filtered collected proposals of one reference frame.
struct CandidateSet {
    std::size_t frame_index = 0;
    std::vector<CandidateEntry> entries;
};

CandidateSet select_candidates(const ModelParams& params,
                               const FrameProposals& frame,
                               const DistillSettings& settings);

struct Provenance {
    std::size_t frame_index = 0;
    std::size_t proposal_index = 0;
};

struct DistilledUnknown {
    std::vector<double> feature;   // o_hat, convex combination of candidates
    std::vector<double> weights;   // alpha over the pooled candidates
    std::vector<Provenance> provenance;
};

// Pooled candidates across the reference frames, in frame order.
struct CandidatePool {
    std::vector<std::vector<double>> features;
    std::vector<Provenance> provenance;
};

CandidatePool pool_candidates(std::span<const CandidateSet> sets);

// One DistilledUnknown per key feature, in key order. Weights are
// normalized jointly over the whole pool.
std::vector<DistilledUnknown> distill_from_pool(
    const ModelParams& params,
    std::span<const std::vector<double>> key_features,
    const CandidatePool& pool);

// Full pipeline for one key frame: anchors are the collected key-frame
// proposals whose truth is ID; candidates come from the reference frames.
// Returns an empty list when no anchors or no candidates survive
// (distillation unavailable; the caller skips this key frame).
std::vector<DistilledUnknown> distill_unknowns(
    const ModelParams& params, const FrameProposals& key_frame,
    std::span<const FrameProposals> reference_frames,
    const DistillSettings& settings);

// Optional ablation path (encoder_grad = through_weights): propagates
// d(loss)/d(energy of unknown i) through alpha into the encoder
// parameters. Default training leaves the distilled features detached.
void add_encoder_grads_through_weights(
    const ModelParams& params,
    std::span<const std::vector<double>> key_features,
    std::span<const DistilledUnknown> unknowns, const CandidatePool& pool,
    std::span<const double> d_unknown_energy, Gradients& grads);

// Debug dump: one line per unknown with provenance and weights.
void dump_unknowns(std::span<const DistilledUnknown> unknowns,
                   const std::string& path);

}  // namespace stud
