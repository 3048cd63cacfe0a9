#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stud/rng.hpp"

// Synthetic "video" proposal streams. Each video carries temporally
// persistent in-distribution objects (cluster mean + per-object latent
// offset + fresh per-frame noise) interleaved with out-of-distribution
// objects redrawn every frame. Generation is a pure function of the spec,
// including its seed.

namespace stud {

// Reference-frame sampling ranges at or above this value cover the whole
// video; the config file spells it "inf".
inline constexpr long kInfiniteRange = 1000000000L;

struct OodMode {
    std::vector<double> mean;
    double scale = 1.0;
};

struct SimSpec {
    std::size_t num_classes = 4;
    std::size_t feature_dim = 16;
    std::size_t frames_per_video = 30;
    std::size_t proposals_per_frame = 24;
    std::vector<std::vector<double>> id_cluster_means;  // one per class
    double id_cluster_scale = 0.4;
    std::vector<OodMode> ood_gauss_modes;
    double ood_box_halfwidth = 2.0;  // uniform mode over [-w, w]^m
    double ood_fraction_per_frame = 0.3;
    double temporal_noise_scale = 0.1;
    double objectness_id_mean = 0.85;
    double objectness_ood_mean = 0.72;
    double objectness_noise_scale = 0.08;
    std::uint64_t seed = 7;
};

// Throws ConfigError naming the first violated invariant.
void validate_spec(const SimSpec& spec);

struct Truth {
    int class_id = -1;  // -1 marks OOD

    static Truth id(int y) { return Truth{y}; }
    static Truth ood() { return Truth{-1}; }
    bool is_ood() const { return class_id < 0; }
    bool operator==(const Truth&) const = default;
};

struct Box {
    double x1 = 0, y1 = 0, x2 = 1, y2 = 1;
};

struct ObjectProposal {
    std::vector<double> feature;
    Box box;
    double objectness = 0.0;
    Truth truth;
};

struct FrameProposals {
    std::size_t frame_index = 0;
    std::vector<ObjectProposal> proposals;
};

struct Video {
    std::size_t video_id = 0;
    std::vector<FrameProposals> frames;
};

using Stream = std::vector<Video>;

// One video from the spec's own seed. Deterministic: same spec, same stream.
std::vector<FrameProposals> generate_video(const SimSpec& spec);

// `count` independent videos; video v uses derive_seed(spec.seed ^ salt, v).
Stream generate_stream(const SimSpec& spec, std::size_t count,
                       std::uint64_t salt);

inline constexpr std::uint64_t kTrainStreamSalt = 0x5354524d;
inline constexpr std::uint64_t kEvalStreamSalt = 0x4556414c;

struct CollectedFeature {
    std::size_t index = 0;  // position in frame.proposals
    std::vector<double> feature;
};

// Proposals with objectness >= threshold, in frame order.
std::vector<CollectedFeature> collect_features(const FrameProposals& frame,
                                               double objectness_threshold);

// T indices drawn uniformly without replacement from
// ([key - R, key + R] intersect [0, video_len)) \ {key}, ascending.
// Returns the whole eligible set when it has fewer than T members; an
// empty result signals that distillation is unavailable for this key.
std::vector<std::size_t> sample_reference_frames(std::size_t video_len,
                                                 std::size_t key_index,
                                                 std::size_t num_frames,
                                                 long range, Rng& rng);

// Line-delimited records:
//   video_id,frame_index,x1,y1,x2,y2,objectness,truth,f0,...,f{m-1}
// truth is "id:<class>" or "ood"; doubles round-trip exactly.
void dump_stream(const Stream& stream, const std::string& path);
Stream load_stream(const std::string& path);

}  // namespace stud
