#pragma once

#include <string>
#include <vector>

#include "mixctc/autodiff.hpp"
#include "mixctc/tensor.hpp"

namespace mixctc::ctc {

/// Blank always sits at index 0 of every label inventory.
inline constexpr int kBlankIndex = 0;

struct LabelSet {
  int num_labels = 0;  // K, including blank
  int blank_index = kBlankIndex;
  std::vector<std::string> names;  // size K, unique
};

/// Per-frame label log-probabilities, T x K row-major.  Rows are expected to
/// log-sum-exp to zero (see rows_normalized); the loss itself is well-defined
/// for arbitrary scores.
struct PosteriorLattice {
  int num_frames = 0;
  int num_labels = 0;
  std::vector<double> log_probs;

  PosteriorLattice() = default;
  PosteriorLattice(int frames, int labels)
      : num_frames(frames), num_labels(labels),
        log_probs(static_cast<size_t>(frames) * static_cast<size_t>(labels), 0.0) {}

  double log_prob(int t, int k) const {
    return log_probs[static_cast<size_t>(t) * num_labels + k];
  }
  double& log_prob(int t, int k) { return log_probs[static_cast<size_t>(t) * num_labels + k]; }

  bool rows_normalized(double tol = 1e-9) const;
};

/// Builds a lattice by log-softmaxing raw per-frame logits (T x K tensor).
PosteriorLattice lattice_from_logits(const Tensor& logits);

struct Segment {
  int begin = 0;
  int end = 0;  // inclusive
};

/// Decoded token sequence with per-token frame segments.  Tokens never
/// include blank; segments are increasing and non-overlapping.
struct Hypothesis {
  std::vector<int> tokens;
  std::vector<Segment> segments;
};

/// Frames required to align the target: |y| plus one separating blank per
/// adjacent pair of equal labels.
int min_frames_for_target(const std::vector<int>& target);

/// -ln sum over all paths collapsing to `target`, by the forward recursion
/// over the blank-interleaved target, entirely in log space.
/// Throws if the target contains blank or cannot be aligned in T frames.
double ctc_loss(const PosteriorLattice& lattice, const std::vector<int>& target);

/// Gradient of ctc_loss w.r.t. the pre-softmax logits that produced the
/// lattice: per frame, softmax(logits) - occupancy.  T x K tensor.
Tensor ctc_grad(const PosteriorLattice& lattice, const std::vector<int>& target);

/// Brute-force reference: enumerates all K^T paths, filters by collapse.
/// Returns +infinity when the target is unreachable.  Guarded to K^T <= 1e6.
double enumerate_paths_oracle(const PosteriorLattice& lattice, const std::vector<int>& target);

/// Per-frame argmax (ties toward the lowest index), collapse runs, drop
/// blanks.  Each token's segment spans its argmax run.
Hypothesis greedy_decode(const PosteriorLattice& lattice);

/// Scalar loss node over per-frame log-posterior nodes (each of length K).
/// Backward injects -occupancy into each frame's log-probabilities, so a
/// log_softmax upstream receives the standard softmax-minus-occupancy signal.
ad::NodePtr loss_node(const std::vector<ad::NodePtr>& frame_log_probs,
                      const std::vector<int>& target);

}  // namespace mixctc::ctc
