#pragma once

#include <cstdint>
#include <vector>

#include "mixctc/data.hpp"
#include "mixctc/model.hpp"

namespace mixctc::harness {

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double clip_norm = 5.0;  // global-norm gradient clip
  int batch_size = 8;
  int epochs = 50;
  int aux_epochs = 0;  // hybrid stage 2: letter branch with the rest frozen
  uint64_t seed = 1;
  bool verbose = false;

  void validate() const;
};

struct TrainResult {
  std::vector<double> epoch_losses;      // mean CTC loss per epoch, stage 1
  std::vector<double> aux_epoch_losses;  // stage 2 (hybrid only)
  int skipped_utterances = 0;            // targets infeasible for their frame count
};

/// Mini-batch SGD with momentum and global-norm clipping over the CTC loss.
/// Hybrid models train in the two stages described by the head layout: the
/// word network first, then the added letter branch with everything else
/// frozen.  Throws when the loss stops being finite.
TrainResult train(Model& model, const TrainConfig& cfg, const std::vector<Utterance>& dataset);

}  // namespace mixctc::harness
