#include "mixctc/train.hpp"

#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace mixctc::harness {

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw std::invalid_argument("train: learning rate must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train: momentum in [0,1)");
  if (clip_norm <= 0.0) throw std::invalid_argument("train: clip norm must be positive");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (epochs < 0 || aux_epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
}

namespace {

struct Sgd {
  std::vector<ad::NodePtr> params;
  std::vector<Tensor> velocity;
  std::vector<Tensor> accum;

  explicit Sgd(std::vector<ad::NodePtr> p) : params(std::move(p)) {
    for (const auto& param : params) {
      velocity.push_back(Tensor::zeros(param->value.shape()));
      accum.push_back(Tensor::zeros(param->value.shape()));
    }
  }

  void zero_accum() {
    for (auto& a : accum) {
      for (int64_t i = 0; i < a.numel(); ++i) a[i] = 0.0;
    }
  }

  void gather() {
    for (size_t p = 0; p < params.size(); ++p) {
      const Tensor& g = params[p]->grad;
      for (int64_t i = 0; i < g.numel(); ++i) accum[p][i] += g[i];
    }
  }

  void step(double lr, double momentum, double clip_norm, int batch_n) {
    const double inv = 1.0 / batch_n;
    double sq = 0.0;
    for (auto& a : accum) {
      for (int64_t i = 0; i < a.numel(); ++i) {
        a[i] *= inv;
        sq += a[i] * a[i];
      }
    }
    const double norm = std::sqrt(sq);
    const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
    for (size_t p = 0; p < params.size(); ++p) {
      for (int64_t i = 0; i < accum[p].numel(); ++i) {
        velocity[p][i] = momentum * velocity[p][i] - lr * scale * accum[p][i];
        params[p]->value[i] += velocity[p][i];
      }
    }
  }
};

struct Stage {
  std::vector<std::vector<int>> targets;
  std::vector<bool> feasible;
};

Stage prepare_stage(const Model& model, const std::vector<Utterance>& dataset,
                    const vocab::TokenVocabulary& v, int* skipped, bool verbose) {
  Stage st;
  st.targets.reserve(dataset.size());
  st.feasible.reserve(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    std::vector<int> target = vocab::encode_to_ids(dataset[i].words, v);
    const int64_t frames = model.output_length(dataset[i].features.extent(0));
    const bool ok = ctc::min_frames_for_target(target) <= frames;
    if (!ok) {
      ++*skipped;
      if (verbose) {
        std::cerr << "train: skipping utterance " << i << " (target needs "
                  << ctc::min_frames_for_target(target) << " frames, have " << frames << ")\n";
      }
    }
    st.targets.push_back(std::move(target));
    st.feasible.push_back(ok);
  }
  return st;
}

std::vector<double> run_stage(Model& model, const TrainConfig& cfg,
                              const std::vector<Utterance>& dataset, const Stage& stage,
                              std::vector<ad::NodePtr> params, bool aux, int epochs,
                              uint64_t seed_tag) {
  Sgd sgd(std::move(params));
  Rng shuffle_rng(hash_seed(cfg.seed, aux ? "train_aux" : "train_main") + seed_tag);
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> losses;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {  // Fisher-Yates
      std::swap(order[i - 1],
                order[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    }
    double epoch_loss = 0.0;
    int counted = 0;
    size_t pos = 0;
    while (pos < order.size()) {
      sgd.zero_accum();
      int batch_n = 0;
      for (int b = 0; b < cfg.batch_size && pos < order.size(); ++pos) {
        const size_t idx = order[pos];
        if (!stage.feasible[idx]) continue;
        Model::SeqOut out = aux ? model.forward_aux(dataset[idx].features)
                                : model.forward(dataset[idx].features);
        ad::NodePtr loss = ctc::loss_node(out.log_probs, stage.targets[idx]);
        if (!std::isfinite(loss->value[0])) {
          throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", utterance " + std::to_string(idx));
        }
        ad::backward(loss);
        sgd.gather();
        epoch_loss += loss->value[0];
        ++counted;
        ++batch_n;
        ++b;
      }
      if (batch_n > 0) sgd.step(cfg.learning_rate, cfg.momentum, cfg.clip_norm, batch_n);
    }
    const double mean = counted > 0 ? epoch_loss / counted : 0.0;
    losses.push_back(mean);
    if (cfg.verbose) {
      std::cerr << "epoch " << epoch << (aux ? " (letter stage)" : "") << " mean_loss " << mean
                << "\n";
    }
  }
  return losses;
}

}  // namespace

TrainResult train(Model& model, const TrainConfig& cfg, const std::vector<Utterance>& dataset) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  TrainResult result;

  Stage stage1 = prepare_stage(model, dataset, model.main_vocab(), &result.skipped_utterances,
                               cfg.verbose);
  result.epoch_losses = run_stage(model, cfg, dataset, stage1, model.trainable_main(),
                                  /*aux=*/false, cfg.epochs, 0);

  if (model.config().hybrid && cfg.aux_epochs > 0) {
    Stage stage2 = prepare_stage(model, dataset, model.aux_vocab(), &result.skipped_utterances,
                                 cfg.verbose);
    result.aux_epoch_losses = run_stage(model, cfg, dataset, stage2, model.trainable_aux(),
                                        /*aux=*/true, cfg.aux_epochs, 1);
  }
  return result;
}

}  // namespace mixctc::harness
