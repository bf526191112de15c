#include "mixctc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mixctc::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_target(const PosteriorLattice& lattice, const std::vector<int>& target) {
  for (int k : target) {
    if (k == kBlankIndex) throw std::invalid_argument("ctc: target contains the blank label");
    if (k < 0 || k >= lattice.num_labels) {
      throw std::invalid_argument("ctc: target label " + std::to_string(k) +
                                  " outside inventory of size " +
                                  std::to_string(lattice.num_labels));
    }
  }
  const int need = min_frames_for_target(target);
  if (need > lattice.num_frames) {
    throw std::invalid_argument("ctc: no valid alignment; target needs at least " +
                                std::to_string(need) + " frames, lattice has " +
                                std::to_string(lattice.num_frames));
  }
}

// Blank-interleaved target: phi y1 phi y2 ... phi.
std::vector<int> extended_target(const std::vector<int>& target) {
  std::vector<int> ext(2 * target.size() + 1, kBlankIndex);
  for (size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

struct ForwardBackward {
  double loss = 0.0;
  // occupancy[t*K + k]: posterior probability that the path emits k at t.
  std::vector<double> occupancy;
};

// Standard CTC forward-backward in log space.  beta excludes the emission at
// the current frame so alpha_t(s) + beta_t(s) is the full path mass through
// state s at frame t.
ForwardBackward forward_backward(const PosteriorLattice& lattice,
                                 const std::vector<int>& target, bool want_occupancy) {
  check_target(lattice, target);
  const std::vector<int> ext = extended_target(target);
  const int S = static_cast<int>(ext.size());
  const int T = lattice.num_frames;
  const int K = lattice.num_labels;

  auto allowed_from_two_back = [&](int s) {
    return s >= 2 && ext[s] != kBlankIndex && ext[s] != ext[s - 2];
  };

  std::vector<double> alpha(static_cast<size_t>(T) * S, kNegInf);
  alpha[0] = lattice.log_prob(0, ext[0]);
  if (S > 1) alpha[1] = lattice.log_prob(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double best = alpha[(t - 1) * static_cast<size_t>(S) + s];
      if (s >= 1) best = lse2(best, alpha[(t - 1) * static_cast<size_t>(S) + s - 1]);
      if (allowed_from_two_back(s)) {
        best = lse2(best, alpha[(t - 1) * static_cast<size_t>(S) + s - 2]);
      }
      alpha[t * static_cast<size_t>(S) + s] =
          best == kNegInf ? kNegInf : best + lattice.log_prob(t, ext[s]);
    }
  }
  double log_total = alpha[(T - 1) * static_cast<size_t>(S) + S - 1];
  if (S > 1) log_total = lse2(log_total, alpha[(T - 1) * static_cast<size_t>(S) + S - 2]);

  ForwardBackward out;
  out.loss = -log_total;
  if (!want_occupancy) return out;

  std::vector<double> beta(static_cast<size_t>(T) * S, kNegInf);
  beta[(T - 1) * static_cast<size_t>(S) + S - 1] = 0.0;
  if (S > 1) beta[(T - 1) * static_cast<size_t>(S) + S - 2] = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double acc = beta[(t + 1) * static_cast<size_t>(S) + s] + lattice.log_prob(t + 1, ext[s]);
      if (s + 1 < S) {
        acc = lse2(acc, beta[(t + 1) * static_cast<size_t>(S) + s + 1] +
                            lattice.log_prob(t + 1, ext[s + 1]));
      }
      if (s + 2 < S && allowed_from_two_back(s + 2)) {
        acc = lse2(acc, beta[(t + 1) * static_cast<size_t>(S) + s + 2] +
                            lattice.log_prob(t + 1, ext[s + 2]));
      }
      beta[t * static_cast<size_t>(S) + s] = acc;
    }
  }

  out.occupancy.assign(static_cast<size_t>(T) * K, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      const double a = alpha[t * static_cast<size_t>(S) + s];
      const double b = beta[t * static_cast<size_t>(S) + s];
      if (a == kNegInf || b == kNegInf) continue;
      out.occupancy[static_cast<size_t>(t) * K + ext[s]] += std::exp(a + b - log_total);
    }
  }
  return out;
}

}  // namespace

bool PosteriorLattice::rows_normalized(double tol) const {
  for (int t = 0; t < num_frames; ++t) {
    double mx = log_prob(t, 0);
    for (int k = 1; k < num_labels; ++k) mx = std::max(mx, log_prob(t, k));
    double z = 0.0;
    for (int k = 0; k < num_labels; ++k) z += std::exp(log_prob(t, k) - mx);
    if (std::abs(mx + std::log(z)) > tol) return false;
  }
  return true;
}

PosteriorLattice lattice_from_logits(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("lattice_from_logits: expected T x K tensor, got " +
                                logits.shape_str());
  }
  PosteriorLattice lat(static_cast<int>(logits.extent(0)), static_cast<int>(logits.extent(1)));
  Tensor lp = ad::log_softmax_values(logits, 1);
  lat.log_probs.assign(lp.data().begin(), lp.data().end());
  return lat;
}

int min_frames_for_target(const std::vector<int>& target) {
  int need = static_cast<int>(target.size());
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++need;
  }
  return need;
}

double ctc_loss(const PosteriorLattice& lattice, const std::vector<int>& target) {
  return forward_backward(lattice, target, false).loss;
}

Tensor ctc_grad(const PosteriorLattice& lattice, const std::vector<int>& target) {
  ForwardBackward fb = forward_backward(lattice, target, true);
  Tensor grad({lattice.num_frames, lattice.num_labels});
  for (int t = 0; t < lattice.num_frames; ++t) {
    for (int k = 0; k < lattice.num_labels; ++k) {
      grad.at(t, k) = std::exp(lattice.log_prob(t, k)) -
                      fb.occupancy[static_cast<size_t>(t) * lattice.num_labels + k];
    }
  }
  return grad;
}

double enumerate_paths_oracle(const PosteriorLattice& lattice, const std::vector<int>& target) {
  for (int k : target) {
    if (k == kBlankIndex) throw std::invalid_argument("ctc: target contains the blank label");
  }
  const int T = lattice.num_frames;
  const int K = lattice.num_labels;
  const double space = std::pow(static_cast<double>(K), static_cast<double>(T));
  if (space > 1e6) {
    throw std::invalid_argument("enumerate_paths_oracle: K^T = " + std::to_string(space) +
                                " exceeds the 1e6 test-scale guard");
  }
  std::vector<int> path(static_cast<size_t>(T), 0);
  std::vector<int> collapsed;
  double log_total = kNegInf;
  while (true) {
    collapsed.clear();
    for (int t = 0; t < T; ++t) {
      const int k = path[static_cast<size_t>(t)];
      if (k == kBlankIndex) continue;
      if (t > 0 && path[static_cast<size_t>(t - 1)] == k) continue;
      collapsed.push_back(k);
    }
    if (collapsed == target) {
      double lp = 0.0;
      for (int t = 0; t < T; ++t) lp += lattice.log_prob(t, path[static_cast<size_t>(t)]);
      log_total = lse2(log_total, lp);
    }
    int pos = T - 1;
    while (pos >= 0 && path[static_cast<size_t>(pos)] == K - 1) {
      path[static_cast<size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++path[static_cast<size_t>(pos)];
  }
  return -log_total;  // +inf when the target is unreachable
}

Hypothesis greedy_decode(const PosteriorLattice& lattice) {
  Hypothesis hyp;
  const int T = lattice.num_frames;
  const int K = lattice.num_labels;
  int run_label = -1;
  int run_begin = 0;
  auto flush = [&](int run_end) {
    if (run_label >= 0 && run_label != kBlankIndex) {
      hyp.tokens.push_back(run_label);
      hyp.segments.push_back({run_begin, run_end});
    }
  };
  for (int t = 0; t < T; ++t) {
    int best = 0;
    for (int k = 1; k < K; ++k) {
      if (lattice.log_prob(t, k) > lattice.log_prob(t, best)) best = k;
    }
    if (best != run_label) {
      flush(t - 1);
      run_label = best;
      run_begin = t;
    }
  }
  flush(T - 1);
  return hyp;
}

ad::NodePtr loss_node(const std::vector<ad::NodePtr>& frame_log_probs,
                      const std::vector<int>& target) {
  if (frame_log_probs.empty()) throw std::invalid_argument("ctc: empty frame sequence");
  const int K = static_cast<int>(frame_log_probs[0]->value.numel());
  PosteriorLattice lat(static_cast<int>(frame_log_probs.size()), K);
  for (size_t t = 0; t < frame_log_probs.size(); ++t) {
    const Tensor& v = frame_log_probs[t]->value;
    if (v.rank() != 1 || v.numel() != K) {
      throw std::invalid_argument("ctc: frame " + std::to_string(t) + " has shape " +
                                  v.shape_str() + ", expected [" + std::to_string(K) + "]");
    }
    for (int k = 0; k < K; ++k) lat.log_prob(static_cast<int>(t), k) = v[k];
  }
  ForwardBackward fb = forward_backward(lat, target, true);

  auto node = std::make_shared<ad::Node>();
  node->value = Tensor::scalar(fb.loss);
  node->grad = Tensor::zeros({1});
  node->parents = frame_log_probs;
  node->op = "ctc_loss";
  node->backprop = [occ = std::move(fb.occupancy), K](ad::Node& n) {
    const double g = n.grad[0];
    for (size_t t = 0; t < n.parents.size(); ++t) {
      ad::Node& p = *n.parents[t];
      for (int k = 0; k < K; ++k) p.grad[k] -= g * occ[t * static_cast<size_t>(K) + k];
    }
  };
  return node;
}

}  // namespace mixctc::ctc
