#include "mixctc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace mixctc::ad {

namespace {

NodePtr make(Tensor value, std::vector<NodePtr> parents, std::string op,
             std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->grad = Tensor::zeros(n->value.shape());
  n->parents = std::move(parents);
  n->op = std::move(op);
  n->backprop = std::move(backprop);
  return n;
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
}

void require_rank(const std::string& op, const NodePtr& a, int rank) {
  if (a->value.rank() != rank) {
    throw std::invalid_argument(op + ": expected rank-" + std::to_string(rank) + " input, got " +
                                a->value.shape_str());
  }
}

NodePtr unary(const NodePtr& a, const std::string& op, double (*f)(double),
              double (*df_from_xy)(double, double)) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < a->value.numel(); ++i) out[i] = f(a->value[i]);
  return make(std::move(out), {a}, op, [df_from_xy](Node& n) {
    Node& p = *n.parents[0];
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      p.grad[i] += n.grad[i] * df_from_xy(p.value[i], n.value[i]);
    }
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

NodePtr leaf(Tensor value) { return make(std::move(value), {}, "leaf", nullptr); }
NodePtr leaf(double scalar_value) { return leaf(Tensor::scalar(scalar_value)); }

NodePtr add(const NodePtr& a, const NodePtr& b) {
  if (!a->value.same_shape(b->value)) shape_error("add", a->value, b->value);
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return make(std::move(out), {a, b}, "add", [](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      n.parents[0]->grad[i] += n.grad[i];
      n.parents[1]->grad[i] += n.grad[i];
    }
  });
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  const Tensor& A = a->value;
  const Tensor& B = b->value;
  if (A.rank() == 2 && B.rank() == 1) {
    if (A.extent(1) != B.extent(0)) shape_error("matmul", A, B);
    const int64_t m = A.extent(0), k = A.extent(1);
    Tensor out({m});
    for (int64_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int64_t j = 0; j < k; ++j) acc += A.at(i, j) * B[j];
      out[i] = acc;
    }
    return make(std::move(out), {a, b}, "matmul", [](Node& n) {
      Node& pa = *n.parents[0];
      Node& pb = *n.parents[1];
      const int64_t m = pa.value.extent(0), k = pa.value.extent(1);
      for (int64_t i = 0; i < m; ++i) {
        const double g = n.grad[i];
        for (int64_t j = 0; j < k; ++j) {
          pa.grad.at(i, j) += g * pb.value[j];
          pb.grad[j] += g * pa.value.at(i, j);
        }
      }
    });
  }
  if (A.rank() == 2 && B.rank() == 2) {
    if (A.extent(1) != B.extent(0)) shape_error("matmul", A, B);
    const int64_t m = A.extent(0), k = A.extent(1), p = B.extent(1);
    Tensor out({m, p});
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t l = 0; l < k; ++l) {
        const double av = A.at(i, l);
        for (int64_t j = 0; j < p; ++j) out.at(i, j) += av * B.at(l, j);
      }
    }
    return make(std::move(out), {a, b}, "matmul", [](Node& n) {
      Node& pa = *n.parents[0];
      Node& pb = *n.parents[1];
      const int64_t m = pa.value.extent(0), k = pa.value.extent(1), p = pb.value.extent(1);
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t l = 0; l < k; ++l) {
          double acc = 0.0;
          for (int64_t j = 0; j < p; ++j) {
            acc += n.grad.at(i, j) * pb.value.at(l, j);
            pb.grad.at(l, j) += n.grad.at(i, j) * pa.value.at(i, l);
          }
          pa.grad.at(i, l) += acc;
        }
      }
    });
  }
  if (A.rank() == 1 && B.rank() == 1) {
    if (A.extent(0) != B.extent(0)) shape_error("matmul", A, B);
    double acc = 0.0;
    for (int64_t i = 0; i < A.numel(); ++i) acc += A[i] * B[i];
    return make(Tensor::scalar(acc), {a, b}, "matmul", [](Node& n) {
      Node& pa = *n.parents[0];
      Node& pb = *n.parents[1];
      const double g = n.grad[0];
      for (int64_t i = 0; i < pa.value.numel(); ++i) {
        pa.grad[i] += g * pb.value[i];
        pb.grad[i] += g * pa.value[i];
      }
    });
  }
  shape_error("matmul", A, B);
}

NodePtr hadamard(const NodePtr& a, const NodePtr& b) {
  if (!a->value.same_shape(b->value)) shape_error("hadamard", a->value, b->value);
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return make(std::move(out), {a, b}, "hadamard", [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      pa.grad[i] += n.grad[i] * pb.value[i];
      pb.grad[i] += n.grad[i] * pa.value[i];
    }
  });
}

NodePtr tanh(const NodePtr& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

NodePtr sigmoid(const NodePtr& a) {
  return unary(a, "sigmoid", &sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

NodePtr exp(const NodePtr& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

NodePtr log(const NodePtr& a) {
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

NodePtr concat(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  int64_t total = 0;
  for (const auto& p : parts) {
    require_rank("concat", p, 1);
    total += p->value.numel();
  }
  Tensor out({total});
  int64_t off = 0;
  for (const auto& p : parts) {
    for (int64_t i = 0; i < p->value.numel(); ++i) out[off + i] = p->value[i];
    off += p->value.numel();
  }
  return make(std::move(out), parts, "concat", [](Node& n) {
    int64_t off = 0;
    for (auto& p : n.parents) {
      for (int64_t i = 0; i < p->value.numel(); ++i) p->grad[i] += n.grad[off + i];
      off += p->value.numel();
    }
  });
}

NodePtr slice(const NodePtr& a, int64_t offset, int64_t length) {
  require_rank("slice", a, 1);
  if (offset < 0 || length <= 0 || offset + length > a->value.numel()) {
    throw std::invalid_argument("slice: range [" + std::to_string(offset) + ", " +
                                std::to_string(offset + length) + ") out of bounds for " +
                                a->value.shape_str());
  }
  Tensor out({length});
  for (int64_t i = 0; i < length; ++i) out[i] = a->value[offset + i];
  return make(std::move(out), {a}, "slice", [offset](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) n.parents[0]->grad[offset + i] += n.grad[i];
  });
}

NodePtr conv1d(const NodePtr& signal, const NodePtr& kernel) {
  require_rank("conv1d", signal, 1);
  require_rank("conv1d", kernel, 1);
  const int64_t len = signal->value.numel();
  const int64_t width = kernel->value.numel();
  const int64_t center = (width - 1) / 2;
  Tensor out({len});
  for (int64_t i = 0; i < len; ++i) {
    double acc = 0.0;
    for (int64_t k = 0; k < width; ++k) {
      const int64_t j = i + k - center;
      if (j >= 0 && j < len) acc += kernel->value[k] * signal->value[j];
    }
    out[i] = acc;
  }
  return make(std::move(out), {signal, kernel}, "conv1d", [center](Node& n) {
    Node& sig = *n.parents[0];
    Node& ker = *n.parents[1];
    const int64_t len = sig.value.numel();
    const int64_t width = ker.value.numel();
    for (int64_t i = 0; i < len; ++i) {
      const double g = n.grad[i];
      for (int64_t k = 0; k < width; ++k) {
        const int64_t j = i + k - center;
        if (j >= 0 && j < len) {
          sig.grad[j] += g * ker.value[k];
          ker.grad[k] += g * sig.value[j];
        }
      }
    }
  });
}

NodePtr transpose(const NodePtr& a) {
  require_rank("transpose", a, 2);
  const int64_t r = a->value.extent(0), c = a->value.extent(1);
  Tensor out({c, r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.at(j, i) = a->value.at(i, j);
  return make(std::move(out), {a}, "transpose", [](Node& n) {
    Node& p = *n.parents[0];
    const int64_t r = p.value.extent(0), c = p.value.extent(1);
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) p.grad.at(i, j) += n.grad.at(j, i);
  });
}

NodePtr sum(const NodePtr& a) {
  double acc = 0.0;
  for (int64_t i = 0; i < a->value.numel(); ++i) acc += a->value[i];
  return make(Tensor::scalar(acc), {a}, "sum", [](Node& n) {
    Node& p = *n.parents[0];
    const double g = n.grad[0];
    for (int64_t i = 0; i < p.value.numel(); ++i) p.grad[i] += g;
  });
}

NodePtr sum_axis(const NodePtr& a, int axis) {
  require_rank("sum_axis", a, 2);
  if (axis != 0 && axis != 1) throw std::invalid_argument("sum_axis: axis must be 0 or 1");
  const int64_t r = a->value.extent(0), c = a->value.extent(1);
  Tensor out({axis == 0 ? c : r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += a->value.at(i, j);
  return make(std::move(out), {a}, "sum_axis", [axis](Node& n) {
    Node& p = *n.parents[0];
    const int64_t r = p.value.extent(0), c = p.value.extent(1);
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) p.grad.at(i, j) += n.grad[axis == 0 ? j : i];
  });
}

NodePtr scale(const NodePtr& a, double cfac) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = cfac * a->value[i];
  return make(std::move(out), {a}, "scale", [cfac](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) n.parents[0]->grad[i] += cfac * n.grad[i];
  });
}

NodePtr smul(const NodePtr& s, const NodePtr& a) {
  if (s->value.numel() != 1) {
    throw std::invalid_argument("smul: first input must be scalar, got " + s->value.shape_str());
  }
  Tensor out(a->value.shape());
  const double sv = s->value[0];
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = sv * a->value[i];
  return make(std::move(out), {s, a}, "smul", [](Node& n) {
    Node& ps = *n.parents[0];
    Node& pa = *n.parents[1];
    double acc = 0.0;
    const double sv = ps.value[0];
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      acc += n.grad[i] * pa.value[i];
      pa.grad[i] += sv * n.grad[i];
    }
    ps.grad[0] += acc;
  });
}

NodePtr stack_cols(const std::vector<NodePtr>& cols) {
  if (cols.empty()) throw std::invalid_argument("stack_cols: no inputs");
  const int64_t n = cols[0]->value.numel();
  for (const auto& v : cols) {
    require_rank("stack_cols", v, 1);
    if (v->value.numel() != n) shape_error("stack_cols", cols[0]->value, v->value);
  }
  const int64_t c = static_cast<int64_t>(cols.size());
  Tensor out({n, c});
  for (int64_t j = 0; j < c; ++j)
    for (int64_t i = 0; i < n; ++i) out.at(i, j) = cols[static_cast<size_t>(j)]->value[i];
  return make(std::move(out), cols, "stack_cols", [](Node& nd) {
    const int64_t n = nd.value.extent(0), c = nd.value.extent(1);
    for (int64_t j = 0; j < c; ++j)
      for (int64_t i = 0; i < n; ++i) nd.parents[static_cast<size_t>(j)]->grad[i] += nd.grad.at(i, j);
  });
}

NodePtr col(const NodePtr& a, int64_t j) {
  require_rank("col", a, 2);
  const int64_t r = a->value.extent(0), c = a->value.extent(1);
  if (j < 0 || j >= c) {
    throw std::invalid_argument("col: column " + std::to_string(j) + " out of bounds for " +
                                a->value.shape_str());
  }
  Tensor out({r});
  for (int64_t i = 0; i < r; ++i) out[i] = a->value.at(i, j);
  return make(std::move(out), {a}, "col", [j](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) n.parents[0]->grad.at(i, j) += n.grad[i];
  });
}

Tensor softmax_values(const Tensor& logits, int axis) {
  if (axis < 0 || axis >= logits.rank()) throw std::invalid_argument("softmax: bad axis");
  Tensor out(logits.shape());
  if (logits.rank() == 1) {
    double mx = logits[0];
    for (int64_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) z += std::exp(logits[i] - mx);
    for (int64_t i = 0; i < logits.numel(); ++i) out[i] = std::exp(logits[i] - mx) / z;
    return out;
  }
  if (logits.rank() != 2) throw std::invalid_argument("softmax: rank-1 or rank-2 input expected");
  const int64_t r = logits.extent(0), c = logits.extent(1);
  if (axis == 1) {
    for (int64_t i = 0; i < r; ++i) {
      double mx = logits.at(i, 0);
      for (int64_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
      double z = 0.0;
      for (int64_t j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
      for (int64_t j = 0; j < c; ++j) out.at(i, j) = std::exp(logits.at(i, j) - mx) / z;
    }
  } else {
    for (int64_t j = 0; j < c; ++j) {
      double mx = logits.at(0, j);
      for (int64_t i = 1; i < r; ++i) mx = std::max(mx, logits.at(i, j));
      double z = 0.0;
      for (int64_t i = 0; i < r; ++i) z += std::exp(logits.at(i, j) - mx);
      for (int64_t i = 0; i < r; ++i) out.at(i, j) = std::exp(logits.at(i, j) - mx) / z;
    }
  }
  return out;
}

Tensor log_softmax_values(const Tensor& logits, int axis) {
  if (logits.rank() == 1) {
    double mx = logits[0];
    for (int64_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) z += std::exp(logits[i] - mx);
    const double lz = mx + std::log(z);
    Tensor out(logits.shape());
    for (int64_t i = 0; i < logits.numel(); ++i) out[i] = logits[i] - lz;
    return out;
  }
  if (logits.rank() != 2 || axis != 1) {
    throw std::invalid_argument("log_softmax: rank-1, or rank-2 with axis 1, expected");
  }
  Tensor out(logits.shape());
  const int64_t r = logits.extent(0), c = logits.extent(1);
  for (int64_t i = 0; i < r; ++i) {
    double mx = logits.at(i, 0);
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
    const double lz = mx + std::log(z);
    for (int64_t j = 0; j < c; ++j) out.at(i, j) = logits.at(i, j) - lz;
  }
  return out;
}

NodePtr softmax(const NodePtr& logits) {
  require_rank("softmax", logits, 1);
  Tensor out = softmax_values(logits->value, 0);
  return make(std::move(out), {logits}, "softmax", [](Node& n) {
    Node& p = *n.parents[0];
    double dot = 0.0;
    for (int64_t i = 0; i < n.value.numel(); ++i) dot += n.grad[i] * n.value[i];
    for (int64_t i = 0; i < n.value.numel(); ++i) p.grad[i] += n.value[i] * (n.grad[i] - dot);
  });
}

NodePtr softmax_rows(const NodePtr& logits) {
  require_rank("softmax_rows", logits, 2);
  Tensor out = softmax_values(logits->value, 1);
  return make(std::move(out), {logits}, "softmax_rows", [](Node& n) {
    Node& p = *n.parents[0];
    const int64_t r = n.value.extent(0), c = n.value.extent(1);
    for (int64_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (int64_t j = 0; j < c; ++j) dot += n.grad.at(i, j) * n.value.at(i, j);
      for (int64_t j = 0; j < c; ++j) {
        p.grad.at(i, j) += n.value.at(i, j) * (n.grad.at(i, j) - dot);
      }
    }
  });
}

NodePtr log_softmax(const NodePtr& logits) {
  require_rank("log_softmax", logits, 1);
  Tensor out = log_softmax_values(logits->value, 0);
  return make(std::move(out), {logits}, "log_softmax", [](Node& n) {
    Node& p = *n.parents[0];
    double gsum = 0.0;
    for (int64_t i = 0; i < n.value.numel(); ++i) gsum += n.grad[i];
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      p.grad[i] += n.grad[i] - std::exp(n.value[i]) * gsum;
    }
  });
}

Tensor layer_norm_values(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.rank() != 1 || !x.same_shape(gain) || !x.same_shape(bias)) {
    throw std::invalid_argument("layer_norm: x " + x.shape_str() + ", gain " + gain.shape_str() +
                                ", bias " + bias.shape_str() + " must be equal-length vectors");
  }
  const int64_t n = x.numel();
  if (n == 0) throw std::invalid_argument("layer_norm: zero-length feature axis");
  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<double>(n);
  const double inv_sigma = 1.0 / std::sqrt(var + kLayerNormEpsilon);
  Tensor out({n});
  for (int64_t i = 0; i < n; ++i) out[i] = gain[i] * (x[i] - mean) * inv_sigma + bias[i];
  return out;
}

NodePtr layer_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias) {
  Tensor out = layer_norm_values(x->value, gain->value, bias->value);
  // recompute mean/sigma for the closure
  const int64_t n = x->value.numel();
  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += x->value[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) var += (x->value[i] - mean) * (x->value[i] - mean);
  var /= static_cast<double>(n);
  const double inv_sigma = 1.0 / std::sqrt(var + kLayerNormEpsilon);
  std::vector<double> xhat(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) xhat[static_cast<size_t>(i)] = (x->value[i] - mean) * inv_sigma;
  return make(std::move(out), {x, gain, bias}, "layer_norm",
              [xhat = std::move(xhat), inv_sigma](Node& nd) {
                Node& px = *nd.parents[0];
                Node& pg = *nd.parents[1];
                Node& pb = *nd.parents[2];
                const int64_t n = nd.value.numel();
                double m1 = 0.0, m2 = 0.0;
                std::vector<double> gy(static_cast<size_t>(n));
                for (int64_t i = 0; i < n; ++i) {
                  pg.grad[i] += nd.grad[i] * xhat[static_cast<size_t>(i)];
                  pb.grad[i] += nd.grad[i];
                  gy[static_cast<size_t>(i)] = nd.grad[i] * pg.value[i];
                  m1 += gy[static_cast<size_t>(i)];
                  m2 += gy[static_cast<size_t>(i)] * xhat[static_cast<size_t>(i)];
                }
                m1 /= static_cast<double>(n);
                m2 /= static_cast<double>(n);
                for (int64_t i = 0; i < n; ++i) {
                  px.grad[i] += (gy[static_cast<size_t>(i)] - m1 -
                                 xhat[static_cast<size_t>(i)] * m2) *
                                inv_sigma;
                }
              });
}

NodePtr apply_primitive(const std::string& kind, const std::vector<NodePtr>& inputs) {
  auto need = [&](size_t n) {
    if (inputs.size() != n) {
      throw std::invalid_argument("apply_primitive(" + kind + "): expected " + std::to_string(n) +
                                  " inputs, got " + std::to_string(inputs.size()));
    }
  };
  if (kind == "add") { need(2); return add(inputs[0], inputs[1]); }
  if (kind == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
  if (kind == "hadamard") { need(2); return hadamard(inputs[0], inputs[1]); }
  if (kind == "tanh") { need(1); return tanh(inputs[0]); }
  if (kind == "sigmoid") { need(1); return sigmoid(inputs[0]); }
  if (kind == "exp") { need(1); return exp(inputs[0]); }
  if (kind == "log") { need(1); return log(inputs[0]); }
  if (kind == "concat") { return concat(inputs); }
  if (kind == "conv1d") { need(2); return conv1d(inputs[0], inputs[1]); }
  if (kind == "transpose") { need(1); return transpose(inputs[0]); }
  if (kind == "sum") { need(1); return sum(inputs[0]); }
  if (kind == "softmax") { need(1); return softmax(inputs[0]); }
  if (kind == "log_softmax") { need(1); return log_softmax(inputs[0]); }
  if (kind == "slice" || kind == "sum_axis" || kind == "scale" || kind == "col") {
    throw std::invalid_argument("apply_primitive(" + kind +
                                "): needs explicit arguments; call the typed entry point");
  }
  throw std::invalid_argument("apply_primitive: unknown primitive '" + kind + "'");
}

void backward(const NodePtr& loss) {
  if (!loss) throw std::invalid_argument("backward: null loss");
  if (loss->value.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + loss->value.shape_str());
  }
  // Topological order (parents before children), iterative DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* node;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  seen.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node* p = f.node->parents[f.next++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    for (int64_t i = 0; i < n->grad.numel(); ++i) n->grad[i] = 0.0;
  }
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

NodePtr init_param(std::vector<int64_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.05, 0.05);
  return leaf(std::move(t));
}

}  // namespace mixctc::ad
