#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mixctc/rng.hpp"
#include "mixctc/tensor.hpp"

namespace mixctc::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One value in the reverse-mode computation graph.  `grad` always matches
/// the value's shape and starts at zero; backward() repopulates it for every
/// node reachable from the loss.  The graph is acyclic by construction
/// (nodes only reference inputs that already exist).
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<NodePtr> parents;
  std::string op;  // primitive identifier; "leaf" for inputs and parameters

  // Accumulates this node's grad into its parents' grads.  Receives the node
  // itself so closures never need to keep a self-reference.
  std::function<void(Node&)> backprop;
};

NodePtr leaf(Tensor value);
NodePtr leaf(double scalar_value);

// ---- primitives -----------------------------------------------------------
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr hadamard(const NodePtr& a, const NodePtr& b);
NodePtr tanh(const NodePtr& a);
NodePtr sigmoid(const NodePtr& a);
NodePtr exp(const NodePtr& a);
NodePtr log(const NodePtr& a);
NodePtr concat(const std::vector<NodePtr>& parts);       // 1-D
NodePtr slice(const NodePtr& a, int64_t offset, int64_t length);  // 1-D
NodePtr conv1d(const NodePtr& signal, const NodePtr& kernel);     // same length, zero boundary
NodePtr transpose(const NodePtr& a);                     // 2-D
NodePtr sum(const NodePtr& a);                           // all elements -> scalar
NodePtr sum_axis(const NodePtr& a, int axis);            // 2-D -> 1-D
NodePtr scale(const NodePtr& a, double c);               // constant scale
NodePtr smul(const NodePtr& s, const NodePtr& a);        // scalar node * tensor node
NodePtr stack_cols(const std::vector<NodePtr>& cols);    // C vectors of dim n -> n x C
NodePtr col(const NodePtr& a, int64_t j);                // 2-D -> column j as 1-D

NodePtr softmax(const NodePtr& logits);                  // 1-D, stabilized
NodePtr softmax_rows(const NodePtr& logits);             // 2-D, per row
NodePtr log_softmax(const NodePtr& logits);              // 1-D, stabilized
NodePtr layer_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias);

/// Generic dispatcher over the argument-free primitives.  Primitives that
/// need extra arguments (slice, sum_axis, scale, col) must be called through
/// their typed entry points.
NodePtr apply_primitive(const std::string& kind, const std::vector<NodePtr>& inputs);

/// Reverse pass from a scalar loss.  Zeroes then fills the grad of every
/// node reachable from the loss; evaluation order is deterministic.
void backward(const NodePtr& loss);

// ---- tensor-level forward helpers ------------------------------------------
// Same arithmetic as the node ops; used directly where no gradient is needed.

/// Stabilized softmax along `axis` (max subtracted per slice).
Tensor softmax_values(const Tensor& logits, int axis);
Tensor log_softmax_values(const Tensor& logits, int axis);

inline constexpr double kLayerNormEpsilon = 1e-5;  // added to the variance

/// Normalizes the whole (1-D) feature vector to zero mean / unit variance,
/// then applies gain and bias.
Tensor layer_norm_values(const Tensor& x, const Tensor& gain, const Tensor& bias);

/// Leaf with entries uniform in [-0.05, 0.05]; the fixed parameter
/// initialization scheme.
NodePtr init_param(std::vector<int64_t> shape, Rng& rng);

}  // namespace mixctc::ad
