#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semicount/agency.hpp"
#include "semicount/contrastive.hpp"
#include "semicount/regression_losses.hpp"

namespace semicount::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from(std::vector<double> values, std::vector<std::size_t> shape);
};

class Node;
using NodePtr = std::shared_ptr<Node>;

// Reverse-mode tape node. backward_fn reads this->grad and accumulates into
// inputs' grads; grads are (re)allocated fresh by each backward() call.
class Node {
 public:
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;
};

NodePtr constant(Tensor t);
NodePtr leaf(Tensor t);  // trainable: requires_grad = true

// Scalar root only. Zeroes grads of every reachable node, seeds d(root)=1,
// then runs the tape in reverse topological order.
void backward(const NodePtr& root);

// --- structural ops -------------------------------------------------------
NodePtr conv2d_3x3(const NodePtr& x, const NodePtr& w, const NodePtr& b);  // pad 1
NodePtr avgpool2(const NodePtr& x);          // [C,H,W] -> [C,H/2,W/2], even dims
NodePtr relu(const NodePtr& x);
NodePtr sigmoid(const NodePtr& x);
NodePtr abs_op(const NodePtr& x);
NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b);  // [N,Ci]x[Co,Ci]
NodePtr matmul(const NodePtr& a, const NodePtr& b);     // [N,K]x[K,M]
NodePtr matmul_nt(const NodePtr& a, const NodePtr& b);  // [N,K]x[M,K] -> [N,M]
NodePtr softmax_rows(const NodePtr& x);
NodePtr layernorm_rows(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta,
                       double eps = 1e-5);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double c);
NodePtr chw_to_tokens(const NodePtr& x);  // [C,H,W] -> [H*W, C]
NodePtr gather_rows(const NodePtr& x, std::vector<std::size_t> idx);
NodePtr flatten(const NodePtr& x);   // -> [numel], same storage order
NodePtr sum_all(const NodePtr& x);   // -> scalar
// Scalar combination sum_i coeff_i * x_i; all x_i scalar.
NodePtr add_scalars(std::vector<NodePtr> xs, std::vector<double> coeffs);

// --- loss ops with closed-form backward ------------------------------------
// Each recomputes through the plain (oracle-tested) loss function in its
// backward pass, so graph and reference implementations cannot drift.
NodePtr nd_bayes_node(const NodePtr& density, losses::Posterior posterior, double beta);
NodePtr mask_loss_node(const NodePtr& probs, std::vector<double> target);
// Gradient w.r.t. tokens only; the agent bank is captured by value.
NodePtr contrastive_node(const NodePtr& tokens, std::vector<double> densities,
                         agency::AgentBank bank, agency::Partition part,
                         contrastive::ContrastiveConfig cfg);
NodePtr push_node(const NodePtr& tokens, agency::AgentBank bank);

}  // namespace semicount::nn
