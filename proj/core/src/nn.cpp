#include "semicount/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace semicount::nn {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(t.numel(), 0.0);
  return t;
}

Tensor Tensor::from(std::vector<double> values, std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  if (t.data.size() != t.numel()) throw std::invalid_argument("Tensor::from: size mismatch");
  return t;
}

NodePtr constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return n;
}

NodePtr leaf(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = true;
  return n;
}

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> inputs,
                  std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& i : n->inputs)
    if (i->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward_fn = std::move(fn);
  return n;
}

void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void backward(const NodePtr& root) {
  check(root != nullptr, "backward: null root");
  check(root->value.numel() == 1, "backward: root must be scalar");

  // Post-order DFS: children precede parents in `order`.
  struct Frame {
    Node* n;
    std::size_t next;
  };
  std::vector<Node*> order;
  std::unordered_set<Node*> seen{root.get()};
  std::vector<Frame> stack{{root.get(), 0}};
  while (!stack.empty()) {
    Frame f = stack.back();
    if (f.next < f.n->inputs.size()) {
      ++stack.back().next;
      Node* child = f.n->inputs[f.next].get();
      if (seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad = Tensor::zeros(n->value.shape);
  root->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->requires_grad && n->backward_fn) n->backward_fn(*n);
  }
}

NodePtr conv2d_3x3(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
  check(x->value.shape.size() == 3, "conv2d: x must be [C,H,W]");
  check(w->value.shape.size() == 4 && w->value.shape[2] == 3 && w->value.shape[3] == 3,
        "conv2d: w must be [Co,Ci,3,3]");
  std::size_t Ci = x->value.shape[0], H = x->value.shape[1], W = x->value.shape[2];
  std::size_t Co = w->value.shape[0];
  check(w->value.shape[1] == Ci, "conv2d: channel mismatch");
  check(b->value.numel() == Co, "conv2d: bias size");

  Tensor out = Tensor::zeros({Co, H, W});
  const double* xv = x->value.data.data();
  const double* wv = w->value.data.data();
  for (std::size_t co = 0; co < Co; ++co) {
    double bias = b->value.data[co];
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx) {
        double acc = bias;
        for (std::size_t ci = 0; ci < Ci; ++ci)
          for (int ky = 0; ky < 3; ++ky) {
            std::ptrdiff_t sy = std::ptrdiff_t(y) + ky - 1;
            if (sy < 0 || sy >= std::ptrdiff_t(H)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              std::ptrdiff_t sx = std::ptrdiff_t(xx) + kx - 1;
              if (sx < 0 || sx >= std::ptrdiff_t(W)) continue;
              acc += wv[((co * Ci + ci) * 3 + std::size_t(ky)) * 3 + std::size_t(kx)] *
                     xv[(ci * H + std::size_t(sy)) * W + std::size_t(sx)];
            }
          }
        out.data[(co * H + y) * W + xx] = acc;
      }
  }
  return make_node(std::move(out), {x, w, b}, [Ci, H, W, Co](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const double* go = self.grad.data.data();
    const double* xv = xn.value.data.data();
    const double* wv = wn.value.data.data();
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) {
          double g = go[(co * H + y) * W + xx];
          if (g == 0.0) continue;
          bn.grad.data[co] += g;
          for (std::size_t ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < 3; ++ky) {
              std::ptrdiff_t sy = std::ptrdiff_t(y) + ky - 1;
              if (sy < 0 || sy >= std::ptrdiff_t(H)) continue;
              for (int kx = 0; kx < 3; ++kx) {
                std::ptrdiff_t sx = std::ptrdiff_t(xx) + kx - 1;
                if (sx < 0 || sx >= std::ptrdiff_t(W)) continue;
                std::size_t wi = ((co * Ci + ci) * 3 + std::size_t(ky)) * 3 + std::size_t(kx);
                std::size_t xi = (ci * H + std::size_t(sy)) * W + std::size_t(sx);
                wn.grad.data[wi] += g * xv[xi];
                xn.grad.data[xi] += g * wv[wi];
              }
            }
        }
  });
}

NodePtr avgpool2(const NodePtr& x) {
  check(x->value.shape.size() == 3, "avgpool2: x must be [C,H,W]");
  std::size_t C = x->value.shape[0], H = x->value.shape[1], W = x->value.shape[2];
  check(H % 2 == 0 && W % 2 == 0, "avgpool2: dims must be even");
  std::size_t Ho = H / 2, Wo = W / 2;
  Tensor out = Tensor::zeros({C, Ho, Wo});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t xx = 0; xx < Wo; ++xx) {
        const double* base = x->value.data.data() + (c * H + 2 * y) * W + 2 * xx;
        out.data[(c * Ho + y) * Wo + xx] = 0.25 * (base[0] + base[1] + base[W] + base[W + 1]);
      }
  return make_node(std::move(out), {x}, [C, H, W, Ho, Wo](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t xx = 0; xx < Wo; ++xx) {
          double g = 0.25 * self.grad.data[(c * Ho + y) * Wo + xx];
          double* base = xn.grad.data.data() + (c * H + 2 * y) * W + 2 * xx;
          base[0] += g;
          base[1] += g;
          base[W] += g;
          base[W + 1] += g;
        }
  });
}

NodePtr relu(const NodePtr& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = std::max(v, 0.0);
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < xn.grad.data.size(); ++i)
      if (xn.value.data[i] > 0.0) xn.grad.data[i] += self.grad.data[i];
  });
}

NodePtr sigmoid(const NodePtr& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < xn.grad.data.size(); ++i) {
      double y = self.value.data[i];
      xn.grad.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  });
}

NodePtr abs_op(const NodePtr& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = std::abs(v);
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < xn.grad.data.size(); ++i) {
      double v = xn.value.data[i];
      if (v > 0.0)
        xn.grad.data[i] += self.grad.data[i];
      else if (v < 0.0)
        xn.grad.data[i] -= self.grad.data[i];
    }
  });
}

NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
  check(x->value.shape.size() == 2 && w->value.shape.size() == 2, "linear: shapes");
  std::size_t N = x->value.shape[0], Ci = x->value.shape[1], Co = w->value.shape[0];
  check(w->value.shape[1] == Ci, "linear: in-features mismatch");
  check(b->value.numel() == Co, "linear: bias size");
  Tensor out = Tensor::zeros({N, Co});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < Co; ++o) {
      double acc = b->value.data[o];
      for (std::size_t i = 0; i < Ci; ++i)
        acc += x->value.data[n * Ci + i] * w->value.data[o * Ci + i];
      out.data[n * Co + o] = acc;
    }
  return make_node(std::move(out), {x, w, b}, [N, Ci, Co](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < Co; ++o) {
        double g = self.grad.data[n * Co + o];
        if (g == 0.0) continue;
        bn.grad.data[o] += g;
        for (std::size_t i = 0; i < Ci; ++i) {
          wn.grad.data[o * Ci + i] += g * xn.value.data[n * Ci + i];
          xn.grad.data[n * Ci + i] += g * wn.value.data[o * Ci + i];
        }
      }
  });
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  check(a->value.shape.size() == 2 && b->value.shape.size() == 2, "matmul: shapes");
  std::size_t N = a->value.shape[0], K = a->value.shape[1], M = b->value.shape[1];
  check(b->value.shape[0] == K, "matmul: inner dim mismatch");
  Tensor out = Tensor::zeros({N, M});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      double av = a->value.data[n * K + k];
      for (std::size_t m = 0; m < M; ++m)
        out.data[n * M + m] += av * b->value.data[k * M + m];
    }
  return make_node(std::move(out), {a, b}, [N, K, M](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t m = 0; m < M; ++m) {
        double g = self.grad.data[n * M + m];
        if (g == 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) {
          an.grad.data[n * K + k] += g * bn.value.data[k * M + m];
          bn.grad.data[k * M + m] += g * an.value.data[n * K + k];
        }
      }
  });
}

NodePtr matmul_nt(const NodePtr& a, const NodePtr& b) {
  check(a->value.shape.size() == 2 && b->value.shape.size() == 2, "matmul_nt: shapes");
  std::size_t N = a->value.shape[0], K = a->value.shape[1], M = b->value.shape[0];
  check(b->value.shape[1] == K, "matmul_nt: inner dim mismatch");
  Tensor out = Tensor::zeros({N, M});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = 0; m < M; ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k)
        acc += a->value.data[n * K + k] * b->value.data[m * K + k];
      out.data[n * M + m] = acc;
    }
  return make_node(std::move(out), {a, b}, [N, K, M](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t m = 0; m < M; ++m) {
        double g = self.grad.data[n * M + m];
        if (g == 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) {
          an.grad.data[n * K + k] += g * bn.value.data[m * K + k];
          bn.grad.data[m * K + k] += g * an.value.data[n * K + k];
        }
      }
  });
}

NodePtr softmax_rows(const NodePtr& x) {
  check(x->value.shape.size() == 2, "softmax_rows: shape");
  std::size_t N = x->value.shape[0], M = x->value.shape[1];
  Tensor out = Tensor::zeros({N, M});
  for (std::size_t n = 0; n < N; ++n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < M; ++j) m = std::max(m, x->value.data[n * M + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      double e = std::exp(x->value.data[n * M + j] - m);
      out.data[n * M + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < M; ++j) out.data[n * M + j] /= z;
  }
  return make_node(std::move(out), {x}, [N, M](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t n = 0; n < N; ++n) {
      double dot = 0.0;
      for (std::size_t j = 0; j < M; ++j)
        dot += self.grad.data[n * M + j] * self.value.data[n * M + j];
      for (std::size_t j = 0; j < M; ++j)
        xn.grad.data[n * M + j] +=
            self.value.data[n * M + j] * (self.grad.data[n * M + j] - dot);
    }
  });
}

NodePtr layernorm_rows(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta,
                       double eps) {
  check(x->value.shape.size() == 2, "layernorm: shape");
  std::size_t N = x->value.shape[0], C = x->value.shape[1];
  check(gamma->value.numel() == C && beta->value.numel() == C, "layernorm: affine size");
  Tensor out = Tensor::zeros({N, C});
  // xhat and 1/std are cheap to save and make backward straightforward.
  auto xhat = std::make_shared<std::vector<double>>(N * C);
  auto rstd = std::make_shared<std::vector<double>>(N);
  for (std::size_t n = 0; n < N; ++n) {
    double mu = 0.0;
    for (std::size_t c = 0; c < C; ++c) mu += x->value.data[n * C + c];
    mu /= double(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double d = x->value.data[n * C + c] - mu;
      var += d * d;
    }
    var /= double(C);
    double r = 1.0 / std::sqrt(var + eps);
    (*rstd)[n] = r;
    for (std::size_t c = 0; c < C; ++c) {
      double h = (x->value.data[n * C + c] - mu) * r;
      (*xhat)[n * C + c] = h;
      out.data[n * C + c] = gamma->value.data[c] * h + beta->value.data[c];
    }
  }
  return make_node(std::move(out), {x, gamma, beta}, [N, C, xhat, rstd](Node& self) {
    Node& xn = *self.inputs[0];
    Node& gn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    for (std::size_t n = 0; n < N; ++n) {
      double mean_g = 0.0, mean_gh = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        double go = self.grad.data[n * C + c];
        double h = (*xhat)[n * C + c];
        gn.grad.data[c] += go * h;
        bn.grad.data[c] += go;
        double gh = go * gn.value.data[c];
        mean_g += gh;
        mean_gh += gh * h;
      }
      mean_g /= double(C);
      mean_gh /= double(C);
      for (std::size_t c = 0; c < C; ++c) {
        double gh = self.grad.data[n * C + c] * gn.value.data[c];
        xn.grad.data[n * C + c] +=
            (*rstd)[n] * (gh - mean_g - (*xhat)[n * C + c] * mean_gh);
      }
    }
  });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  check(a->value.shape == b->value.shape, "add: shape mismatch");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) {
      self.inputs[0]->grad.data[i] += self.grad.data[i];
      self.inputs[1]->grad.data[i] += self.grad.data[i];
    }
  });
}

NodePtr scale(const NodePtr& a, double c) {
  Tensor out = a->value;
  for (double& v : out.data) v *= c;
  return make_node(std::move(out), {a}, [c](Node& self) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      self.inputs[0]->grad.data[i] += c * self.grad.data[i];
  });
}

NodePtr chw_to_tokens(const NodePtr& x) {
  check(x->value.shape.size() == 3, "chw_to_tokens: shape");
  std::size_t C = x->value.shape[0], H = x->value.shape[1], W = x->value.shape[2];
  Tensor out = Tensor::zeros({H * W, C});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H * W; ++i)
      out.data[i * C + c] = x->value.data[c * H * W + i];
  return make_node(std::move(out), {x}, [C, H, W](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H * W; ++i)
        xn.grad.data[c * H * W + i] += self.grad.data[i * C + c];
  });
}

NodePtr gather_rows(const NodePtr& x, std::vector<std::size_t> idx) {
  check(x->value.shape.size() == 2, "gather_rows: shape");
  std::size_t N = x->value.shape[0], C = x->value.shape[1];
  for (std::size_t i : idx) check(i < N, "gather_rows: index out of range");
  Tensor out = Tensor::zeros({idx.size(), C});
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(x->value.data.data() + idx[k] * C, C, out.data.data() + k * C);
  return make_node(std::move(out), {x}, [C, idx = std::move(idx)](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < C; ++c)
        xn.grad.data[idx[k] * C + c] += self.grad.data[k * C + c];
  });
}

NodePtr flatten(const NodePtr& x) {
  Tensor out = Tensor::from(x->value.data, {x->value.numel()});
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      xn.grad.data[i] += self.grad.data[i];
  });
}

NodePtr sum_all(const NodePtr& x) {
  double acc = 0.0;
  for (double v : x->value.data) acc += v;
  return make_node(Tensor::from({acc}, {1}), {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    double g = self.grad.data[0];
    for (double& gv : xn.grad.data) gv += g;
  });
}

NodePtr add_scalars(std::vector<NodePtr> xs, std::vector<double> coeffs) {
  check(!xs.empty() && xs.size() == coeffs.size(), "add_scalars: arity");
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check(xs[i]->value.numel() == 1, "add_scalars: non-scalar input");
    acc += coeffs[i] * xs[i]->value.data[0];
  }
  return make_node(Tensor::from({acc}, {1}), std::move(xs),
                   [coeffs = std::move(coeffs)](Node& self) {
                     for (std::size_t i = 0; i < self.inputs.size(); ++i)
                       self.inputs[i]->grad.data[0] += coeffs[i] * self.grad.data[0];
                   });
}

NodePtr nd_bayes_node(const NodePtr& density, losses::Posterior posterior, double beta) {
  check(density->value.shape.size() == 1, "nd_bayes_node: density must be flat");
  double l = losses::nd_bayes_loss(density->value.data, posterior, beta, 1.0, {});
  return make_node(Tensor::from({l}, {1}), {density},
                   [posterior = std::move(posterior), beta](Node& self) {
                     Node& dn = *self.inputs[0];
                     losses::nd_bayes_loss(dn.value.data, posterior, beta,
                                           self.grad.data[0], dn.grad.data);
                   });
}

NodePtr mask_loss_node(const NodePtr& probs, std::vector<double> target) {
  check(probs->value.numel() == target.size(), "mask_loss_node: size mismatch");
  double l = losses::mask_loss(probs->value.data, target, 1.0, {});
  return make_node(Tensor::from({l}, {1}), {probs},
                   [target = std::move(target)](Node& self) {
                     Node& pn = *self.inputs[0];
                     losses::mask_loss(pn.value.data, target, self.grad.data[0],
                                       pn.grad.data);
                   });
}

NodePtr contrastive_node(const NodePtr& tokens, std::vector<double> densities,
                         agency::AgentBank bank, agency::Partition part,
                         contrastive::ContrastiveConfig cfg) {
  check(tokens->value.shape.size() == 2, "contrastive_node: tokens must be [K,C]");
  std::size_t dim = tokens->value.shape[1];
  double l = contrastive::matched_contrastive_loss(bank, part, tokens->value.data,
                                                   densities, dim, cfg, 1.0, nullptr,
                                                   nullptr);
  return make_node(
      Tensor::from({l}, {1}), {tokens},
      [densities = std::move(densities), bank = std::move(bank), part = std::move(part),
       cfg, dim](Node& self) {
        Node& tn = *self.inputs[0];
        contrastive::matched_contrastive_loss(bank, part, tn.value.data, densities, dim,
                                              cfg, self.grad.data[0], nullptr,
                                              &tn.grad.data);
      });
}

NodePtr push_node(const NodePtr& tokens, agency::AgentBank bank) {
  check(tokens->value.shape.size() == 2, "push_node: tokens must be [K,C]");
  std::size_t dim = tokens->value.shape[1];
  double l = agency::background_push_loss(bank, tokens->value.data, dim, 1.0, nullptr,
                                          nullptr);
  return make_node(Tensor::from({l}, {1}), {tokens},
                   [bank = std::move(bank), dim](Node& self) {
                     Node& tn = *self.inputs[0];
                     agency::background_push_loss(bank, tn.value.data, dim,
                                                  self.grad.data[0], nullptr,
                                                  &tn.grad.data);
                   });
}

}  // namespace semicount::nn
