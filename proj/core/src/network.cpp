#include "semicount/network.hpp"

#include <cmath>
#include <stdexcept>

#include "semicount/random.hpp"

namespace semicount::net {

using nn::NodePtr;
using nn::Tensor;

double Forward::predicted_count() const {
  double acc = 0.0;
  for (double v : full_density) acc += v;
  return acc;
}

namespace {

Tensor init_normal(Rng& rng, std::vector<std::size_t> shape, double stddev) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = normal(rng, 0.0, stddev);
  return t;
}

}  // namespace

Network::Network(NetworkConfig cfg) : cfg_(cfg) {
  if (cfg_.channels % 4 != 0) throw std::invalid_argument("channels must be divisible by 4");
  if (cfg_.channels < 8) throw std::invalid_argument("channels must be at least 8");
  Rng rng(mix_seed(cfg_.seed, hash_str("network_init")));
  std::size_t c = cfg_.channels;

  auto add_param = [&](const std::string& name, Tensor t) {
    params_.emplace_back(name, nn::leaf(std::move(t)));
    return params_.back().second;
  };
  auto he_conv = [&](const std::string& name, std::size_t co, std::size_t ci) {
    add_param(name + ".w", init_normal(rng, {co, ci, 3, 3}, std::sqrt(2.0 / double(ci * 9))));
    add_param(name + ".b", Tensor::zeros({co}));
  };
  auto he_linear = [&](const std::string& name, std::size_t co, std::size_t ci,
                       bool zero_w = false) {
    add_param(name + ".w", zero_w ? Tensor::zeros({co, ci})
                                  : init_normal(rng, {co, ci}, std::sqrt(2.0 / double(ci))));
    add_param(name + ".b", Tensor::zeros({co}));
  };
  auto layernorm = [&](const std::string& name) {
    Tensor g = Tensor::zeros({c});
    for (double& v : g.data) v = 1.0;
    add_param(name + ".g", std::move(g));
    add_param(name + ".b", Tensor::zeros({c}));
  };

  // Backbone: 3 pools -> stride 8.
  he_conv("backbone.conv1", c / 4, cfg_.in_channels);
  he_conv("backbone.conv2", c / 2, c / 4);
  he_conv("backbone.conv3", c, c / 2);
  he_conv("backbone.conv4", c, c);

  he_linear("gate.fc1", c / 2, c);
  he_linear("gate.fc2", 1, c / 2);

  for (std::size_t l = 0; l < cfg_.attn_layers; ++l) {
    std::string p = "refine" + std::to_string(l);
    layernorm(p + ".self.ln");
    he_linear(p + ".self.q", c, c);
    he_linear(p + ".self.k", c, c);
    he_linear(p + ".self.v", c, c);
    he_linear(p + ".self.o", c, c, /*zero_w=*/true);
    layernorm(p + ".ffn1.ln");
    he_linear(p + ".ffn1.fc1", 2 * c, c);
    he_linear(p + ".ffn1.fc2", c, 2 * c, /*zero_w=*/true);
    layernorm(p + ".cross.lnq");
    layernorm(p + ".cross.lnkv");
    he_linear(p + ".cross.q", c, c);
    he_linear(p + ".cross.k", c, c);
    he_linear(p + ".cross.v", c, c);
    he_linear(p + ".cross.o", c, c, /*zero_w=*/true);
    layernorm(p + ".ffn2.ln");
    he_linear(p + ".ffn2.fc1", 2 * c, c);
    he_linear(p + ".ffn2.fc2", c, 2 * c, /*zero_w=*/true);
  }

  he_linear("density.fc1", c / 2, c);
  he_linear("density.fc2", 1, c / 2);
}

NodePtr Network::param(const std::string& name) const {
  for (const auto& [n, p] : params_)
    if (n == name) return p;
  throw std::out_of_range("no such parameter: " + name);
}

Forward Network::forward(const Image& img) const {
  if (img.channels != cfg_.in_channels)
    throw std::invalid_argument("forward: channel count mismatch");
  const std::size_t s = 8;
  std::size_t Hp = (img.height + s - 1) / s * s;
  std::size_t Wp = (img.width + s - 1) / s * s;

  Tensor x = Tensor::zeros({img.channels, Hp, Wp});
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t xx = 0; xx < img.width; ++xx)
        x.data[(c * Hp + y) * Wp + xx] = img.at(c, y, xx);

  NodePtr h = nn::constant(std::move(x));
  h = nn::relu(nn::conv2d_3x3(h, param("backbone.conv1.w"), param("backbone.conv1.b")));
  h = nn::avgpool2(h);
  h = nn::relu(nn::conv2d_3x3(h, param("backbone.conv2.w"), param("backbone.conv2.b")));
  h = nn::avgpool2(h);
  h = nn::relu(nn::conv2d_3x3(h, param("backbone.conv3.w"), param("backbone.conv3.b")));
  h = nn::avgpool2(h);
  h = nn::relu(nn::conv2d_3x3(h, param("backbone.conv4.w"), param("backbone.conv4.b")));

  Forward out;
  out.grid_h = h->value.shape[1];
  out.grid_w = h->value.shape[2];
  out.tokens = nn::chw_to_tokens(h);
  std::size_t n_tokens = out.grid_h * out.grid_w;

  NodePtr gate = nn::relu(nn::linear(out.tokens, param("gate.fc1.w"), param("gate.fc1.b")));
  gate = nn::linear(gate, param("gate.fc2.w"), param("gate.fc2.b"));
  out.mask_prob = nn::sigmoid(nn::flatten(gate));

  out.mask_bin.resize(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    bool fg = out.mask_prob->value.data[i] >= 0.5;
    out.mask_bin[i] = fg ? 1 : 0;
    (fg ? out.fg_idx : out.bg_idx).push_back(i);
  }

  out.full_density.assign(n_tokens, 0.0);
  if (out.fg_idx.empty()) return out;  // no foreground: count is zero

  NodePtr X = nn::gather_rows(out.tokens, out.fg_idx);
  NodePtr B = out.bg_idx.empty() ? nullptr : nn::gather_rows(out.tokens, out.bg_idx);
  double inv_sqrt_c = 1.0 / std::sqrt(double(cfg_.channels));

  auto attention = [&](const NodePtr& q_src, const NodePtr& kv_src, const std::string& p) {
    NodePtr q = nn::linear(q_src, param(p + ".q.w"), param(p + ".q.b"));
    NodePtr k = nn::linear(kv_src, param(p + ".k.w"), param(p + ".k.b"));
    NodePtr v = nn::linear(kv_src, param(p + ".v.w"), param(p + ".v.b"));
    NodePtr a = nn::softmax_rows(nn::scale(nn::matmul_nt(q, k), inv_sqrt_c));
    NodePtr ctx = nn::matmul(a, v);
    return nn::linear(ctx, param(p + ".o.w"), param(p + ".o.b"));
  };
  auto ffn = [&](const NodePtr& x_in, const std::string& p) {
    NodePtr n = nn::layernorm_rows(x_in, param(p + ".ln.g"), param(p + ".ln.b"));
    n = nn::relu(nn::linear(n, param(p + ".fc1.w"), param(p + ".fc1.b")));
    n = nn::linear(n, param(p + ".fc2.w"), param(p + ".fc2.b"));
    return nn::add(x_in, n);
  };

  for (std::size_t l = 0; l < cfg_.attn_layers; ++l) {
    std::string p = "refine" + std::to_string(l);
    NodePtr n = nn::layernorm_rows(X, param(p + ".self.ln.g"), param(p + ".self.ln.b"));
    X = nn::add(X, attention(n, n, p + ".self"));
    X = ffn(X, p + ".ffn1");
    if (B) {
      NodePtr qn = nn::layernorm_rows(X, param(p + ".cross.lnq.g"), param(p + ".cross.lnq.b"));
      NodePtr kn = nn::layernorm_rows(B, param(p + ".cross.lnkv.g"), param(p + ".cross.lnkv.b"));
      X = nn::add(X, attention(qn, kn, p + ".cross"));
    }
    X = ffn(X, p + ".ffn2");
  }

  NodePtr d = nn::relu(nn::linear(X, param("density.fc1.w"), param("density.fc1.b")));
  d = nn::linear(d, param("density.fc2.w"), param("density.fc2.b"));
  out.fg_density = nn::abs_op(nn::flatten(d));

  for (std::size_t k = 0; k < out.fg_idx.size(); ++k)
    out.full_density[out.fg_idx[k]] = out.fg_density->value.data[k];
  return out;
}

}  // namespace semicount::net
