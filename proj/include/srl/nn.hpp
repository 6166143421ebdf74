#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srl/autodiff.hpp"
#include "srl/tensor.hpp"

namespace srl::nn {

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct Layer {
  Tensor weight;  // in x out
  Tensor bias;    // {out}

  friend bool operator==(const Layer&, const Layer&) = default;
};

// Affine layers with `activation` between them. The last layer is linear.
struct Mlp {
  std::vector<Layer> layers;
  Activation activation = Activation::kRelu;

  std::vector<std::size_t> dims() const;
  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  // Weights and biases interleaved, layer by layer.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

// Glorot-uniform weights, zero biases. Throws on fewer than two dims or a
// zero dim.
Mlp init_mlp(std::span<const std::size_t> dims, Activation activation, std::uint64_t seed);

// Parameters of an Mlp recorded as variables on a tape.
struct BoundMlp {
  const Mlp* mlp = nullptr;
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;

  // Var handles in Mlp::parameters() order.
  std::vector<ad::Var> parameters() const;
};

BoundMlp bind(ad::Tape& tape, const Mlp& mlp);
// Records parameters as constants (inference, no gradient).
BoundMlp bind_constant(ad::Tape& tape, const Mlp& mlp);

ad::Var forward(const BoundMlp& net, ad::Var x);
// Unit-norm representations: l2_normalize_rows(forward(x)).
ad::Var encode(const BoundMlp& encoder, ad::Var x);
// One prediction per row, shape {rows, 1}.
ad::Var regress(const BoundMlp& head, ad::Var z);

Tensor encode(const Mlp& encoder, const Tensor& x);
Tensor regress(const Mlp& head, const Tensor& z);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamWState {
  AdamWConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  AdamWState() = default;
  AdamWState(AdamWConfig cfg, std::span<const Tensor* const> params);
};

// One decoupled-weight-decay Adam step; throws on shape mismatch or
// non-finite gradients.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                AdamWState& state);

// Encoder + regression head as saved to disk.
struct Model {
  Mlp encoder;
  Mlp head;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  // The head predicts (y - target_mean) / target_scale.
  double target_mean = 0.0;
  double target_scale = 1.0;

  friend bool operator==(const Model&, const Model&) = default;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace srl::nn
