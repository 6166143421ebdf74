#include "srl/nn.hpp"

#include <cmath>

#include "srl/error.hpp"
#include "srl/io.hpp"
#include "srl/rng.hpp"

namespace srl::nn {

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw UsageError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().weight.rows());
  for (const Layer& l : layers) d.push_back(l.weight.cols());
  return d;
}

std::vector<Tensor*> Mlp::parameters() {
  std::vector<Tensor*> out;
  for (Layer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> Mlp::parameters() const {
  std::vector<const Tensor*> out;
  for (const Layer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Mlp init_mlp(std::span<const std::size_t> dims, Activation activation, std::uint64_t seed) {
  if (dims.size() < 2) throw UsageError("an MLP needs at least an input and an output dim");
  for (std::size_t d : dims) {
    if (d == 0) throw UsageError("MLP dims must be positive");
  }
  Rng rng(seed);
  Mlp mlp;
  mlp.activation = activation;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t fan_in = dims[i];
    const std::size_t fan_out = dims[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Tensor::matrix(fan_in, fan_out), Tensor({fan_out}, 0.0)};
    for (double& w : layer.weight.values()) w = bound * (2.0 * uniform_unit(rng) - 1.0);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

std::vector<ad::Var> BoundMlp::parameters() const {
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(weights[i]);
    out.push_back(biases[i]);
  }
  return out;
}

namespace {

BoundMlp bind_impl(ad::Tape& tape, const Mlp& mlp, bool trainable) {
  BoundMlp b;
  b.mlp = &mlp;
  for (const Layer& l : mlp.layers) {
    b.weights.push_back(trainable ? tape.variable(l.weight) : tape.constant(l.weight));
    b.biases.push_back(trainable ? tape.variable(l.bias) : tape.constant(l.bias));
  }
  return b;
}

}  // namespace

BoundMlp bind(ad::Tape& tape, const Mlp& mlp) { return bind_impl(tape, mlp, true); }
BoundMlp bind_constant(ad::Tape& tape, const Mlp& mlp) { return bind_impl(tape, mlp, false); }

ad::Var forward(const BoundMlp& net, ad::Var x) {
  if (x.cols() != net.mlp->input_dim()) {
    throw UsageError("input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(net.mlp->input_dim()));
  }
  ad::Var h = x;
  const std::size_t n = net.weights.size();
  for (std::size_t i = 0; i < n; ++i) {
    h = ad::add(ad::matmul(h, net.weights[i]), net.biases[i]);
    if (i + 1 < n) {
      h = net.mlp->activation == Activation::kRelu ? ad::relu(h) : ad::tanh(h);
    }
  }
  return h;
}

ad::Var encode(const BoundMlp& encoder, ad::Var x) {
  return ad::l2_normalize_rows(forward(encoder, x));
}

ad::Var regress(const BoundMlp& head, ad::Var z) { return forward(head, z); }

Tensor encode(const Mlp& encoder, const Tensor& x) {
  ad::Tape tape;
  return encode(bind_constant(tape, encoder), tape.constant(x)).value();
}

Tensor regress(const Mlp& head, const Tensor& z) {
  ad::Tape tape;
  return regress(bind_constant(tape, head), tape.constant(z)).value();
}

AdamWState::AdamWState(AdamWConfig cfg, std::span<const Tensor* const> params)
    : config(cfg) {
  for (const Tensor* p : params) {
    first_moment.emplace_back(p->shape());
    second_moment.emplace_back(p->shape());
  }
}

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                AdamWState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw Error("adamw_step: parameter, gradient and state counts differ");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(grads[p]) || !params[p]->same_shape(state.first_moment[p])) {
      throw Error("adamw_step: shape mismatch for parameter " + std::to_string(p));
    }
    if (!grads[p].all_finite()) {
      throw NumericError("adamw_step: non-finite gradient for parameter " + std::to_string(p));
    }
  }
  const AdamWConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double decay = 1.0 - c.lr * c.weight_decay;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = grads[p];
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] = w[i] * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

io::Json describe(const Mlp& mlp) {
  return {{"dims", mlp.dims()}, {"activation", to_string(mlp.activation)}};
}

Mlp shell_from(const io::Json& j) {
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  Mlp mlp = init_mlp(dims, activation_from_string(j.at("activation").get<std::string>()), 0);
  return mlp;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  io::Json tensors = io::Json::array();
  std::vector<double> payload;
  auto append = [&](const std::string& prefix, const Mlp& mlp) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      const Layer& l = mlp.layers[i];
      tensors.push_back({{"name", prefix + "." + std::to_string(i) + ".weight"},
                         {"shape", l.weight.shape()}});
      payload.insert(payload.end(), l.weight.values().begin(), l.weight.values().end());
      tensors.push_back({{"name", prefix + "." + std::to_string(i) + ".bias"},
                         {"shape", l.bias.shape()}});
      payload.insert(payload.end(), l.bias.values().begin(), l.bias.values().end());
    }
  };
  append("encoder", model.encoder);
  append("head", model.head);
  io::Json header = {{"format", "srl-checkpoint"},
                     {"version", 1},
                     {"encoder", describe(model.encoder)},
                     {"head", describe(model.head)},
                     {"seed", model.seed},
                     {"epoch", model.epoch},
                     {"target_mean", model.target_mean},
                     {"target_scale", model.target_scale},
                     {"tensors", tensors}};
  io::write_dump(path, header, std::span<const double>(payload));
}

Model load_checkpoint(const std::filesystem::path& path) {
  const io::Dump dump = io::read_dump(path);
  io::expect_format(dump.header, "srl-checkpoint");
  Model model;
  try {
    model.encoder = shell_from(dump.header.at("encoder"));
    model.head = shell_from(dump.header.at("head"));
    model.seed = dump.header.at("seed").get<std::uint64_t>();
    model.epoch = dump.header.at("epoch").get<std::size_t>();
    model.target_mean = dump.header.at("target_mean").get<double>();
    model.target_scale = dump.header.at("target_scale").get<double>();
  } catch (const io::Json::exception& e) {
    throw SchemaError("checkpoint header incomplete: " + std::string(e.what()));
  }
  std::size_t offset = 0;
  for (Mlp* mlp : {&model.encoder, &model.head}) {
    for (Tensor* t : mlp->parameters()) {
      if (offset + t->size() > dump.payload.size()) {
        throw DataError("checkpoint payload shorter than its header declares");
      }
      for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = dump.payload[offset + i];
      offset += t->size();
    }
  }
  if (offset != dump.payload.size()) throw DataError("checkpoint payload has trailing data");
  return model;
}

}  // namespace srl::nn
