#pragma once

#include "core/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace spoofdet {

enum class Activation { LeakyRelu, Linear };

inline std::string activation_name(Activation a) {
  return a == Activation::LeakyRelu ? "leaky_relu" : "linear";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "linear") return Activation::Linear;
  throw SchemaError("unknown activation: " + name);
}

// Dense feed-forward network with a single linear output neuron. Templated on
// the scalar type: double for gradient-checked paths, float where training
// throughput matters. Immutable networks are safe for concurrent forwarding.
template <typename Scalar>
struct DenseLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::LeakyRelu;
  Scalar leaky_slope = Scalar(0.01);
};

template <typename Scalar>
class Network {
 public:
  using Matrix = typename DenseLayer<Scalar>::Matrix;
  using Vector = typename DenseLayer<Scalar>::Vector;

  Network() = default;
  Network(int input_width, std::vector<DenseLayer<Scalar>> layers)
      : input_width_(input_width), layers_(std::move(layers)) {
    validate();
  }

  int input_width() const { return input_width_; }
  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }

  Scalar forward(const Vector& input) const {
    if (input.size() != input_width_) throw std::invalid_argument("network input width mismatch");
    Vector a = input;
    for (const DenseLayer<Scalar>& layer : layers_) {
      Vector z = layer.weights * a + layer.bias;
      a = apply_activation(layer, std::move(z));
    }
    return a(0);
  }

  // Rows of `inputs` are samples; returns one logit per row.
  Vector forward_batch(const Matrix& inputs) const {
    if (inputs.cols() != input_width_) throw std::invalid_argument("network input width mismatch");
    Matrix a = inputs;
    for (const DenseLayer<Scalar>& layer : layers_) {
      Matrix z = (a * layer.weights.transpose()).rowwise() + layer.bias.transpose();
      a = apply_activation(layer, std::move(z));
    }
    return a.col(0);
  }

  void validate() const {
    if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
    int width = input_width_;
    for (const DenseLayer<Scalar>& layer : layers_) {
      if (layer.weights.cols() != width) throw std::invalid_argument("layer width mismatch");
      if (layer.bias.size() != layer.weights.rows())
        throw std::invalid_argument("bias width mismatch");
      width = static_cast<int>(layer.weights.rows());
    }
    if (width != 1) throw std::invalid_argument("network must have exactly one output neuron");
    if (layers_.back().activation != Activation::Linear)
      throw std::invalid_argument("output activation must be linear");
  }

  template <typename M>
  static M apply_activation(const DenseLayer<Scalar>& layer, M z) {
    if (layer.activation == Activation::LeakyRelu) {
      const Scalar slope = layer.leaky_slope;
      z = z.unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
    }
    return z;
  }

 private:
  int input_width_ = 0;
  std::vector<DenseLayer<Scalar>> layers_;
};

// Uniform fan-in scaled (He-style) initialization.
template <typename Scalar>
Network<Scalar> make_mlp(int input_width, const std::vector<int>& hidden_widths,
                         Scalar leaky_slope, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x11edULL);
  std::vector<DenseLayer<Scalar>> layers;
  int in = input_width;
  std::vector<int> widths = hidden_widths;
  widths.push_back(1);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int out = widths[i];
    DenseLayer<Scalar> layer;
    const double bound = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> u(-bound, bound);
    layer.weights.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weights(r, c) = Scalar(u(rng));
    layer.bias = DenseLayer<Scalar>::Vector::Zero(out).eval();
    layer.activation = (i + 1 == widths.size()) ? Activation::Linear : Activation::LeakyRelu;
    layer.leaky_slope = leaky_slope;
    in = out;
    layers.push_back(std::move(layer));
  }
  return Network<Scalar>(input_width, std::move(layers));
}

// Numerically stable BCE from logits: max(z,0) - z*y + log(1 + exp(-|z|)).
template <typename Scalar>
Scalar bce_from_logit(Scalar logit, Scalar label) {
  const Scalar z = logit;
  return std::max(z, Scalar(0)) - z * label + std::log1p(std::exp(-std::abs(z)));
}

template <typename Scalar>
Scalar l1_penalty(const Network<Scalar>& net) {
  Scalar sum = 0;
  for (const DenseLayer<Scalar>& layer : net.layers()) sum += layer.weights.cwiseAbs().sum();
  return sum;
}

// Mean BCE over the batch plus lambda * sum |w| over trainable weights
// (biases excluded).
template <typename Scalar>
Scalar bce_l1_loss(const typename Network<Scalar>::Vector& logits,
                   const typename Network<Scalar>::Vector& labels, const Network<Scalar>& net,
                   Scalar lambda) {
  if (logits.size() != labels.size()) throw std::invalid_argument("logits/labels length mismatch");
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) sum += bce_from_logit(logits(i), labels(i));
  Scalar loss = logits.size() > 0 ? sum / Scalar(logits.size()) : Scalar(0);
  return loss + lambda * l1_penalty(net);
}

template <typename Scalar>
struct Gradients {
  std::vector<typename DenseLayer<Scalar>::Matrix> weights;
  std::vector<typename DenseLayer<Scalar>::Vector> bias;
};

// Exact gradients of bce_l1_loss for a batch (rows of X). The l1 subgradient
// at 0 is taken as 0.
template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net, const typename Network<Scalar>::Matrix& x,
                           const typename Network<Scalar>::Vector& labels, Scalar lambda) {
  using Matrix = typename Network<Scalar>::Matrix;
  if (x.rows() != labels.size()) throw std::invalid_argument("batch/labels length mismatch");
  if (x.cols() != net.input_width()) throw std::invalid_argument("network input width mismatch");
  const auto& layers = net.layers();
  const Scalar batch = Scalar(x.rows());

  // Forward pass, keeping pre-activations and activations.
  std::vector<Matrix> acts;  // acts[l] = input to layer l
  std::vector<Matrix> zs;
  acts.push_back(x);
  for (const DenseLayer<Scalar>& layer : layers) {
    Matrix z = (acts.back() * layer.weights.transpose()).rowwise() + layer.bias.transpose();
    zs.push_back(z);
    acts.push_back(Network<Scalar>::apply_activation(layer, std::move(z)));
  }

  // dL/dz at the output: (sigmoid(z) - y) / batch.
  Matrix delta = acts.back();
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    const Scalar z = zs.back()(i, 0);
    const Scalar sig = Scalar(1) / (Scalar(1) + std::exp(-z));
    delta(i, 0) = (sig - labels(i)) / batch;
  }

  Gradients<Scalar> grads;
  grads.weights.resize(layers.size());
  grads.bias.resize(layers.size());
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    grads.weights[l] = delta.transpose() * acts[l];
    grads.bias[l] = delta.colwise().sum().transpose();
    if (lambda != Scalar(0)) {
      grads.weights[l] += lambda * layers[l].weights.unaryExpr([](Scalar w) {
        return w > Scalar(0) ? Scalar(1) : (w < Scalar(0) ? Scalar(-1) : Scalar(0));
      });
    }
    if (l > 0) {
      delta = (delta * layers[l].weights).eval();
      const DenseLayer<Scalar>& prev = layers[l - 1];
      if (prev.activation == Activation::LeakyRelu) {
        const Scalar slope = prev.leaky_slope;
        delta.array() *= zs[l - 1].unaryExpr([slope](Scalar z) {
          return z > Scalar(0) ? Scalar(1) : slope;
        }).array();
      }
    }
  }
  return grads;
}

template <typename Scalar>
struct TrainConfig {
  Scalar learning_rate = Scalar(1e-3);
  Scalar l1_coefficient = Scalar(1e-5);
  int max_epochs = 200;
  int batch_size = 64;
  int early_stop_patience = 20;
  std::uint64_t seed = 0;
  Scalar adam_beta1 = Scalar(0.9);
  Scalar adam_beta2 = Scalar(0.999);
  Scalar adam_eps = Scalar(1e-8);
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  int stopped_epoch = -1;
  int best_epoch = -1;
};

template <typename Scalar>
double classification_accuracy(const typename Network<Scalar>::Vector& logits,
                               const typename Network<Scalar>::Vector& labels) {
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if ((logits(i) > Scalar(0)) == (labels(i) > Scalar(0.5))) ++correct;
  return logits.size() > 0 ? static_cast<double>(correct) / logits.size() : 0.0;
}

// Mini-batch Adam on the BCE + l1 loss; restores the weights of the best
// validation-loss epoch; stops after `patience` epochs without improvement.
template <typename Scalar>
TrainReport train(Network<Scalar>& net, const typename Network<Scalar>::Matrix& x_train,
                  const typename Network<Scalar>::Vector& y_train,
                  const typename Network<Scalar>::Matrix& x_val,
                  const typename Network<Scalar>::Vector& y_val, const TrainConfig<Scalar>& cfg) {
  using Matrix = typename Network<Scalar>::Matrix;
  using Vector = typename Network<Scalar>::Vector;
  if (x_train.rows() == 0 || x_val.rows() == 0)
    throw std::invalid_argument("train and validation sets must be non-empty");
  if (cfg.learning_rate <= Scalar(0)) throw std::invalid_argument("learning rate must be > 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");

  TrainReport report;
  auto eval = [&](const Matrix& x, const Vector& y, double* acc) {
    Vector logits = net.forward_batch(x);
    if (acc) *acc = classification_accuracy<Scalar>(logits, y);
    return static_cast<double>(bce_l1_loss<Scalar>(logits, y, net, cfg.l1_coefficient));
  };

  Gradients<Scalar> m, v;
  const auto& layers = net.layers();
  m.weights.resize(layers.size());
  m.bias.resize(layers.size());
  v.weights.resize(layers.size());
  v.bias.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    m.weights[l] = DenseLayer<Scalar>::Matrix::Zero(layers[l].weights.rows(), layers[l].weights.cols());
    v.weights[l] = m.weights[l];
    m.bias[l] = DenseLayer<Scalar>::Vector::Zero(layers[l].bias.size());
    v.bias[l] = m.bias[l];
  }

  Rng rng = make_rng(cfg.seed, 0xadaULL);
  std::vector<int> order(static_cast<std::size_t>(x_train.rows()));
  std::iota(order.begin(), order.end(), 0);

  std::vector<DenseLayer<Scalar>> best_layers = net.layers();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  long step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < x_train.rows(); start += cfg.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, x_train.rows() - start);
      Matrix xb(size, x_train.cols());
      Vector yb(size);
      for (Eigen::Index i = 0; i < size; ++i) {
        xb.row(i) = x_train.row(order[start + i]);
        yb(i) = y_train(order[start + i]);
      }
      Gradients<Scalar> g = backward(net, xb, yb, cfg.l1_coefficient);
      epoch_loss +=
          static_cast<double>(bce_l1_loss<Scalar>(net.forward_batch(xb), yb, net, cfg.l1_coefficient));
      ++batches;
      ++step;
      const Scalar bc1 = Scalar(1) - Scalar(std::pow(double(cfg.adam_beta1), double(step)));
      const Scalar bc2 = Scalar(1) - Scalar(std::pow(double(cfg.adam_beta2), double(step)));
      for (std::size_t l = 0; l < layers.size(); ++l) {
        auto adam = [&](auto& mm, auto& vv, const auto& grad, auto& param) {
          mm = cfg.adam_beta1 * mm + (Scalar(1) - cfg.adam_beta1) * grad;
          vv = cfg.adam_beta2 * vv + (Scalar(1) - cfg.adam_beta2) * grad.cwiseProduct(grad);
          param.array() -= cfg.learning_rate * (mm.array() / bc1) /
                           ((vv.array() / bc2).sqrt() + cfg.adam_eps);
        };
        adam(m.weights[l], v.weights[l], g.weights[l], net.layers()[l].weights);
        adam(m.bias[l], v.bias[l], g.bias[l], net.layers()[l].bias);
      }
    }
    report.train_loss.push_back(batches > 0 ? epoch_loss / batches : 0.0);
    double val_acc = 0.0;
    const double val_loss = eval(x_val, y_val, &val_acc);
    report.val_loss.push_back(val_loss);
    report.val_accuracy.push_back(val_acc);
    report.stopped_epoch = epoch;
    if (val_loss < best_val) {
      best_val = val_loss;
      report.best_epoch = epoch;
      best_layers = net.layers();
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  if (report.best_epoch >= 0) net.layers() = best_layers;
  return report;
}

template <typename Scalar>
nlohmann::json network_to_json(const Network<Scalar>& net) {
  nlohmann::json j;
  j["input_transform"] = "identity";
  j["arch"] = {{"input_width", net.input_width()}, {"layer_count", net.layers().size()}};
  j["layers"] = nlohmann::json::array();
  for (const DenseLayer<Scalar>& layer : net.layers()) {
    nlohmann::json jl;
    jl["rows"] = layer.weights.rows();
    jl["cols"] = layer.weights.cols();
    jl["activation"] = activation_name(layer.activation);
    jl["leaky_slope"] = static_cast<double>(layer.leaky_slope);
    std::vector<double> w;
    w.reserve(layer.weights.size());
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        w.push_back(static_cast<double>(layer.weights(r, c)));
    jl["weights"] = std::move(w);
    std::vector<double> b;
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      b.push_back(static_cast<double>(layer.bias(i)));
    jl["bias"] = std::move(b);
    j["layers"].push_back(std::move(jl));
  }
  return j;
}

template <typename Scalar>
Network<Scalar> network_from_json(const nlohmann::json& j) {
  try {
    if (j.value("input_transform", "identity") != "identity")
      throw SchemaError("unknown input_transform");
    const int input_width = j.at("arch").at("input_width").get<int>();
    const std::size_t layer_count = j.at("arch").at("layer_count").get<std::size_t>();
    if (j.at("layers").size() != layer_count)
      throw SchemaError("layer count does not match architecture metadata");
    std::vector<DenseLayer<Scalar>> layers;
    for (const nlohmann::json& jl : j.at("layers")) {
      DenseLayer<Scalar> layer;
      const Eigen::Index rows = jl.at("rows").get<Eigen::Index>();
      const Eigen::Index cols = jl.at("cols").get<Eigen::Index>();
      const std::vector<double> w = jl.at("weights").get<std::vector<double>>();
      const std::vector<double> b = jl.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
          static_cast<Eigen::Index>(b.size()) != rows)
        throw SchemaError("layer weight block has wrong size");
      layer.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = Scalar(w[r * cols + c]);
      layer.bias.resize(rows);
      for (Eigen::Index i = 0; i < rows; ++i) layer.bias(i) = Scalar(b[i]);
      layer.activation = activation_from_name(jl.at("activation").get<std::string>());
      layer.leaky_slope = Scalar(jl.value("leaky_slope", 0.01));
      layers.push_back(std::move(layer));
    }
    Network<Scalar> net(input_width, std::move(layers));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad network description: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("inconsistent network description: ") + e.what());
  }
}

template <typename Scalar>
void save_weights(const Network<Scalar>& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weights file: " + path);
  out << network_to_json(net).dump() << "\n";
  if (!out) throw IoError("failed writing weights file: " + path);
}

template <typename Scalar>
Network<Scalar> load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weights file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("weights JSON: ") + e.what());
  }
  return network_from_json<Scalar>(j);
}

template <typename To, typename From>
Network<To> cast_network(const Network<From>& net) {
  std::vector<DenseLayer<To>> layers;
  for (const DenseLayer<From>& layer : net.layers()) {
    DenseLayer<To> out;
    out.weights = layer.weights.template cast<To>();
    out.bias = layer.bias.template cast<To>();
    out.activation = layer.activation;
    out.leaky_slope = To(layer.leaky_slope);
    layers.push_back(std::move(out));
  }
  return Network<To>(net.input_width(), std::move(layers));
}

}  // namespace spoofdet
