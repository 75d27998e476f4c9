#include "core/neuralnet.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

using namespace spoofdet;

namespace {

// 2-1 network with hand-picked weights for closed-form forward checks.
Network<double> hand_net(double slope = 0.01) {
  DenseLayer<double> h;
  h.weights.resize(2, 2);
  h.weights << 1.0, -1.0, 0.5, 0.5;
  h.bias.resize(2);
  h.bias << 0.0, -1.0;
  h.activation = Activation::LeakyRelu;
  h.leaky_slope = slope;
  DenseLayer<double> out;
  out.weights.resize(1, 2);
  out.weights << 2.0, -3.0;
  out.bias.resize(1);
  out.bias << 0.25;
  out.activation = Activation::Linear;
  return Network<double>(2, {h, out});
}

}  // namespace

TEST_CASE("forward matches a hand computation") {
  auto net = hand_net();
  Eigen::VectorXd x(2);
  x << 2.0, 1.0;
  // Hidden pre-activations: [2-1, 1+1-1] = [1, 0.5]; both positive, so
  // activations pass through. Output: 2*1 - 3*0.5 + 0.25 = 0.75.
  CHECK(net.forward(x) == doctest::Approx(0.75).epsilon(1e-15));

  x << -1.0, 0.0;
  // Pre-activations: [-1, -1.5]; leaky side: [-0.01, -0.015].
  // Output: 2*(-0.01) - 3*(-0.015) + 0.25 = 0.275.
  CHECK(net.forward(x) == doctest::Approx(0.275).epsilon(1e-12));

  Eigen::VectorXd wrong(3);
  wrong.setZero();
  CHECK_THROWS_AS(net.forward(wrong), std::invalid_argument);
}

TEST_CASE("forward_batch equals per-row forward") {
  auto net = make_mlp<double>(4, {5, 3}, 0.01, 77);
  Rng rng = make_rng(5);
  std::normal_distribution<double> n(0.0, 2.0);
  Eigen::MatrixXd x(9, 4);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 4; ++c) x(r, c) = n(rng);
  Eigen::VectorXd batch = net.forward_batch(x);
  REQUIRE(batch.size() == 9);
  for (int r = 0; r < 9; ++r)
    CHECK(batch(r) == doctest::Approx(net.forward(x.row(r).transpose())).epsilon(1e-12));
}

TEST_CASE("bce_from_logit values and stability") {
  // z = 0: loss = log 2 for either label.
  CHECK(bce_from_logit(0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_from_logit(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Correct confident prediction: loss ~ log(1 + e^-5).
  CHECK(bce_from_logit(5.0, 1.0) == doctest::Approx(std::log1p(std::exp(-5.0))).epsilon(1e-12));
  // Wrong confident prediction: loss ~ 5 + log(1 + e^-5).
  CHECK(bce_from_logit(-5.0, 1.0) ==
        doctest::Approx(5.0 + std::log1p(std::exp(-5.0))).epsilon(1e-12));
  // Extreme logits must not overflow to inf/nan.
  CHECK(std::isfinite(bce_from_logit(1e4, 0.0)));
  CHECK(std::isfinite(bce_from_logit(-1e4, 1.0)));
  CHECK(bce_from_logit(1e4, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("l1 penalty covers weights but not biases") {
  auto net = hand_net();
  // |1| + |-1| + |0.5| + |0.5| + |2| + |-3| = 8; biases (0, -1, 0.25) excluded.
  CHECK(l1_penalty(net) == doctest::Approx(8.0).epsilon(1e-15));

  Eigen::VectorXd logits(2), labels(2);
  logits << 0.0, 0.0;
  labels << 1.0, 0.0;
  CHECK(bce_l1_loss<double>(logits, labels, net, 0.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_l1_loss<double>(logits, labels, net, 0.5) ==
        doctest::Approx(std::log(2.0) + 4.0).epsilon(1e-14));
  Eigen::VectorXd short_labels(1);
  short_labels << 1.0;
  CHECK_THROWS_AS(bce_l1_loss<double>(logits, short_labels, net, 0.0), std::invalid_argument);
}

// Smallest |pre-activation| anywhere in the forward pass; inputs that put a
// unit close to the leaky-ReLU kink would invalidate a finite-difference
// comparison and get resampled.
static double min_abs_preactivation(const Network<double>& net, const Eigen::MatrixXd& x) {
  double m = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd a = x;
  for (const DenseLayer<double>& layer : net.layers()) {
    Eigen::MatrixXd z = (a * layer.weights.transpose()).rowwise() + layer.bias.transpose();
    m = std::min(m, z.cwiseAbs().minCoeff());
    a = Network<double>::apply_activation(layer, std::move(z));
  }
  return m;
}

TEST_CASE("backward matches central finite differences") {
  Rng rng = make_rng(123);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> w(1, 4);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const int in = w(rng);
    std::vector<int> hidden;
    const int depth = w(rng) % 3 + 1;
    for (int i = 0; i < depth; ++i) hidden.push_back(w(rng));
    auto net = make_mlp<double>(in, hidden, 0.01, 1000 + rep);
    const int batch = w(rng);
    Eigen::MatrixXd x(batch, in);
    Eigen::VectorXd y(batch);
    do {
      for (int r = 0; r < batch; ++r) {
        for (int c = 0; c < in; ++c) x(r, c) = n(rng);
        y(r) = coin(rng);
      }
    } while (min_abs_preactivation(net, x) < 1e-4);
    const double lambda = (rep % 2 == 0) ? 0.0 : 1e-3;
    Gradients<double> g = backward(net, x, y, lambda);

    auto loss_at = [&]() {
      return static_cast<double>(bce_l1_loss<double>(net.forward_batch(x), y, net, lambda));
    };
    const double eps = 1e-6;
    double num_norm = 0.0, diff_norm = 0.0;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto check_param = [&](auto& param, const auto& grad) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
          const double orig = param(i);
          // Skip the l1 kink: the analytic subgradient at w = 0 is 0.
          if (lambda > 0.0 && std::abs(orig) < 10 * eps) continue;
          param(i) = orig + eps;
          const double up = loss_at();
          param(i) = orig - eps;
          const double down = loss_at();
          param(i) = orig;
          const double numeric = (up - down) / (2.0 * eps);
          num_norm += numeric * numeric;
          const double d = numeric - grad(i);
          diff_norm += d * d;
        }
      };
      check_param(net.layers()[l].weights, g.weights[l]);
      check_param(net.layers()[l].bias, g.bias[l]);
    }
    const double rel = std::sqrt(diff_norm) / std::max(std::sqrt(num_norm), 1e-12);
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("training separates a linearly separable toy set") {
  Rng rng = make_rng(31);
  std::normal_distribution<double> n(0.0, 0.3);
  auto sample = [&](int count, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    x.resize(count, 2);
    y.resize(count);
    for (int i = 0; i < count; ++i) {
      const int label = i % 2;
      const double cx = label == 1 ? 1.5 : -1.5;
      x(i, 0) = cx + n(rng);
      x(i, 1) = n(rng);
      y(i) = label;
    }
  };
  Eigen::MatrixXd xt, xv;
  Eigen::VectorXd yt, yv;
  sample(200, xt, yt);
  sample(100, xv, yv);

  auto net = make_mlp<double>(2, {8, 8}, 0.01, 9);
  TrainConfig<double> cfg;
  cfg.max_epochs = 120;
  cfg.batch_size = 32;
  cfg.learning_rate = 5e-3;
  cfg.l1_coefficient = 0.0;
  cfg.seed = 4;
  TrainReport report = train(net, xt, yt, xv, yv, cfg);
  CHECK(classification_accuracy<double>(net.forward_batch(xv), yv) >= 0.99);
  CHECK(report.best_epoch >= 0);
  CHECK(report.best_epoch <= report.stopped_epoch);
  // Restored weights attain the minimum recorded validation loss.
  double best = report.val_loss[0];
  for (double v : report.val_loss) best = std::min(best, v);
  CHECK(report.val_loss[report.best_epoch] == doctest::Approx(best).epsilon(1e-12));
  const double restored =
      static_cast<double>(bce_l1_loss<double>(net.forward_batch(xv), yv, net, cfg.l1_coefficient));
  CHECK(restored == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("training config validation and zero-epoch no-op") {
  auto net = make_mlp<double>(2, {3}, 0.01, 1);
  auto before = network_to_json(net);
  Eigen::MatrixXd x(4, 2);
  x.setOnes();
  Eigen::VectorXd y(4);
  y << 0, 1, 0, 1;
  TrainConfig<double> cfg;
  cfg.max_epochs = 0;
  TrainReport report = train(net, x, y, x, y, cfg);
  CHECK(network_to_json(net) == before);
  CHECK(report.train_loss.empty());
  CHECK(report.best_epoch == -1);

  cfg.max_epochs = 1;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train(net, x, y, x, y, cfg), std::invalid_argument);
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(net, x, y, x, y, cfg), std::invalid_argument);
  cfg.batch_size = 2;
  Eigen::MatrixXd empty(0, 2);
  Eigen::VectorXd none(0);
  CHECK_THROWS_AS(train(net, empty, none, x, y, cfg), std::invalid_argument);
}

TEST_CASE("training is deterministic for a fixed seed") {
  Rng rng = make_rng(55);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(64, 3);
  Eigen::VectorXd y(64);
  for (int i = 0; i < 64; ++i) {
    for (int c = 0; c < 3; ++c) x(i, c) = n(rng);
    y(i) = (x(i, 0) + x(i, 1) > 0.0) ? 1.0 : 0.0;
  }
  auto run = [&]() {
    auto net = make_mlp<float>(3, {6}, 0.01f, 2);
    TrainConfig<float> cfg;
    cfg.max_epochs = 10;
    cfg.seed = 13;
    train(net, x.cast<float>(), y.cast<float>(), x.cast<float>(), y.cast<float>(), cfg);
    return network_to_json(net);
  };
  CHECK(run() == run());
}

TEST_CASE("network JSON round trip and error handling") {
  auto net = make_mlp<double>(3, {4, 2}, 0.02, 17);
  const std::string path = "test_net_roundtrip.json";
  save_weights(net, path);
  auto loaded = load_weights<double>(path);
  CHECK(network_to_json(loaded) == network_to_json(net));
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_weights<double>("no_such_weights.json"), IoError);
  std::ofstream("test_net_bad.json") << "{oops";
  CHECK_THROWS_AS(load_weights<double>("test_net_bad.json"), ParseError);
  std::filesystem::remove("test_net_bad.json");

  nlohmann::json j = network_to_json(net);
  j["layers"][0]["weights"].erase(0);
  CHECK_THROWS_AS(network_from_json<double>(j), SchemaError);
  j = network_to_json(net);
  j["arch"]["layer_count"] = 7;
  CHECK_THROWS_AS(network_from_json<double>(j), SchemaError);
  j = network_to_json(net);
  j["layers"][2]["activation"] = "leaky_relu";  // output must stay linear
  CHECK_THROWS_AS(network_from_json<double>(j), SchemaError);
}

TEST_CASE("scalar cast preserves the function") {
  auto net = make_mlp<float>(3, {5}, 0.01f, 8);
  auto dbl = cast_network<double>(net);
  Eigen::VectorXf x(3);
  x << 0.3f, -1.2f, 2.0f;
  CHECK(static_cast<double>(net.forward(x)) ==
        doctest::Approx(dbl.forward(x.cast<double>())).epsilon(1e-5));
}
