#include <cmath>

#include "doctest.h"
#include "nars/error.hpp"
#include "nars/predictor.hpp"
#include "nars/rng.hpp"

using namespace nars;

namespace {

std::vector<double> random_input(std::size_t n, Rng &rng) {
  std::vector<double> x(n);
  for (auto &v : x) v = uniform01(rng);
  return x;
}

}  // namespace

TEST_CASE("huber") {
  CHECK(huber(0.3, 0.3).loss == 0.0);
  CHECK(huber(0.3, 0.3).grad == 0.0);
  CHECK(huber(1.5, 1.0).loss == 0.125);
  CHECK(huber(0.5, 1.0).grad == -0.5);
  CHECK(huber(3.0, 1.0).loss == 1.5);
  CHECK(huber(3.0, 1.0).grad == 1.0);
  CHECK(huber(-1.0, 1.0).grad == -1.0);
}

TEST_CASE("init") {
  const auto a = PredictorNet::init(7, 5, 11);
  CHECK(a == PredictorNet::init(7, 5, 11));
  CHECK_FALSE(a == PredictorNet::init(7, 5, 12));
  CHECK(a.encoder.in == 7);
  CHECK(a.hidden.in == kEmbeddingWidth + 5);
  const double bound = std::sqrt(6.0 / 7.0);
  for (double w : a.encoder.weights) CHECK(std::abs(w) <= bound);
  for (double b : a.encoder.bias) CHECK(b == 0.0);
  CHECK(parameter_pointers(const_cast<PredictorNet &>(a)).size() == a.parameter_count());
}

TEST_CASE("forward") {
  auto z = PredictorNet::zeros(3, 2);
  z.proxy_head.bias = {0.25, -0.5};
  z.accuracy_head.bias = {0.7};
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(forward_proxy(z, std::span(x).first(3)) == std::array<double, 2>{0.25, -0.5});
  CHECK(forward_accuracy(z, x) == 0.7);
  CHECK_THROWS_AS(forward_accuracy(z, std::span(x).first(4)), ShapeError);
  CHECK_THROWS_AS(forward_proxy(z, x), ShapeError);

  // Width-1 hand-set net: relu(0.5) = 0.5 passes through identity layers.
  auto h = PredictorNet::zeros(1, 0, 1);
  h.encoder.w(0, 0) = 1;
  h.hidden.w(0, 0) = 1;
  h.accuracy_head.w(0, 0) = 2;
  h.proxy_head.w(0, 0) = 1;
  h.proxy_head.w(1, 0) = -1;
  const std::vector<double> half{0.5};
  CHECK(forward_accuracy(h, half) == 1.0);
  CHECK(forward_proxy(h, half) == std::array<double, 2>{0.5, -0.5});
  const std::vector<double> neg{-0.5};
  CHECK(forward_accuracy(h, neg) == 0.0);  // relu clips
}

TEST_CASE("gradient check") {
  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    const auto net = PredictorNet::init(9, 4, 100 + k);
    const auto x = random_input(13, rng);
    const auto g = gradient_check(net, x, forward_accuracy(net, x) + 0.3);
    CHECK(g.max_rel_error < 1e-4);
    CHECK(g.checked > 0);
  }

  const auto net = PredictorNet::init(4, 2, 1);
  const auto x = random_input(6, rng);
  const double p = forward_accuracy(net, x);
  const auto at_target = gradient_check(net, x, p);
  for (double a : at_target.analytic) CHECK(a == 0.0);
  CHECK(gradient_check(net, x, p - 1.0).at_huber_kink);
}

TEST_CASE("pretrain proxy") {
  // Affine target: flops = sum of weighted inputs.
  Rng rng(2);
  std::vector<ProxySample> pool;
  const std::vector<double> w{0.3, 0.1, 0.25, 0.05, 0.2, 0.1};
  for (int i = 0; i < 600; ++i) {
    ProxySample s;
    s.arch = random_input(6, rng);
    for (std::size_t j = 0; j < 6; ++j) s.flops += w[j] * s.arch[j];
    s.params = 0.5 * s.flops;
    pool.push_back(s);
  }
  TrainOptions opt;
  opt.epochs = 200;
  opt.seed = 3;
  auto a = PredictorNet::init(6, 2, 1);
  const auto ra = pretrain_proxy(a, pool, 0.2, opt);
  CHECK(a.pretrained);
  CHECK(ra.val_rank_correlation > 0.99);

  auto b = PredictorNet::init(6, 2, 1);
  const auto rb = pretrain_proxy(b, pool, 0.2, opt);
  CHECK(a == b);
  CHECK(ra.loss_trace == rb.loss_trace);

  std::vector<ProxySample> same(64, pool[0]);
  auto c = PredictorNet::init(6, 2, 1);
  opt.min_improvement = 0;
  opt.epochs = 400;
  CHECK(pretrain_proxy(c, same, 0.2, opt).val_mse < 1e-4);
  CHECK_THROWS_AS(pretrain_proxy(c, {}, 0.2, opt), Error);
}

TEST_CASE("finetune") {
  auto net = PredictorNet::init(5, 3, 4);
  net.pretrained = true;
  const auto encoder = net.encoder;
  Rng rng(8);
  const std::vector<AccuracySample> one{{random_input(8, rng), 0.71}};

  FinetuneOptions ft;
  ft.full_epochs = 0;
  ft.frozen_epochs = 100;
  auto frozen = net;
  finetune_accuracy(frozen, one, {}, ft);
  CHECK(frozen.encoder == encoder);

  ft = FinetuneOptions{};
  ft.frozen_epochs = ft.full_epochs = 200;
  ft.learning_rate = 1e-2;
  ft.batch_size = 1;
  auto fit = net;
  const auto r = finetune_accuracy(fit, one, {}, ft);
  CHECK(r.train_mse < 1e-6);
  CHECK(std::abs(forward_accuracy(fit, one[0].input) - 0.71) < 1e-3);

  auto again = net;
  finetune_accuracy(again, one, {}, ft);
  CHECK(again == fit);

  CHECK_THROWS_AS(finetune_accuracy(net, {}, {}, ft), Error);
}

TEST_CASE("warm start") {
  auto net = PredictorNet::init(3, 1, 4);
  const std::vector<AccuracySample> d{{{0.1, 0.2, 0.3, 1}, 0.6}, {{0.3, 0.1, 0.9, 0}, 0.8}};
  FinetuneOptions ft;
  ft.frozen_epochs = ft.full_epochs = 0;
  finetune_accuracy(net, d, {}, ft);
  CHECK(net.accuracy_head.bias[0] == doctest::Approx(0.7));
  for (double w : net.accuracy_head.weights) CHECK(w == 0.0);
}

TEST_CASE("json round trip") {
  auto net = PredictorNet::init(6, 3, 9);
  net.cost_scale = {1, 2, 3, 5};
  net.layout_fingerprint = 0xfeedbeefcafef00dULL;
  net.pretrained = true;
  CHECK(predictor_from_json(to_json(net)) == net);
  CHECK_THROWS_AS(predictor_from_json(nlohmann::json{{"arch_dim", "x"}}), ParseError);
}
