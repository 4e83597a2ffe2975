#include "nars/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "nars/error.hpp"
#include "nars/rng.hpp"
#include "nars/stats.hpp"

namespace nars {
namespace {

void affine(const DenseLayer &layer, std::span<const double> x, std::span<double> out) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    double s = layer.bias[o];
    const double *row = layer.weights.data() + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * x[i];
    out[o] = s;
  }
}

void relu(std::span<const double> z, std::span<double> out) {
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0 ? z[i] : 0.0;
}

// Activations kept for backprop. `joint` is concat(relu(z1), recipe).
struct Trace {
  std::vector<double> z1, h1, joint, z2, h2;
  double output = 0;
};

void check_input(const PredictorNet &net, std::size_t size) {
  if (size != net.input_dim()) {
    throw ShapeError("predictor input has " + std::to_string(size) + " values, expected " +
                     std::to_string(net.input_dim()));
  }
}

Trace trace_accuracy(const PredictorNet &net, std::span<const double> input) {
  check_input(net, input.size());
  Trace t;
  t.z1.resize(net.width);
  t.h1.resize(net.width);
  affine(net.encoder, input.first(net.arch_dim), t.z1);
  relu(t.z1, t.h1);
  t.joint.resize(net.width + net.recipe_dim);
  std::copy(t.h1.begin(), t.h1.end(), t.joint.begin());
  std::copy(input.begin() + static_cast<std::ptrdiff_t>(net.arch_dim), input.end(),
            t.joint.begin() + static_cast<std::ptrdiff_t>(net.width));
  t.z2.resize(net.width);
  t.h2.resize(net.width);
  affine(net.hidden, t.joint, t.z2);
  relu(t.z2, t.h2);
  double y = 0;
  affine(net.accuracy_head, t.h2, std::span<double>(&y, 1));
  t.output = y;
  return t;
}

void add_outer(DenseLayer &grad, std::span<const double> delta, std::span<const double> x, double weight) {
  for (std::size_t o = 0; o < grad.out; ++o) {
    const double d = delta[o] * weight;
    if (d == 0) continue;
    double *row = grad.weights.data() + o * grad.in;
    for (std::size_t i = 0; i < grad.in; ++i) row[i] += d * x[i];
    grad.bias[o] += d;
  }
}

void fill_uniform(DenseLayer &layer, Rng &rng) {
  if (layer.in == 0) return;
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
  for (auto &w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * limit;
}

enum LayerBit : unsigned { kEncoder = 1, kHidden = 2, kProxy = 4, kAccuracy = 8 };

std::vector<char> trainable_mask(const PredictorNet &net, unsigned layers) {
  std::vector<char> mask;
  auto push = [&](const DenseLayer &l, unsigned bit) {
    mask.insert(mask.end(), l.weights.size() + l.bias.size(), (layers & bit) ? 1 : 0);
  };
  push(net.encoder, kEncoder);
  push(net.hidden, kHidden);
  push(net.proxy_head, kProxy);
  push(net.accuracy_head, kAccuracy);
  return mask;
}

class Updater {
 public:
  Updater(std::size_t n, UpdateRule rule, double lr, double momentum)
      : rule_(rule), lr_(lr), momentum_(momentum), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double *> &params, std::vector<double *> &grads, const std::vector<char> &mask) {
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!mask[i]) continue;
      const double g = *grads[i];
      if (rule_ == UpdateRule::Momentum) {
        m_[i] = momentum_ * m_[i] - lr_ * g;
        *params[i] += m_[i];
      } else {
        m_[i] = b1 * m_[i] + (1 - b1) * g;
        v_[i] = b2 * v_[i] + (1 - b2) * g * g;
        *params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
      }
    }
  }

 private:
  UpdateRule rule_;
  double lr_;
  double momentum_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

void zero(PredictorNet &grad) {
  for (auto *l : {&grad.encoder, &grad.hidden, &grad.proxy_head, &grad.accuracy_head}) {
    std::fill(l->weights.begin(), l->weights.end(), 0.0);
    std::fill(l->bias.begin(), l->bias.end(), 0.0);
  }
}

void shuffle(std::vector<std::size_t> &idx, Rng &rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  }
}

// One pass over `order` in mini-batches; returns mean sample loss.
template <class GradFn>
double run_epoch(PredictorNet &net, PredictorNet &grad, const std::vector<std::size_t> &order,
                 std::size_t batch_size, Updater &updater, const std::vector<char> &mask, GradFn &&fn) {
  auto params = parameter_pointers(net);
  auto grads = parameter_pointers(grad);
  double total = 0;
  const std::size_t bs = std::max<std::size_t>(1, batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    zero(grad);
    const double weight = 1.0 / static_cast<double>(end - start);
    for (std::size_t k = start; k < end; ++k) total += fn(order[k], weight);
    updater.step(params, grads, mask);
  }
  return total / static_cast<double>(order.size());
}

double safe_spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2) return 0;
  try {
    return spearman(a, b);
  } catch (const UndefinedResultError &) {
    return 0;
  }
}

}  // namespace

PredictorNet PredictorNet::zeros(std::size_t arch_dim, std::size_t recipe_dim, std::size_t width) {
  if (arch_dim + recipe_dim == 0 || width == 0) throw ShapeError("predictor needs a non-empty input and width");
  PredictorNet net;
  net.arch_dim = arch_dim;
  net.recipe_dim = recipe_dim;
  net.width = width;
  net.encoder = DenseLayer(arch_dim, width);
  net.hidden = DenseLayer(width + recipe_dim, width);
  net.proxy_head = DenseLayer(width, 2);
  net.accuracy_head = DenseLayer(width, 1);
  return net;
}

PredictorNet PredictorNet::init(std::size_t arch_dim, std::size_t recipe_dim, std::uint64_t seed,
                                std::size_t width) {
  PredictorNet net = zeros(arch_dim, recipe_dim, width);
  Rng rng(derive_seed(seed, 0x1417));
  fill_uniform(net.encoder, rng);
  fill_uniform(net.hidden, rng);
  fill_uniform(net.proxy_head, rng);
  fill_uniform(net.accuracy_head, rng);
  return net;
}

std::size_t PredictorNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto *l : {&encoder, &hidden, &proxy_head, &accuracy_head}) n += l->weights.size() + l->bias.size();
  return n;
}

std::vector<double *> parameter_pointers(PredictorNet &net) {
  std::vector<double *> out;
  out.reserve(net.parameter_count());
  for (auto *l : {&net.encoder, &net.hidden, &net.proxy_head, &net.accuracy_head}) {
    for (auto &w : l->weights) out.push_back(&w);
    for (auto &b : l->bias) out.push_back(&b);
  }
  return out;
}

std::array<double, 2> forward_proxy(const PredictorNet &net, std::span<const double> arch) {
  if (arch.size() != net.arch_dim) {
    throw ShapeError("proxy input has " + std::to_string(arch.size()) + " values, expected " +
                     std::to_string(net.arch_dim));
  }
  std::vector<double> z(net.width), h(net.width);
  affine(net.encoder, arch, z);
  relu(z, h);
  std::array<double, 2> out{};
  affine(net.proxy_head, h, out);
  return out;
}

double forward_accuracy(const PredictorNet &net, std::span<const double> input) {
  return trace_accuracy(net, input).output;
}

HuberResult huber(double pred, double target) {
  const double r = pred - target;
  if (std::abs(r) < 1.0) return {0.5 * r * r, r};
  return {std::abs(r) - 0.5, r > 0 ? 1.0 : -1.0};
}

double accumulate_accuracy_gradient(const PredictorNet &net, std::span<const double> input, double target,
                                    double weight, PredictorNet &grad) {
  const Trace t = trace_accuracy(net, input);
  const auto [loss, dy] = huber(t.output, target);
  if (dy == 0) return loss;
  add_outer(grad.accuracy_head, std::span<const double>(&dy, 1), t.h2, weight);

  std::vector<double> dz2(net.width);
  for (std::size_t o = 0; o < net.width; ++o) dz2[o] = t.z2[o] > 0 ? dy * net.accuracy_head.weights[o] : 0.0;
  add_outer(grad.hidden, dz2, t.joint, weight);

  std::vector<double> dz1(net.width, 0.0);
  for (std::size_t o = 0; o < net.width; ++o) {
    if (dz2[o] == 0) continue;
    const double *row = net.hidden.weights.data() + o * net.hidden.in;
    for (std::size_t i = 0; i < net.width; ++i) dz1[i] += dz2[o] * row[i];
  }
  for (std::size_t i = 0; i < net.width; ++i) {
    if (t.z1[i] <= 0) dz1[i] = 0;
  }
  add_outer(grad.encoder, dz1, input.first(net.arch_dim), weight);
  return loss;
}

double accumulate_proxy_gradient(const PredictorNet &net, std::span<const double> arch,
                                 std::array<double, 2> target, double weight, PredictorNet &grad) {
  if (arch.size() != net.arch_dim) throw ShapeError("proxy input size mismatch");
  std::vector<double> z(net.width), h(net.width);
  affine(net.encoder, arch, z);
  relu(z, h);
  std::array<double, 2> out{};
  affine(net.proxy_head, h, out);
  const auto a = huber(out[0], target[0]);
  const auto b = huber(out[1], target[1]);
  const std::array<double, 2> dy{a.grad, b.grad};
  add_outer(grad.proxy_head, dy, h, weight);
  std::vector<double> dz(net.width, 0.0);
  for (std::size_t i = 0; i < net.width; ++i) {
    if (z[i] <= 0) continue;
    dz[i] = dy[0] * net.proxy_head.w(0, i) + dy[1] * net.proxy_head.w(1, i);
  }
  add_outer(grad.encoder, dz, arch, weight);
  return a.loss + b.loss;
}

FitReport pretrain_proxy(PredictorNet &net, std::span<const ProxySample> pool, double validation_fraction,
                         const TrainOptions &options) {
  if (pool.empty()) throw Error("pretrain_proxy: empty pool");
  if (net.arch_dim == 0) throw ShapeError("pretrain_proxy: net has no architecture inputs");
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng split_rng(derive_seed(options.seed, 1));
  shuffle(idx, split_rng);
  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(pool.size()) * (1.0 - validation_fraction)));
  n_train = std::clamp<std::size_t>(n_train, 1, pool.size());
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  if (val.empty()) val = train;

  auto evaluate = [&](const std::vector<std::size_t> &set, double *rank) {
    std::vector<double> pred_f, true_f;
    double se = 0;
    for (auto i : set) {
      const auto p = forward_proxy(net, pool[i].arch);
      se += (p[0] - pool[i].flops) * (p[0] - pool[i].flops) + (p[1] - pool[i].params) * (p[1] - pool[i].params);
      pred_f.push_back(p[0]);
      true_f.push_back(pool[i].flops);
    }
    if (rank) *rank = safe_spearman(pred_f, true_f);
    return se / (2.0 * static_cast<double>(set.size()));
  };

  PredictorNet grad = PredictorNet::zeros(net.arch_dim, net.recipe_dim, net.width);
  const auto mask = trainable_mask(net, kEncoder | kProxy);
  Updater updater(net.parameter_count(), options.rule, options.learning_rate, options.momentum);
  Rng order_rng(derive_seed(options.seed, 2));
  FitReport report;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle(train, order_rng);
    report.loss_trace.push_back(run_epoch(net, grad, train, options.batch_size, updater, mask,
                                          [&](std::size_t i, double w) {
                                            return accumulate_proxy_gradient(
                                                net, pool[i].arch, {pool[i].flops, pool[i].params}, w, grad);
                                          }));
    ++report.epochs_run;
    if (options.min_improvement > 0) {
      const double v = evaluate(val, nullptr);
      if (v < best - options.min_improvement) {
        best = v;
        since_best = 0;
      } else if (++since_best >= options.patience) {
        break;
      }
    }
  }
  report.train_mse = evaluate(train, nullptr);
  report.val_mse = evaluate(val, &report.val_rank_correlation);
  net.pretrained = true;
  return report;
}

FitReport finetune_accuracy(PredictorNet &net, std::span<const AccuracySample> train,
                            std::span<const AccuracySample> validation, const FinetuneOptions &options) {
  if (train.empty()) throw Error("finetune_accuracy: empty dataset");
  for (const auto &s : train) check_input(net, s.input.size());
  const bool freeze = options.freeze_encoder < 0 ? net.pretrained : options.freeze_encoder != 0;

  // Targets are standardized over the training set while fitting; the
  // accuracy head is converted to standardized units and folded back after.
  double mean = 0;
  for (const auto &s : train) mean += s.accuracy;
  mean /= static_cast<double>(train.size());
  double mu = 0, sigma = 1;
  if (options.standardize_labels) {
    mu = mean;
    double var = 0;
    for (const auto &s : train) var += (s.accuracy - mu) * (s.accuracy - mu);
    var /= static_cast<double>(train.size());
    if (var > 1e-24) sigma = std::sqrt(var);
  }
  auto &head = net.accuracy_head;
  if (options.warm_start_bias) {
    std::fill(head.weights.begin(), head.weights.end(), 0.0);
    head.bias[0] = options.standardize_labels ? 0.0 : mean;
  } else if (options.standardize_labels) {
    for (auto &w : head.weights) w /= sigma;
    head.bias[0] = (head.bias[0] - mu) / sigma;
  }
  std::vector<double> target(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) target[i] = (train[i].accuracy - mu) / sigma;

  PredictorNet grad = PredictorNet::zeros(net.arch_dim, net.recipe_dim, net.width);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  FitReport report;
  auto grad_fn = [&](std::size_t i, double w) {
    return accumulate_accuracy_gradient(net, train[i].input, target[i], w, grad);
  };

  struct Phase {
    std::size_t epochs;
    double lr;
    unsigned layers;
  };
  const Phase phases[] = {
      {options.frozen_epochs, options.learning_rate, freeze ? (kHidden | kAccuracy) : (kEncoder | kHidden | kAccuracy)},
      {options.full_epochs, options.learning_rate * options.phase2_factor, kEncoder | kHidden | kAccuracy},
  };
  for (std::size_t p = 0; p < 2; ++p) {
    const auto &phase = phases[p];
    const auto mask = trainable_mask(net, phase.layers);
    Updater updater(net.parameter_count(), options.rule, phase.lr, options.momentum);
    Rng rng(derive_seed(options.seed, 10 + p));
    for (std::size_t e = 0; e < phase.epochs; ++e) {
      shuffle(order, rng);
      report.loss_trace.push_back(run_epoch(net, grad, order, options.batch_size, updater, mask, grad_fn));
      ++report.epochs_run;
    }
  }
  for (auto &w : head.weights) w *= sigma;
  head.bias[0] = head.bias[0] * sigma + mu;

  auto metrics = [&](std::span<const AccuracySample> set, double *rank) {
    std::vector<double> pred, truth;
    for (const auto &s : set) {
      pred.push_back(forward_accuracy(net, s.input));
      truth.push_back(s.accuracy);
    }
    if (rank) *rank = safe_spearman(pred, truth);
    return mean_squared_error(pred, truth);
  };
  report.train_mse = metrics(train, nullptr);
  if (validation.empty()) {
    report.val_mse = metrics(train, &report.val_rank_correlation);
  } else {
    report.val_mse = metrics(validation, &report.val_rank_correlation);
  }
  return report;
}

GradientCheck gradient_check(const PredictorNet &net, std::span<const double> input, double target, double h) {
  GradientCheck out;
  const double pred = forward_accuracy(net, input);
  const double r = std::abs(pred - target);
  if (r > 1.0 - 1e-4 && r < 1.0 + 1e-4) {
    out.at_huber_kink = true;
    return out;
  }
  PredictorNet grad = PredictorNet::zeros(net.arch_dim, net.recipe_dim, net.width);
  accumulate_accuracy_gradient(net, input, target, 1.0, grad);
  auto gptr = parameter_pointers(grad);
  out.analytic.reserve(gptr.size());
  for (auto *g : gptr) out.analytic.push_back(*g);

  auto pattern = [&](const PredictorNet &n) {
    const Trace t = trace_accuracy(n, input);
    std::vector<char> bits;
    for (double z : t.z1) bits.push_back(z > 0);
    for (double z : t.z2) bits.push_back(z > 0);
    bits.push_back(std::abs(t.output - target) < 1.0);
    return bits;
  };
  const auto base_pattern = pattern(net);

  PredictorNet probe = net;
  auto params = parameter_pointers(probe);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + h;
    const double up = huber(forward_accuracy(probe, input), target).loss;
    const bool up_same = pattern(probe) == base_pattern;
    *params[i] = saved - h;
    const double down = huber(forward_accuracy(probe, input), target).loss;
    const bool down_same = pattern(probe) == base_pattern;
    *params[i] = saved;
    if (!up_same || !down_same) {
      ++out.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = out.analytic[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.checked;
  }
  return out;
}

namespace {

nlohmann::json layer_json(const DenseLayer &l) {
  return {{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}};
}

DenseLayer layer_from(const nlohmann::json &j) {
  DenseLayer l;
  l.in = j.at("in").get<std::size_t>();
  l.out = j.at("out").get<std::size_t>();
  l.weights = j.at("weights").get<std::vector<double>>();
  l.bias = j.at("bias").get<std::vector<double>>();
  if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) throw ShapeError("layer shape mismatch");
  return l;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

nlohmann::json to_json(const PredictorNet &net) {
  return {{"format", "nars-predictor"},
          {"version", 1},
          {"arch_dim", net.arch_dim},
          {"recipe_dim", net.recipe_dim},
          {"width", net.width},
          {"layout_fingerprint", hex64(net.layout_fingerprint)},
          {"pretrained", net.pretrained},
          {"cost_scale",
           {{"flops_min", net.cost_scale.flops_min},
            {"flops_max", net.cost_scale.flops_max},
            {"params_min", net.cost_scale.params_min},
            {"params_max", net.cost_scale.params_max}}},
          {"encoder", layer_json(net.encoder)},
          {"hidden", layer_json(net.hidden)},
          {"proxy_head", layer_json(net.proxy_head)},
          {"accuracy_head", layer_json(net.accuracy_head)}};
}

PredictorNet predictor_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format").get<std::string>() != "nars-predictor") throw ParseError("not a predictor checkpoint");
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported predictor checkpoint version");
    PredictorNet net;
    net.arch_dim = j.at("arch_dim").get<std::size_t>();
    net.recipe_dim = j.at("recipe_dim").get<std::size_t>();
    net.width = j.at("width").get<std::size_t>();
    net.layout_fingerprint = std::stoull(j.at("layout_fingerprint").get<std::string>(), nullptr, 16);
    net.pretrained = j.at("pretrained").get<bool>();
    const auto &cs = j.at("cost_scale");
    net.cost_scale = {cs.at("flops_min").get<double>(), cs.at("flops_max").get<double>(),
                      cs.at("params_min").get<double>(), cs.at("params_max").get<double>()};
    net.encoder = layer_from(j.at("encoder"));
    net.hidden = layer_from(j.at("hidden"));
    net.proxy_head = layer_from(j.at("proxy_head"));
    net.accuracy_head = layer_from(j.at("accuracy_head"));
    if (net.encoder.in != net.arch_dim || net.encoder.out != net.width ||
        net.hidden.in != net.width + net.recipe_dim || net.hidden.out != net.width ||
        net.proxy_head.in != net.width || net.proxy_head.out != 2 || net.accuracy_head.in != net.width ||
        net.accuracy_head.out != 1) {
      throw ShapeError("predictor checkpoint layer shapes are inconsistent");
    }
    return net;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("malformed predictor checkpoint: ") + e.what());
  }
}

void save_predictor(const PredictorNet &net, const std::string &path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << to_json(net).dump() << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move checkpoint into '" + path + "'");
}

PredictorNet load_predictor(const std::string &path, std::uint64_t expected_fingerprint) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictor checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("malformed predictor checkpoint: ") + e.what());
  }
  PredictorNet net = predictor_from_json(j);
  if (net.layout_fingerprint != expected_fingerprint) {
    throw Error("predictor checkpoint was trained for a different encoding layout (fingerprint " +
                hex64(net.layout_fingerprint) + ", expected " + hex64(expected_fingerprint) + ")");
  }
  return net;
}

}  // namespace nars
