#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include <unistd.h>

#include "doctest.h"
#include "early_stop_curves.hpp"
#include "helpers.hpp"
#include "nars/error.hpp"
#include "nars/search_engine.hpp"
#include "nars/stats.hpp"
#include "nars/synthetic_oracle.hpp"

using namespace nars;

namespace {

// Replays a fixed list of raw draws, cycling.
struct StubGen {
  using result_type = std::uint64_t;
  std::vector<std::uint64_t> draws;
  std::size_t next = 0;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return draws[next++ % draws.size()]; }
};

constexpr std::uint64_t kLow = 0;                   // uniform01 -> 0
constexpr std::uint64_t kHigh = ~std::uint64_t{0};  // uniform01 -> ~1

std::vector<PoolEntry> pool_with_flops(const std::vector<std::uint64_t> &flops) {
  std::vector<PoolEntry> pool(flops.size());
  for (std::size_t i = 0; i < flops.size(); ++i) {
    pool[i].cost.flops = flops[i];
    pool[i].encoded.values = {static_cast<double>(i)};
  }
  return pool;
}

struct Counting : Evaluator {
  const SearchSpace &space;
  explicit Counting(const SearchSpace &s) : space(s) {}
  std::vector<EvalResult> run(std::span<const EvalRequest> reqs) override {
    std::vector<EvalResult> out;
    for (const auto &r : reqs) out.push_back(synthetic_oracle(r.candidate, space, r.epoch_budget, r.seed, r.id));
    return out;
  }
};

PipelineConfig small_pipeline(std::uint64_t seed) {
  PipelineConfig p;
  p.seed = seed;
  p.stage2.pool_size = 600;
  p.stage2.batch = 8;
  p.stage2.iterations = 3;
  p.stage2.full_budget = 12;
  p.stage2.finetune.frozen_epochs = p.stage2.finetune.full_epochs = 20;
  p.pretrain.train.epochs = 20;
  p.stage3.max_generations = 10;
  p.constraint_sets.push_back({"open", {}});
  return p;
}

}  // namespace

TEST_CASE("spearman") {
  const std::vector<double> a{1, 2, 3}, b{10, 20, 30}, c{3, 2, 1};
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  CHECK(spearman(a, c) == doctest::Approx(-1.0));
  const std::vector<double> x{1, 2, 2, 4}, y{1, 3, 2, 4};
  CHECK(average_ranks(x) == std::vector<double>{1, 2.5, 2.5, 4});
  // Pearson on average ranks: cov 4.5, variances 4.5 and 5.
  CHECK(spearman(x, y) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
  const std::vector<double> flat{1, 1, 1};
  CHECK_THROWS_AS(spearman(a, flat), UndefinedResultError);
  CHECK_THROWS_AS(spearman(a, x), ShapeError);
}

TEST_CASE("early stop") {
  std::vector<std::vector<double>> same{{0.1, 0.2, 0.3}, {0.2, 0.3, 0.4}, {0.3, 0.4, 0.5}};
  auto es = determine_early_stop(same, 0.92);
  CHECK(es.epoch == 1);
  CHECK(es.reached);

  for (int crossing : {3, 7, 12}) {
    const auto fam = oracle::make_crossing_family(crossing, 20, 12, 0.92, 40 + crossing);
    CHECK(determine_early_stop(fam.curves, 0.92).epoch == crossing);
  }

  std::vector<std::vector<double>> noisy{{0.3, 0.2, 0.5}, {0.1, 0.4, 0.3}, {0.2, 0.3, 0.4}};
  es = determine_early_stop(noisy, 1.0 + 1e-9);
  CHECK_FALSE(es.reached);
  CHECK(es.epoch == 3);

  std::vector<std::vector<double>> tied{{0.1, 0.5}, {0.2, 0.5}};
  CHECK_THROWS_AS(determine_early_stop(tied, 0.9), UndefinedResultError);
  CHECK_THROWS_AS(determine_early_stop(std::vector<std::vector<double>>{{0.1}}, 0.9), ShapeError);
}

TEST_CASE("bin selection") {
  auto pool = pool_with_flops({100, 100});
  std::vector<char> evaluated(2, 0);
  CHECK(select_by_bins(pool, std::vector<double>{0.3, 0.7}, evaluated, 1, 0, 200).indices ==
        std::vector<std::size_t>{1});

  // Everything in one bin: backfill returns the brute-force top 4.
  pool = pool_with_flops(std::vector<std::uint64_t>(10, 50));
  std::vector<double> scores{0.2, 0.9, 0.1, 0.5, 0.7, 0.3, 0.8, 0.05, 0.6, 0.4};
  evaluated.assign(10, 0);
  auto sel = select_by_bins(pool, scores, evaluated, 4, 0, 400);
  std::vector<std::size_t> order(10);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] > scores[j]; });
  std::sort(sel.indices.begin(), sel.indices.end());
  std::vector<std::size_t> top4(order.begin(), order.begin() + 4);
  std::sort(top4.begin(), top4.end());
  CHECK(sel.indices == top4);

  evaluated[1] = evaluated[6] = 1;
  sel = select_by_bins(pool, scores, evaluated, 10, 0, 400);
  CHECK(sel.exhausted);
  CHECK(sel.indices.size() == 8);
  for (auto i : sel.indices) CHECK(!evaluated[i]);

  // Spread over bins: one per bin first.
  pool = pool_with_flops({10, 20, 110, 120});
  evaluated.assign(4, 0);
  sel = select_by_bins(pool, std::vector<double>{0.9, 0.8, 0.1, 0.2}, evaluated, 2, 0, 200);
  std::sort(sel.indices.begin(), sel.indices.end());
  CHECK(sel.indices == std::vector<std::size_t>{0, 3});
}

TEST_CASE("random selection") {
  std::vector<char> evaluated(30, 0);
  evaluated[3] = evaluated[4] = 1;
  Rng rng(1);
  const auto sel = select_random(evaluated, 10, rng);
  CHECK(sel.indices.size() == 10);
  std::set<std::size_t> uniq(sel.indices.begin(), sel.indices.end());
  CHECK(uniq.size() == 10);
  CHECK_FALSE(uniq.count(3));
  CHECK_FALSE(uniq.count(4));
}

TEST_CASE("mutation") {
  const auto &s = testutil::toy();
  const Genotype g(s.params().size(), 0);
  StubGen never{{kHigh}};
  CHECK(mutate(s, g, 0.1, never) == g);

  StubGen always{{kLow}};
  const auto up = mutate(s, g, 1.0, always);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto n = s.params()[i].grid.size();
    if (n < 2) {
      CHECK(up[i] == 0);
    } else {
      CHECK(up[i] == 1);  // lower bound: up one step, or the other choice
    }
  }
  // A downward step off the lower end reflects upward.
  const auto res = testutil::param_index(s, ParamRole::Resolution);
  StubGen down{{kLow, kHigh}};
  Genotype one(g.size(), 0);
  const auto m = mutate(s, one, 1.0, down);
  CHECK(m[res] == 1);

  std::size_t d = 0;
  for (const auto &p : s.params()) d += p.grid.size() >= 2;
  Rng rng(4);
  double total = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto c = mutate(s, g, 0.1, rng);
    for (std::size_t k = 0; k < g.size(); ++k) total += c[k] != g[k];
  }
  const double mean = total / n;
  const double sigma = std::sqrt(static_cast<double>(d) * 0.1 * 0.9 / n);
  CHECK(std::abs(mean - 0.1 * static_cast<double>(d)) < 3 * sigma);
}

TEST_CASE("pool") {
  const auto &s = testutil::joint();
  const auto a = build_pool(s, 500, 3);
  const auto b = build_pool(s, 500, 3);
  CHECK(pool_hash(a) == pool_hash(b));
  std::set<Genotype> uniq;
  for (const auto &e : a) uniq.insert(e.genes);
  CHECK(uniq.size() == a.size());

  const FlopWindow w{400'000'000, 800'000'000};
  const auto windowed = build_pool(s, 2000, 3, w);
  CHECK_FALSE(windowed.empty());
  for (const auto &e : windowed) CHECK(w.contains(e.cost.flops));
}

TEST_CASE("stage 2 loop") {
  const auto &s = testutil::toy();
  auto pool = build_pool(s, 300, 1);
  auto state = stage2_init(pool, PredictorNet::init(s.layout().arch_dim, s.layout().recipe_dim, 2), 5);
  Stage2Config cfg;
  cfg.iterations = 1;
  cfg.batch = 2;
  cfg.full_budget = 10;
  cfg.finetune.frozen_epochs = cfg.finetune.full_epochs = 5;
  Counting ev(s);
  stage2_run(s, ev, state, cfg);
  CHECK(state.dataset.size() == 2);
  CHECK(state.iteration == 1);
  CHECK(ev.calls() == 2);
  CHECK_FALSE(state.predictor == state.base);
}

TEST_CASE("stage 2 flop window") {
  const auto &s = testutil::joint();
  Stage2Config cfg;
  cfg.flop_window = FlopWindow{400'000'000, 800'000'000};
  cfg.iterations = 2;
  cfg.batch = 6;
  cfg.full_budget = 8;
  cfg.finetune.frozen_epochs = cfg.finetune.full_epochs = 5;
  auto state = stage2_init(build_pool(s, 800, 2, cfg.flop_window),
                           PredictorNet::init(s.layout().arch_dim, s.layout().recipe_dim, 2), 5);
  Counting ev(s);
  stage2_run(s, ev, state, cfg);
  CHECK(state.dataset.size() == 12);
  for (const auto &d : state.dataset) CHECK(cfg.flop_window->contains(d.cost.flops));
}

TEST_CASE("checkpoint resume") {
  const auto &s = testutil::toy();
  const auto dir = std::filesystem::temp_directory_path() / ("nars_resume_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const auto ckpt = (dir / "state.json").string();

  Stage2Config cfg;
  cfg.iterations = 3;
  cfg.batch = 6;
  cfg.full_budget = 10;
  cfg.finetune.frozen_epochs = cfg.finetune.full_epochs = 10;
  const auto base = PredictorNet::init(s.layout().arch_dim, s.layout().recipe_dim, 2);
  const auto pool = build_pool(s, 300, 1);

  auto whole = stage2_init(pool, base, 5);
  Counting ev(s);
  stage2_run(s, ev, whole, cfg);

  auto part = stage2_init(pool, base, 5);
  Stage2Options opt;
  opt.checkpoint_path = ckpt;
  opt.stop_after = 1;
  stage2_run(s, ev, part, cfg, opt);
  CHECK(part.iteration == 1);
  auto resumed = load_search_state(ckpt, s);
  stage2_run(s, ev, resumed, cfg, opt = Stage2Options{ckpt, -1, 0, {}});

  CHECK(to_json(resumed, s).dump() == to_json(whole, s).dump());
  std::filesystem::remove_all(dir);
}

TEST_CASE("stage 3") {
  const auto &s = testutil::toy();

  // Constant predictor: nothing improves after the first generation.
  auto flat = PredictorNet::zeros(s.layout().arch_dim, s.layout().recipe_dim);
  flat.accuracy_head.bias = {0.5};
  Stage3Config cfg;
  auto r = stage3_evolve(s, flat, {}, cfg, 1);
  CHECK(r.generations == 1);
  CHECK(r.converged);

  // Monotone best score, constraints respected.
  const auto net = PredictorNet::init(s.layout().arch_dim, s.layout().recipe_dim, 7);
  const auto ref = cost_totals(sample_uniform(s, 0).arch);
  cfg.constraints = {"f", {{Metric::Flops, ref.flops}}};
  r = stage3_evolve(s, net, {}, cfg, 2);
  REQUIRE_FALSE(r.top.empty());
  CHECK(r.top.size() <= cfg.top_k);
  for (std::size_t i = 1; i < r.best_trace.size(); ++i) CHECK(r.best_trace[i] >= r.best_trace[i - 1]);
  for (std::size_t i = 1; i < r.top.size(); ++i) CHECK(r.top[i].score <= r.top[i - 1].score);
  for (const auto &c : r.top) {
    CHECK(check_constraints(c.candidate.arch, cfg.constraints).satisfied);
    CHECK(c.cost == cost_totals(c.candidate.arch));
    CHECK(c.score == forward_accuracy(net, c.encoded.values));
  }
  for (double rate : r.rate_trace) {
    CHECK(rate >= cfg.min_rate);
    CHECK(rate <= cfg.max_rate);
  }
  CHECK(stage3_evolve(s, net, {}, cfg, 2).top.front().genes == r.top.front().genes);
}

TEST_CASE("pipeline") {
  const auto &s = testutil::toy();
  Counting ev(s);
  auto cfg = small_pipeline(3);
  cfg.constraint_sets = {{"a", {{Metric::Flops, 30'000'000}}}, {"b", {{Metric::Flops, 60'000'000}}}};
  const auto bundle = run_nars(s, ev, cfg);
  CHECK(bundle.results.size() == 2);
  CHECK(bundle.dataset.size() == 24);
  CHECK(ev.calls() == 24);

  Counting ev2(s);
  const auto again = run_nars(s, ev2, cfg);
  CHECK(to_json(again, s).dump() == to_json(bundle, s).dump());
  CHECK(results_csv(again.results, again.dataset) == results_csv(bundle.results, bundle.dataset));
  CHECK(dataset_csv(again.dataset) == dataset_csv(bundle.dataset));
}

TEST_CASE("synthetic oracle") {
  const auto &s = testutil::joint();
  const auto c = sample_uniform(s, 8);
  const auto a = synthetic_oracle(c, s, 30, 4);
  CHECK(a == synthetic_oracle(c, s, 30, 4));
  CHECK(a.curve.size() == 30);
  const double inf = oracle_asymptote(s, c);
  CHECK(inf > 0.4);
  CHECK(inf < 0.9);
  CHECK(std::abs(synthetic_oracle(c, s, 400, 4).curve.back() - inf) <= kOracleNoise + 1e-9);
  for (int e = 1; e < 200; ++e) {
    CHECK(oracle_true_accuracy(s, c, e + 1) >= oracle_true_accuracy(s, c, e));
  }

  const auto ref = oracle_references(s);
  auto acc = [&](const Genotype &arch, const Genotype &rec) {
    return oracle_asymptote(s, s.materialize(OracleReferences::combine(s, arch, rec)));
  };
  CHECK(acc(ref.small_arch, ref.light_recipe) > acc(ref.large_arch, ref.light_recipe));
  CHECK(acc(ref.small_arch, ref.heavy_recipe) < acc(ref.large_arch, ref.heavy_recipe));

  // Higher lr trains faster.
  auto slow = c, fast = c;
  slow.recipe.lr = 20;
  fast.recipe.lr = 30;
  CHECK(oracle_terms(s, s.encode(fast)).tau < oracle_terms(s, s.encode(slow)).tau);

  auto off = c;
  off.arch.stages[0].channels = 17;
  CHECK_THROWS_AS(synthetic_oracle(off, s, 5, 1), ValidationError);
}
