#include "nars/search_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "nars/candidate_io.hpp"
#include "nars/error.hpp"
#include "nars/kernels.hpp"
#include "nars/stats.hpp"

namespace nars {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string &s) { return std::stoull(s, nullptr, 16); }

void say(const Logger &log, const std::string &msg) {
  if (log) log(msg);
}

// Higher score first, then the smaller encoded vector.
template <class ScoreOf, class EncodedOf>
auto better_by(ScoreOf score, EncodedOf encoded) {
  return [=](std::size_t a, std::size_t b) {
    const double sa = score(a), sb = score(b);
    if (sa != sb) return sa > sb;
    const auto &ea = encoded(a);
    const auto &eb = encoded(b);
    if (ea.values != eb.values) return encoded_less(ea, eb);
    return a < b;
  };
}

json fit_json(const FitReport &r) {
  return {{"train_mse", r.train_mse},
          {"val_mse", r.val_mse},
          {"val_rank_correlation", r.val_rank_correlation},
          {"epochs_run", r.epochs_run},
          {"loss_trace", r.loss_trace}};
}

FitReport fit_from(const json &j) {
  FitReport r;
  r.train_mse = j.at("train_mse").get<double>();
  r.val_mse = j.at("val_mse").get<double>();
  r.val_rank_correlation = j.at("val_rank_correlation").get<double>();
  r.epochs_run = j.at("epochs_run").get<std::size_t>();
  r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  return r;
}

std::vector<AccuracySample> training_set(std::span<const LabeledSample> dataset) {
  std::vector<AccuracySample> out;
  out.reserve(dataset.size());
  for (const auto &s : dataset) out.push_back({s.encoded.values, s.accuracy});
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

EarlyStop determine_early_stop(std::span<const std::vector<double>> curves, double threshold) {
  if (curves.size() < 2) throw ShapeError("early stopping needs at least two curves");
  const std::size_t len = curves.front().size();
  if (len == 0) throw ShapeError("empty accuracy curve");
  for (const auto &c : curves) {
    if (c.size() != len) throw ShapeError("accuracy curves have different lengths");
  }
  std::vector<double> finals, column(curves.size());
  for (const auto &c : curves) finals.push_back(c.back());
  // Rejects constant final accuracies up front.
  (void)spearman(finals, finals);

  EarlyStop out;
  for (std::size_t e = 1; e < len; ++e) {
    for (std::size_t i = 0; i < curves.size(); ++i) column[i] = curves[i][e - 1];
    double rho = 0;
    try {
      rho = spearman(column, finals);
    } catch (const UndefinedResultError &) {
      out.skipped_epochs.push_back(static_cast<int>(e));
      continue;
    }
    if (rho >= threshold) {
      out.epoch = static_cast<int>(e);
      out.reached = true;
      return out;
    }
  }
  out.epoch = static_cast<int>(len);
  out.reached = false;
  return out;
}

std::vector<PoolEntry> make_entries(const SearchSpace &space, std::span<const Genotype> genes) {
  const auto encoded = encode_batch(space, genes);
  std::vector<PoolEntry> out(genes.size());
  const auto n = static_cast<std::ptrdiff_t>(genes.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto &e = out[static_cast<std::size_t>(i)];
    e.genes = genes[static_cast<std::size_t>(i)];
    e.candidate = space.materialize(e.genes);
    e.encoded = encoded[static_cast<std::size_t>(i)];
    e.cost = cost_totals(e.candidate.arch);
  }
  return out;
}

std::vector<PoolEntry> build_pool(const SearchSpace &space, std::size_t n, std::uint64_t seed,
                                  std::optional<FlopWindow> window, const ConstraintSet &constraints) {
  const auto genes = sample_qmc_genotypes(space, n, seed);
  std::set<Genotype> seen;
  std::vector<Genotype> unique;
  for (const auto &g : genes) {
    if (seen.insert(g).second) unique.push_back(g);
  }
  auto entries = make_entries(space, unique);
  std::vector<PoolEntry> out;
  for (auto &e : entries) {
    if (window && !window->contains(e.cost.flops)) continue;
    if (!satisfies(e.cost, constraints)) continue;
    out.push_back(std::move(e));
  }
  return out;
}

std::uint64_t genotype_hash(const Genotype &genes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto byte = [&](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (auto g : genes) {
    for (int k = 0; k < 4; ++k) byte(static_cast<unsigned char>(g >> (8 * k)));
  }
  return h;
}

std::uint64_t pool_hash(std::span<const PoolEntry> pool) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto &e : pool) {
    h ^= genotype_hash(e.genes);
    h *= 0x100000001b3ULL;
  }
  return h;
}

FitReport stage1_pretrain(PredictorNet &net, std::span<const PoolEntry> pool, const PretrainConfig &config) {
  if (pool.empty()) throw Error("stage 1: empty pool");
  CostScale scale;
  scale.flops_min = scale.params_min = std::numeric_limits<double>::infinity();
  scale.flops_max = scale.params_max = -std::numeric_limits<double>::infinity();
  for (const auto &e : pool) {
    const auto f = static_cast<double>(e.cost.flops);
    const auto p = static_cast<double>(e.cost.params);
    scale.flops_min = std::min(scale.flops_min, f);
    scale.flops_max = std::max(scale.flops_max, f);
    scale.params_min = std::min(scale.params_min, p);
    scale.params_max = std::max(scale.params_max, p);
  }
  net.cost_scale = scale;
  std::vector<ProxySample> samples;
  samples.reserve(pool.size());
  for (const auto &e : pool) {
    const auto arch = e.encoded.arch();
    samples.push_back({{arch.begin(), arch.end()},
                       scale.flops(static_cast<double>(e.cost.flops)),
                       scale.params(static_cast<double>(e.cost.params))});
  }
  return pretrain_proxy(net, samples, config.validation_fraction, config.train);
}

Selection select_random(std::span<const char> evaluated, std::size_t m, Rng &rng) {
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    if (!evaluated[i]) open.push_back(i);
  }
  Selection out;
  out.exhausted = open.size() < m;
  const std::size_t take = std::min(m, open.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, open.size() - i));
    std::swap(open[i], open[j]);
    out.indices.push_back(open[i]);
  }
  return out;
}

Selection select_by_bins(std::span<const PoolEntry> pool, std::span<const double> scores,
                         std::span<const char> evaluated, std::size_t m, double low, double high) {
  if (scores.size() != pool.size() || evaluated.size() != pool.size()) {
    throw ShapeError("select_by_bins: pool, scores and flags differ in length");
  }
  Selection out;
  if (m == 0) return out;
  const auto better = better_by([&](std::size_t i) { return scores[i]; },
                                [&](std::size_t i) -> const EncodedVector & { return pool[i].encoded; });
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!evaluated[i]) open.push_back(i);
  }
  out.exhausted = open.size() < m;

  std::vector<std::optional<std::size_t>> best(m);
  for (auto i : open) {
    std::size_t bin = 0;
    if (high > low) {
      const double pos = (static_cast<double>(pool[i].cost.flops) - low) / (high - low);
      bin = static_cast<std::size_t>(std::clamp(std::floor(pos * static_cast<double>(m)), 0.0,
                                                static_cast<double>(m - 1)));
    }
    if (!best[bin] || better(i, *best[bin])) best[bin] = i;
  }
  std::vector<char> taken(pool.size(), 0);
  for (const auto &b : best) {
    if (!b) continue;
    out.indices.push_back(*b);
    taken[*b] = 1;
  }
  if (out.indices.size() < m) {
    std::vector<std::size_t> rest;
    for (auto i : open) {
      if (!taken[i]) rest.push_back(i);
    }
    std::sort(rest.begin(), rest.end(), better);
    for (auto i : rest) {
      if (out.indices.size() >= m) break;
      out.indices.push_back(i);
    }
  }
  return out;
}

Selection select_batch(const SearchState &state, const Stage2Config &config) {
  if (state.pool.empty()) throw Error("select_batch: empty pool");
  if (state.iteration == 0) {
    Rng rng(derive_seed(state.seed, 1000));
    return select_random(state.evaluated, config.batch, rng);
  }
  std::vector<EncodedVector> inputs;
  inputs.reserve(state.pool.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto &e : state.pool) {
    inputs.push_back(e.encoded);
    lo = std::min(lo, static_cast<double>(e.cost.flops));
    hi = std::max(hi, static_cast<double>(e.cost.flops));
  }
  if (config.flop_window) {
    lo = static_cast<double>(config.flop_window->low);
    if (config.flop_window->high != std::numeric_limits<std::uint64_t>::max()) {
      hi = static_cast<double>(config.flop_window->high);
    }
  }
  const auto scores = score_batch(state.predictor, inputs);
  return select_by_bins(state.pool, scores, state.evaluated, config.batch, lo, hi);
}

SearchState stage2_init(std::vector<PoolEntry> pool, PredictorNet base, std::uint64_t seed) {
  SearchState s;
  s.evaluated.assign(pool.size(), 0);
  s.pool = std::move(pool);
  s.predictor = base;
  s.base = std::move(base);
  s.seed = seed;
  return s;
}

void stage2_run(const SearchSpace &space, Evaluator &evaluator, SearchState &state, const Stage2Config &config,
                const Stage2Options &options) {
  if (config.batch == 0) throw Error("stage 2: batch size must be positive");
  if (config.full_budget < 1) throw Error("stage 2: full budget must be at least 1 epoch");
  while (state.iteration < config.iterations) {
    if (options.stop_after >= 0 && state.iteration >= options.stop_after) return;
    const int t = state.iteration;
    const Selection sel = select_batch(state, config);
    if (sel.indices.empty()) {
      say(options.log, "stage 2: pool exhausted");
      return;
    }
    if (sel.exhausted) say(options.log, "stage 2: pool nearly exhausted, short batch");
    const int budget = t == 0 || !state.early_stop ? config.full_budget : state.early_stop->epoch;

    std::vector<EvalRequest> requests;
    for (auto idx : sel.indices) {
      requests.push_back({idx, state.pool[idx].candidate, budget, derive_seed(state.seed, 5000 + idx)});
    }
    const auto results = evaluator.evaluate(requests);

    std::vector<LabeledSample> batch;
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto idx = sel.indices[k];
      state.evaluated[idx] = 1;
      const auto &r = results[k];
      if (!r.ok()) {
        state.failures.push_back({idx, t + 1, r.reason});
        say(options.log, "stage 2: candidate " + std::to_string(idx) + " failed: " + r.reason);
        continue;
      }
      LabeledSample s;
      s.pool_index = idx;
      s.genes = state.pool[idx].genes;
      s.encoded = state.pool[idx].encoded;
      s.cost = state.pool[idx].cost;
      s.accuracy = r.final_accuracy();
      s.budget = budget;
      if (budget == config.full_budget) s.full_accuracy = r.final_accuracy();
      s.curve = r.curve;
      s.iteration = t + 1;
      batch.push_back(std::move(s));
    }

    if (t == 0) {
      EarlyStop es{config.full_budget, false, {}};
      std::vector<std::vector<double>> curves;
      for (const auto &s : batch) curves.push_back(s.curve);
      if (curves.size() >= 2) {
        try {
          es = determine_early_stop(curves, config.early_stop_threshold);
        } catch (const UndefinedResultError &) {
          say(options.log, "stage 2: final accuracies are all equal, keeping the full budget");
        }
      }
      if (!es.reached) say(options.log, "stage 2: early-stop threshold not reached, keeping the full budget");
      state.early_stop = es;
      for (auto &s : batch) {
        s.accuracy = s.curve[static_cast<std::size_t>(es.epoch - 1)];
        s.budget = es.epoch;
      }
    }
    state.dataset.insert(state.dataset.end(), batch.begin(), batch.end());

    if (!state.dataset.empty()) {
      PredictorNet net = state.base;
      FinetuneOptions ft = config.finetune;
      ft.seed = derive_seed(state.seed, 2000 + static_cast<std::uint64_t>(t));
      const auto train = training_set(state.dataset);
      state.last_fit = finetune_accuracy(net, train, {}, ft);
      state.predictor = std::move(net);
    }
    ++state.iteration;
    say(options.log, "stage 2: iteration " + std::to_string(state.iteration) + " done, " +
                         std::to_string(state.dataset.size()) + " labeled samples, budget " +
                         std::to_string(budget) + " epochs");
    if (!options.checkpoint_path.empty()) save_search_state(state, space, options.checkpoint_path);
  }
}

json to_json(const SearchState &state, const SearchSpace &space) {
  json pool = json::array();
  for (const auto &e : state.pool) pool.push_back(e.genes);
  json evaluated = json::array();
  for (std::size_t i = 0; i < state.evaluated.size(); ++i) {
    if (state.evaluated[i]) evaluated.push_back(i);
  }
  json dataset = json::array();
  for (const auto &s : state.dataset) {
    dataset.push_back({{"pool_index", s.pool_index},
                       {"accuracy", s.accuracy},
                       {"budget", s.budget},
                       {"full_accuracy", s.full_accuracy ? json(*s.full_accuracy) : json(nullptr)},
                       {"curve", s.curve},
                       {"iteration", s.iteration}});
  }
  json failures = json::array();
  for (const auto &f : state.failures) {
    failures.push_back({{"pool_index", f.pool_index}, {"iteration", f.iteration}, {"reason", f.reason}});
  }
  json early = nullptr;
  if (state.early_stop) {
    early = {{"epoch", state.early_stop->epoch},
             {"reached", state.early_stop->reached},
             {"skipped_epochs", state.early_stop->skipped_epochs}};
  }
  return {{"format", "nars-search-state"},
          {"version", 1},
          {"layout_fingerprint", hex64(space.layout().fingerprint)},
          {"seed", state.seed},
          {"iteration", state.iteration},
          {"pool_hash", hex64(pool_hash(state.pool))},
          {"pool", pool},
          {"evaluated", evaluated},
          {"dataset", dataset},
          {"failures", failures},
          {"early_stop", early},
          {"pretrain_report", fit_json(state.pretrain_report)},
          {"last_fit", fit_json(state.last_fit)},
          {"base", to_json(state.base)},
          {"predictor", to_json(state.predictor)}};
}

SearchState search_state_from_json(const json &j, const SearchSpace &space) {
  try {
    if (j.at("format") != "nars-search-state") throw ParseError("not a search-state checkpoint");
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported search-state version");
    if (parse_hex64(j.at("layout_fingerprint").get<std::string>()) != space.layout().fingerprint) {
      throw Error("checkpoint was written for a different search space layout");
    }
    SearchState s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.iteration = j.at("iteration").get<int>();
    const auto genes = j.at("pool").get<std::vector<Genotype>>();
    s.pool = make_entries(space, genes);
    if (hex64(pool_hash(s.pool)) != j.at("pool_hash").get<std::string>()) {
      throw Error("checkpoint pool does not match its recorded hash");
    }
    s.evaluated.assign(s.pool.size(), 0);
    for (auto i : j.at("evaluated").get<std::vector<std::size_t>>()) s.evaluated.at(i) = 1;
    for (const auto &d : j.at("dataset")) {
      LabeledSample x;
      x.pool_index = d.at("pool_index").get<std::size_t>();
      const auto &e = s.pool.at(x.pool_index);
      x.genes = e.genes;
      x.encoded = e.encoded;
      x.cost = e.cost;
      x.accuracy = d.at("accuracy").get<double>();
      x.budget = d.at("budget").get<int>();
      if (!d.at("full_accuracy").is_null()) x.full_accuracy = d.at("full_accuracy").get<double>();
      x.curve = d.at("curve").get<std::vector<double>>();
      x.iteration = d.at("iteration").get<int>();
      s.dataset.push_back(std::move(x));
    }
    for (const auto &f : j.at("failures")) {
      s.failures.push_back({f.at("pool_index").get<std::size_t>(), f.at("iteration").get<int>(),
                            f.at("reason").get<std::string>()});
    }
    if (!j.at("early_stop").is_null()) {
      const auto &e = j.at("early_stop");
      s.early_stop = EarlyStop{e.at("epoch").get<int>(), e.at("reached").get<bool>(),
                               e.at("skipped_epochs").get<std::vector<int>>()};
    }
    s.pretrain_report = fit_from(j.at("pretrain_report"));
    s.last_fit = fit_from(j.at("last_fit"));
    s.base = predictor_from_json(j.at("base"));
    s.predictor = predictor_from_json(j.at("predictor"));
    return s;
  } catch (const json::exception &e) {
    throw ParseError(std::string("malformed search-state checkpoint: ") + e.what());
  } catch (const std::out_of_range &) {
    throw ParseError("malformed search-state checkpoint: index out of range");
  }
}

void save_search_state(const SearchState &state, const SearchSpace &space, const std::string &path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << to_json(state, space).dump() << '\n';
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

SearchState load_search_state(const std::string &path, const SearchSpace &space) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw ParseError(std::string("malformed search-state checkpoint: ") + e.what());
  }
  return search_state_from_json(j, space);
}

Stage3Result stage3_evolve(const SearchSpace &space, const PredictorNet &predictor,
                           std::span<const LabeledSample> dataset, const Stage3Config &config,
                           std::uint64_t seed) {
  if (config.epsilon <= 0) throw Error("stage 3: epsilon must be positive");
  if (config.top_k == 0) throw Error("stage 3: top_k must be positive");
  Stage3Result result;
  std::set<Genotype> seen;
  std::vector<ScoredCandidate> population;

  auto entry = [&](const Genotype &g) {
    ScoredCandidate c;
    c.genes = g;
    c.candidate = space.materialize(g);
    c.cost = cost_totals(c.candidate.arch);
    return c;
  };
  auto rescore = [&](std::vector<ScoredCandidate> &cs, std::size_t from) {
    std::vector<EncodedVector> inputs;
    for (std::size_t i = from; i < cs.size(); ++i) {
      cs[i].encoded = space.encode(cs[i].genes);
      inputs.push_back(cs[i].encoded);
    }
    const auto scores = score_batch(predictor, inputs);
    for (std::size_t i = from; i < cs.size(); ++i) cs[i].score = scores[i - from];
  };
  auto rank = [](std::vector<ScoredCandidate> &cs) {
    std::vector<std::size_t> order(cs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              better_by([&](std::size_t i) { return cs[i].score; },
                        [&](std::size_t i) -> const EncodedVector & { return cs[i].encoded; }));
    std::vector<ScoredCandidate> sorted;
    sorted.reserve(cs.size());
    for (auto i : order) sorted.push_back(std::move(cs[i]));
    cs = std::move(sorted);
  };

  // Initial population: best measured candidates, then random ones.
  std::vector<std::size_t> by_accuracy(dataset.size());
  std::iota(by_accuracy.begin(), by_accuracy.end(), std::size_t{0});
  std::sort(by_accuracy.begin(), by_accuracy.end(),
            better_by([&](std::size_t i) { return dataset[i].accuracy; },
                      [&](std::size_t i) -> const EncodedVector & { return dataset[i].encoded; }));
  for (auto i : by_accuracy) {
    if (population.size() >= config.p_best) break;
    if (!satisfies(dataset[i].cost, config.constraints)) continue;
    if (!seen.insert(dataset[i].genes).second) continue;
    population.push_back(entry(dataset[i].genes));
  }
  std::size_t random_needed = config.q_random;
  if (population.size() < config.p_best) {
    result.diagnostics.push_back("only " + std::to_string(population.size()) + " of " +
                                 std::to_string(config.p_best) +
                                 " measured candidates satisfy the constraints; backfilled randomly");
    random_needed += config.p_best - population.size();
  }
  {
    Rng rng(derive_seed(seed, 1));
    const std::size_t target = population.size() + random_needed;
    const std::size_t attempts = random_needed * static_cast<std::size_t>(std::max(config.max_retries, 1));
    for (std::size_t a = 0; a < attempts && population.size() < target; ++a) {
      const auto g = sample_uniform_genotype(space, rng);
      if (seen.count(g)) continue;
      auto c = entry(g);
      if (!satisfies(c.cost, config.constraints)) continue;
      seen.insert(g);
      population.push_back(std::move(c));
    }
    if (population.size() < target) {
      result.diagnostics.push_back("random initialization found " + std::to_string(population.size()) +
                                   " constraint-satisfying candidates, wanted " + std::to_string(target));
    }
  }
  if (population.empty()) {
    result.diagnostics.push_back("no constraint-satisfying candidate found");
    return result;
  }
  rescore(population, 0);
  rank(population);
  double best = population.front().score;
  result.best_trace.push_back(best);
  double rate = config.initial_rate;

  for (int gen = 1; gen <= config.max_generations; ++gen) {
    const std::size_t parents = population.size();
    std::vector<std::vector<Genotype>> offspring(parents);
    const auto n = static_cast<std::ptrdiff_t>(parents);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
      const auto &parent = population[static_cast<std::size_t>(p)].genes;
      Rng rng(derive_seed(derive_seed(seed, 100 + static_cast<std::uint64_t>(gen)), static_cast<std::uint64_t>(p)));
      auto &kids = offspring[static_cast<std::size_t>(p)];
      for (std::size_t c = 0; c < config.children; ++c) {
        for (int attempt = 0; attempt < config.max_retries; ++attempt) {
          auto g = mutate(space, parent, rate, rng);
          if (g == parent) continue;
          if (!satisfies(cost_totals(space.materialize(g).arch), config.constraints)) continue;
          kids.push_back(std::move(g));
          break;
        }
      }
    }
    std::size_t produced = 0;
    const std::size_t before = population.size();
    for (auto &kids : offspring) {
      produced += kids.size();
      for (auto &g : kids) {
        if (!seen.insert(g).second) continue;
        population.push_back(entry(g));
      }
    }
    if (produced == 0) {
      result.diagnostics.push_back("generation " + std::to_string(gen) +
                                   ": no constraint-satisfying child found, stopping");
      break;
    }
    rescore(population, before);
    rank(population);
    if (population.size() > config.top_k) population.resize(config.top_k);

    const double previous = best;
    best = population.front().score;
    const double gain = best - previous;
    result.generations = gen;
    result.rate_trace.push_back(rate);
    result.best_trace.push_back(best);
    rate = gain < 10 * config.epsilon ? std::max(config.min_rate, rate / 2) : std::min(config.max_rate, rate * 2);
    if (gain <= config.epsilon) {
      result.converged = true;
      break;
    }
  }
  if (population.size() > config.top_k) population.resize(config.top_k);
  result.top = std::move(population);
  return result;
}

std::vector<ConstraintResult> evolve_all(const SearchSpace &space, const SearchState &state,
                                         const Stage3Config &stage3, std::span<const ConstraintSet> sets,
                                         std::uint64_t seed) {
  std::vector<ConstraintResult> out;
  for (const auto &set : sets) {
    Stage3Config cfg = stage3;
    cfg.constraints = set;
    out.push_back({set, stage3_evolve(space, state.predictor, state.dataset, cfg, derive_seed(seed, 3))});
  }
  return out;
}

ResultBundle run_nars(const SearchSpace &space, Evaluator &evaluator, const PipelineConfig &config,
                      const PipelineOptions &options) {
  if (config.constraint_sets.empty()) throw Error("run: at least one constraint set is required");
  SearchState state;
  const bool resume = !options.checkpoint_path.empty() && std::filesystem::exists(options.checkpoint_path);
  if (resume) {
    state = load_search_state(options.checkpoint_path, space);
    say(options.log, "stage 2: resuming after iteration " + std::to_string(state.iteration));
  } else {
    const auto all = build_pool(space, config.stage2.pool_size, derive_seed(config.seed, 11));
    std::vector<PoolEntry> pool;
    for (const auto &e : all) {
      if (config.stage2.flop_window && !config.stage2.flop_window->contains(e.cost.flops)) continue;
      if (!satisfies(e.cost, config.stage2.constraints)) continue;
      pool.push_back(e);
    }
    if (pool.empty()) throw Error("stage 1: no pool candidate satisfies the FLOP window and constraints");
    say(options.log, "stage 1: pool of " + std::to_string(pool.size()) + " candidates (" +
                         std::to_string(all.size()) + " sampled)");
    PredictorNet net = PredictorNet::init(space.layout().arch_dim, space.layout().recipe_dim,
                                          derive_seed(config.seed, 12));
    net.layout_fingerprint = space.layout().fingerprint;
    FitReport pre;
    if (config.pretrain.enabled && space.layout().arch_dim > 0) {
      PretrainConfig pc = config.pretrain;
      pc.train.seed = derive_seed(config.seed, 13);
      pre = stage1_pretrain(net, all, pc);
      say(options.log, "stage 1: pretrained, val rank correlation " + fmt(pre.val_rank_correlation));
    }
    state = stage2_init(std::move(pool), std::move(net), derive_seed(config.seed, 14));
    state.pretrain_report = pre;
  }
  Stage2Options s2;
  s2.checkpoint_path = options.checkpoint_path;
  s2.parallelism = options.parallelism;
  s2.log = options.log;
  stage2_run(space, evaluator, state, config.stage2, s2);

  ResultBundle bundle;
  bundle.pretrain = state.pretrain_report;
  bundle.dataset = state.dataset;
  bundle.results = evolve_all(space, state, config.stage3, config.constraint_sets, config.seed);
  return bundle;
}

std::string results_csv(std::span<const ConstraintResult> results, std::span<const LabeledSample> dataset) {
  std::map<Genotype, double> measured;
  for (const auto &s : dataset) measured.emplace(s.genes, s.accuracy);
  std::ostringstream out;
  out << "constraint,rank,candidate_id,predicted_score,measured_accuracy,flops,params\n";
  for (const auto &r : results) {
    for (std::size_t i = 0; i < r.result.top.size(); ++i) {
      const auto &c = r.result.top[i];
      const auto it = measured.find(c.genes);
      out << r.constraints.name << ',' << i + 1 << ',' << hex64(genotype_hash(c.genes)) << ',' << fmt(c.score)
          << ',' << (it == measured.end() ? std::string() : fmt(it->second)) << ',' << c.cost.flops << ','
          << c.cost.params << '\n';
    }
  }
  return out.str();
}

std::string dataset_csv(std::span<const LabeledSample> dataset) {
  std::ostringstream out;
  out << "candidate_id,iteration,budget,accuracy,full_accuracy,flops,params\n";
  for (const auto &s : dataset) {
    out << hex64(genotype_hash(s.genes)) << ',' << s.iteration << ',' << s.budget << ',' << fmt(s.accuracy) << ','
        << (s.full_accuracy ? fmt(*s.full_accuracy) : std::string()) << ',' << s.cost.flops << ','
        << s.cost.params << '\n';
  }
  return out.str();
}

json to_json(const ResultBundle &bundle, const SearchSpace &space) {
  json results = json::array();
  for (const auto &r : bundle.results) {
    json constraints = json::array();
    for (const auto &c : r.constraints.items) {
      constraints.push_back({{"metric", to_string(c.metric)}, {"bound", c.bound}});
    }
    json top = json::array();
    for (const auto &c : r.result.top) {
      top.push_back({{"candidate_id", hex64(genotype_hash(c.genes))},
                     {"score", c.score},
                     {"flops", c.cost.flops},
                     {"params", c.cost.params},
                     {"candidate", to_json(c.candidate)}});
    }
    results.push_back({{"name", r.constraints.name},
                       {"constraints", constraints},
                       {"generations", r.result.generations},
                       {"converged", r.result.converged},
                       {"best_trace", r.result.best_trace},
                       {"diagnostics", r.result.diagnostics},
                       {"top", top}});
  }
  json dataset = json::array();
  for (const auto &s : bundle.dataset) {
    dataset.push_back({{"candidate_id", hex64(genotype_hash(s.genes))},
                       {"accuracy", s.accuracy},
                       {"budget", s.budget},
                       {"flops", s.cost.flops},
                       {"params", s.cost.params}});
  }
  return {{"format", "nars-results"},
          {"version", 1},
          {"space", space.name()},
          {"layout_fingerprint", hex64(space.layout().fingerprint)},
          {"pretrain", fit_json(bundle.pretrain)},
          {"dataset", dataset},
          {"results", results}};
}

}  // namespace nars
