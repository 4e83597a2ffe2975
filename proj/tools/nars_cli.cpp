// nars: command-line front end.
//
// Exit codes: 0 ok, 2 usage or configuration error, 3 runtime failure.
// Errors are also written to stderr as one JSON record:
//   {"error":{"code":2,"kind":"config","message":"...","line":3,"field":"channels"}}

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nars/candidate_io.hpp"
#include "nars/cost_model.hpp"
#include "nars/error.hpp"
#include "nars/kernels.hpp"
#include "nars/run_config.hpp"
#include "nars/search_engine.hpp"
#include "nars/search_space.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nars;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct UsageError : Error {
  using Error::Error;
};

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path &path, const std::string &text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
  }
  fs::rename(tmp, path);
}

void log_line(std::string_view msg) { std::cerr << "[nars] " << msg << '\n'; }

std::string format_grid(const Grid &g) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  std::string out = "{";
  if (g.size() <= 8) {
    for (std::size_t i = 0; i < g.size(); ++i) out += (i ? ", " : "") + num(g.values[i]);
  } else {
    out += num(g.values[0]) + ", " + num(g.values[1]) + ", ..., " + num(g.values.back());
  }
  return out + "} (" + std::to_string(g.size()) + (g.categorical ? " choices)" : " values)");
}

// ---------------------------------------------------------------------------

int cmd_space_info(const std::string &path, bool as_json) {
  const auto space = load_space_file(path);
  const auto per_stage = cardinality(space);
  const auto per_block = cardinality_per_block(space);
  if (as_json) {
    json params = json::array();
    for (const auto &p : space.params()) {
      params.push_back({{"name", p.name}, {"arch", p.arch}, {"categorical", p.grid.categorical},
                        {"values", p.grid.values}});
    }
    json stages = json::array();
    for (const auto &st : space.def().stages) stages.push_back({{"label", st.label}, {"block", to_string(st.block)}});
    std::cout << json{{"name", space.name()},
                      {"stages", stages},
                      {"parameters", params},
                      {"encoding", {{"arch_dim", space.layout().arch_dim},
                                    {"recipe_dim", space.layout().recipe_dim},
                                    {"fingerprint", hex64(space.layout().fingerprint)}}},
                      {"cardinality", {{"arch_log10", per_stage.arch_log10},
                                       {"recipe_log10", per_stage.recipe_log10}}},
                      {"cardinality_per_block", {{"arch_log10", per_block.arch_log10},
                                                 {"recipe_log10", per_block.recipe_log10}}}}
                     .dump(2)
              << '\n';
    return 0;
  }
  std::printf("space: %s\n", space.name().c_str());
  std::printf("architecture stages: %zu\n", space.def().stages.size());
  for (const auto &st : space.def().stages) {
    std::printf("  %-8s %-7s stride %d  se %s  act %s\n", st.label.c_str(), std::string(to_string(st.block)).c_str(),
                st.stride, st.se ? "Y" : "N", std::string(to_string(st.act)).c_str());
  }
  std::printf("free parameters: %zu (%zu architecture, %zu recipe)\n", space.params().size(),
              space.arch_param_count(), space.params().size() - space.arch_param_count());
  for (const auto &p : space.params()) {
    std::printf("  %-26s %s\n", p.name.c_str(), format_grid(p.grid).c_str());
  }
  std::printf("encoding: %zu architecture slots + %zu recipe slots, fingerprint %s\n", space.layout().arch_dim,
              space.layout().recipe_dim, hex64(space.layout().fingerprint).c_str());
  std::printf("cardinality (per-stage kernel/expansion): arch 10^%.2f, recipe 10^%.2f\n", per_stage.arch_log10,
              per_stage.recipe_log10);
  std::printf("cardinality (per-block kernel/expansion): arch 10^%.2f, recipe 10^%.2f\n", per_block.arch_log10,
              per_block.recipe_log10);
  return 0;
}

// ---------------------------------------------------------------------------

std::string pool_jsonl(std::span<const PoolEntry> pool) {
  std::ostringstream out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    out << json{{"id", i},
                {"candidate", to_json(pool[i].candidate)},
                {"flops", pool[i].cost.flops},
                {"params", pool[i].cost.params}}
               .dump()
        << '\n';
  }
  return out.str();
}

std::vector<Candidate> read_pool(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open pool file '" + path + "'");
  std::vector<Candidate> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      out.push_back(candidate_from_json(j.at("candidate")));
    } catch (const std::exception &e) {
      throw Error("corrupt pool file '" + path + "' at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw Error("pool file '" + path + "' has no records");
  return out;
}

std::optional<FlopWindow> parse_window(const std::string &text) {
  if (text.empty()) return std::nullopt;
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError("--flop-window expects low,high");
  const auto lo = parse_constraint_set("flops<=" + text.substr(0, comma)).items.front().bound;
  const auto hi = parse_constraint_set("flops<=" + text.substr(comma + 1)).items.front().bound;
  if (lo > hi) throw UsageError("--flop-window low exceeds high");
  return FlopWindow{lo, hi};
}

int cmd_pool(const std::string &space_path, std::size_t n, std::uint64_t seed, const std::string &out_dir,
             const std::string &window_text, bool force) {
  if (n == 0) throw UsageError("--n must be at least 1");
  const auto space = load_space_file(space_path);
  const auto pool = build_pool(space, n, seed, parse_window(window_text));
  const std::string text = pool_jsonl(pool);
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / ("pool-" + hex64(pool_hash(pool)) + ".jsonl");
  if (fs::exists(path) && !force) {
    log_line("pool already present: " + path.string());
  } else {
    write_file(path, text);
  }
  std::cout << json{{"path", path.string()}, {"records", pool.size()}, {"sampled", n}}.dump() << '\n';
  return 0;
}

int cmd_pretrain(const std::string &space_path, const std::string &pool_path, std::uint64_t seed,
                 const std::string &out, std::size_t epochs) {
  const auto space = load_space_file(space_path);
  const auto candidates = read_pool(pool_path);
  std::vector<Genotype> genes;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    try {
      genes.push_back(space.genotype(candidates[i]));
    } catch (const ValidationError &e) {
      throw Error("pool record " + std::to_string(i) + " is not in the space: " + e.what());
    }
  }
  const auto pool = make_entries(space, genes);
  PredictorNet net = PredictorNet::init(space.layout().arch_dim, space.layout().recipe_dim, derive_seed(seed, 12));
  net.layout_fingerprint = space.layout().fingerprint;
  PretrainConfig pc;
  pc.train.seed = derive_seed(seed, 13);
  if (epochs > 0) pc.train.epochs = epochs;
  if (space.layout().arch_dim == 0) throw UsageError("space has no architecture parameters to pretrain on");
  const auto report = stage1_pretrain(net, pool, pc);
  save_predictor(net, out);
  std::cout << json{{"checkpoint", out},
                    {"train_mse", report.train_mse},
                    {"val_mse", report.val_mse},
                    {"val_rank_correlation", report.val_rank_correlation},
                    {"epochs_run", report.epochs_run},
                    {"train_samples", pool.size() - static_cast<std::size_t>(std::llround(
                                                        static_cast<double>(pool.size()) * pc.validation_fraction))}}
                   .dump()
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct RunFlags {
  std::string config;
  std::string space;
  std::string out;
  std::vector<std::string> constraints;
  std::int64_t seed = -1;
  int parallelism = 0;
  int stop_after = -1;
  bool force = false;
};

RunConfig resolve_config(const RunFlags &f) {
  if (f.config.empty()) throw UsageError("--config is required");
  RunConfig rc = load_run_config(f.config);
  if (!f.space.empty()) rc.space_path = f.space;
  if (!f.out.empty()) rc.output_dir = f.out;
  if (f.seed >= 0) rc.seed = rc.pipeline.seed = static_cast<std::uint64_t>(f.seed);
  if (f.parallelism > 0) rc.parallelism = f.parallelism;
  if (!f.constraints.empty()) {
    rc.pipeline.constraint_sets.clear();
    for (const auto &c : f.constraints) rc.pipeline.constraint_sets.push_back(parse_constraint_set(c));
  }
  if (rc.space_path.empty()) throw UsageError("no space file given (config 'space' or --space)");
  if (rc.output_dir.empty()) throw UsageError("no output directory given (config 'output_dir' or --out)");
  return rc;
}

fs::path checkpoint_path(const RunConfig &rc) { return fs::path(rc.output_dir) / "stage2.ckpt.json"; }

void write_results(const RunConfig &rc, const SearchSpace &space, const ResultBundle &bundle) {
  const fs::path dir = rc.output_dir;
  write_file(dir / "results.json", to_json(bundle, space).dump(2) + "\n");
  write_file(dir / "results.csv", results_csv(bundle.results, bundle.dataset));
  write_file(dir / "dataset.csv", dataset_csv(bundle.dataset));
}

void prepare_output(const RunConfig &rc, const std::string &marker, bool force) {
  const fs::path dir = rc.output_dir;
  if (fs::exists(dir / marker)) {
    if (!force) throw UsageError("'" + dir.string() + "' holds a completed run; pass --force to overwrite");
    for (const char *name : {"stage2.ckpt.json", "results.json", "results.csv", "dataset.csv", "predictor.json",
                             "stage2.done", "run.done"}) {
      fs::remove(dir / name);
    }
  }
  fs::create_directories(dir);
  write_file(dir / "config.resolved.json", to_json(rc).dump(2) + "\n");
}

SearchState stage12(const RunConfig &rc, const SearchSpace &space, Evaluator &evaluator, int stop_after) {
  const auto ckpt = checkpoint_path(rc);
  SearchState state;
  const auto &p = rc.pipeline;
  if (fs::exists(ckpt)) {
    state = load_search_state(ckpt.string(), space);
    log_line("resuming stage 2 after iteration " + std::to_string(state.iteration));
  } else {
    const auto all = build_pool(space, p.stage2.pool_size, derive_seed(p.seed, 11));
    std::vector<PoolEntry> pool;
    for (const auto &e : all) {
      if (p.stage2.flop_window && !p.stage2.flop_window->contains(e.cost.flops)) continue;
      if (!satisfies(e.cost, p.stage2.constraints)) continue;
      pool.push_back(e);
    }
    if (pool.empty()) throw Error("no pool candidate satisfies the FLOP window and constraints");
    const fs::path pool_file = fs::path(rc.output_dir) / ("pool-" + hex64(pool_hash(pool)) + ".jsonl");
    if (!fs::exists(pool_file)) write_file(pool_file, pool_jsonl(pool));
    log_line("stage 1: pool " + pool_file.filename().string() + " with " + std::to_string(pool.size()) +
             " candidates");
    PredictorNet net =
        PredictorNet::init(space.layout().arch_dim, space.layout().recipe_dim, derive_seed(p.seed, 12));
    net.layout_fingerprint = space.layout().fingerprint;
    FitReport pre;
    if (p.pretrain.enabled && space.layout().arch_dim > 0) {
      PretrainConfig pc = p.pretrain;
      pc.train.seed = derive_seed(p.seed, 13);
      pre = stage1_pretrain(net, all, pc);
      log_line("stage 1: proxy val rank correlation " + std::to_string(pre.val_rank_correlation));
    }
    state = stage2_init(std::move(pool), std::move(net), derive_seed(p.seed, 14));
    state.pretrain_report = pre;
  }
  Stage2Options o;
  o.checkpoint_path = ckpt.string();
  o.stop_after = stop_after;
  o.parallelism = rc.parallelism;
  o.log = log_line;
  stage2_run(space, evaluator, state, p.stage2, o);
  if (state.iteration == 0) save_search_state(state, space, ckpt.string());
  return state;
}

int cmd_search(const RunFlags &flags) {
  const auto rc = resolve_config(flags);
  const auto space = load_space_file(rc.space_path);
  prepare_output(rc, "stage2.done", flags.force);
  auto evaluator = make_evaluator(rc, space);
  const auto state = stage12(rc, space, *evaluator, flags.stop_after);
  const fs::path dir = rc.output_dir;
  save_predictor(state.predictor, (dir / "predictor.json").string());
  write_file(dir / "dataset.csv", dataset_csv(state.dataset));
  const bool complete = state.iteration >= rc.pipeline.stage2.iterations || flags.stop_after < 0;
  if (complete) write_file(dir / "stage2.done", "");
  std::cout << json{{"checkpoint", checkpoint_path(rc).string()},
                    {"iterations", state.iteration},
                    {"labeled", state.dataset.size()},
                    {"failed", state.failures.size()},
                    {"early_stop_epoch", state.early_stop ? state.early_stop->epoch : 0},
                    {"evaluator_calls", evaluator->calls()}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_evolve(const RunFlags &flags, const std::string &checkpoint) {
  const auto rc = resolve_config(flags);
  if (rc.pipeline.constraint_sets.empty()) throw UsageError("evolve needs at least one constraint set");
  const auto space = load_space_file(rc.space_path);
  const std::string ckpt = checkpoint.empty() ? checkpoint_path(rc).string() : checkpoint;
  if (!fs::exists(ckpt)) throw UsageError("no stage-2 checkpoint at '" + ckpt + "'");
  const fs::path dir = rc.output_dir;
  if (fs::exists(dir / "results.json") && !flags.force) {
    throw UsageError("'" + dir.string() + "' already has results; pass --force to overwrite");
  }
  fs::create_directories(dir);
  const auto state = load_search_state(ckpt, space);
  ResultBundle bundle;
  bundle.pretrain = state.pretrain_report;
  bundle.dataset = state.dataset;
  json timings = json::array();
  for (const auto &set : rc.pipeline.constraint_sets) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = evolve_all(space, state, rc.pipeline.stage3, std::span(&set, 1), rc.pipeline.seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timings.push_back({{"name", set.name}, {"seconds", secs}, {"generations", r.front().result.generations}});
    bundle.results.push_back(std::move(r.front()));
  }
  write_results(rc, space, bundle);
  std::cout << json{{"results", (dir / "results.json").string()}, {"constraint_sets", timings},
                    {"evaluator_calls", 0}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_run(const RunFlags &flags) {
  const auto rc = resolve_config(flags);
  if (rc.pipeline.constraint_sets.empty()) throw UsageError("run needs at least one constraint set");
  const auto space = load_space_file(rc.space_path);
  prepare_output(rc, "run.done", flags.force);
  auto evaluator = make_evaluator(rc, space);
  const auto state = stage12(rc, space, *evaluator, -1);
  const fs::path dir = rc.output_dir;
  save_predictor(state.predictor, (dir / "predictor.json").string());
  write_file(dir / "stage2.done", "");
  ResultBundle bundle;
  bundle.pretrain = state.pretrain_report;
  bundle.dataset = state.dataset;
  bundle.results = evolve_all(space, state, rc.pipeline.stage3, rc.pipeline.constraint_sets, rc.pipeline.seed);
  write_results(rc, space, bundle);
  write_file(dir / "run.done", "");
  std::cout << json{{"results", (dir / "results.json").string()},
                    {"labeled", state.dataset.size()},
                    {"constraint_sets", bundle.results.size()},
                    {"evaluator_calls", evaluator->calls()}}
                   .dump()
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

ArchConfig read_arch(const std::string &path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception &e) {
      throw ParseError(std::string("arch file is not valid JSON: ") + e.what());
    }
    return j.contains("arch") ? candidate_from_json(j).arch : arch_from_json(j);
  }
  const SearchSpace space(parse_space_def(text));
  for (const auto &p : space.params()) {
    if (p.arch) throw UsageError("'" + path + "' leaves " + p.name + " free; cost needs a fixed architecture");
  }
  return space.materialize(Genotype(space.params().size(), 0)).arch;
}

int cmd_cost(const std::string &path, const std::string &format) {
  const auto report = cost(read_arch(path));
  if (format == "table" || format == "both") std::cout << format_cost_table(report);
  if (format == "both") std::cout << '\n';
  if (format == "csv" || format == "both") std::cout << format_cost_csv(report);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_export(const std::string &dir, const std::string &out) {
  std::ostringstream csv;
  csv << "source,candidate_id,flops,params,predicted_score,measured_accuracy\n";
  const fs::path results = fs::path(dir) / "results.json";
  const fs::path dataset = fs::path(dir) / "dataset.csv";
  if (fs::exists(dataset)) {
    std::istringstream in(read_file(dataset.string()));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      // candidate_id,iteration,budget,accuracy,full_accuracy,flops,params
      std::vector<std::string> f;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) f.push_back(cell);
      while (f.size() < 7) f.emplace_back();
      csv << "stage2," << f[0] << ',' << f[5] << ',' << f[6] << ",," << f[3] << '\n';
    }
  }
  if (fs::exists(results)) {
    json j;
    try {
      j = json::parse(read_file(results.string()));
      for (const auto &r : j.at("results")) {
        for (const auto &c : r.at("top")) {
          char score[40];
          std::snprintf(score, sizeof score, "%.10g", c.at("score").get<double>());
          csv << r.at("name").get<std::string>() << ',' << c.at("candidate_id").get<std::string>() << ','
              << c.at("flops").get<std::uint64_t>() << ',' << c.at("params").get<std::uint64_t>() << ',' << score
              << ",\n";
        }
      }
    } catch (const json::exception &e) {
      throw Error("corrupt results file '" + results.string() + "': " + e.what());
    }
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(out, csv.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

int report(int code, const std::string &kind, const std::string &message, int line = 0,
           const std::string &field = {}) {
  json e = {{"code", code}, {"kind", kind}, {"message", message}};
  if (line > 0) e["line"] = line;
  if (!field.empty()) e["field"] = field;
  std::cerr << json{{"error", e}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Neural architecture-recipe search"};
  app.require_subcommand(1);

  std::string space_path;
  bool as_json = false;
  auto *info = app.add_subcommand("space-info", "Print parameter grids and search-space cardinality");
  info->add_option("space", space_path, "Space-definition file")->required();
  info->add_flag("--json", as_json, "Machine-readable output");

  std::size_t pool_n = 0;
  std::uint64_t pool_seed = 0;
  std::string pool_out = ".", window;
  bool pool_force = false;
  auto *pool = app.add_subcommand("pool", "Sample a QMC candidate pool with cost labels");
  pool->add_option("--space", space_path, "Space-definition file")->required();
  pool->add_option("--n", pool_n, "Number of QMC samples")->required();
  pool->add_option("--seed", pool_seed, "Digital-shift seed");
  pool->add_option("--out", pool_out, "Output directory (file is pool-<hash>.jsonl)");
  pool->add_option("--flop-window", window, "Keep candidates with low <= FLOPs <= high, e.g. 400M,800M");
  pool->add_flag("--force", pool_force, "Rewrite an existing pool file");

  std::string pool_file, ckpt_out;
  std::uint64_t pre_seed = 0;
  std::size_t pre_epochs = 0;
  auto *pretrain = app.add_subcommand("pretrain", "Pretrain the predictor encoder on pool FLOPs/params");
  pretrain->add_option("--space", space_path, "Space-definition file")->required();
  pretrain->add_option("--pool", pool_file, "Pool file from `nars pool`")->required();
  pretrain->add_option("--seed", pre_seed, "Seed");
  pretrain->add_option("--out", ckpt_out, "Predictor checkpoint to write")->required();
  pretrain->add_option("--epochs", pre_epochs, "Maximum epochs (default 100)");

  RunFlags flags;
  std::string evolve_ckpt;
  auto add_run_flags = [&](CLI::App *cmd) {
    cmd->add_option("--config", flags.config, "Run configuration (JSON with comments)")->required();
    cmd->add_option("--space", flags.space, "Override the space file");
    cmd->add_option("--out", flags.out, "Override the output directory");
    cmd->add_option("--seed", flags.seed, "Override the seed");
    cmd->add_option("--parallelism", flags.parallelism, "Override the evaluation parallelism");
    cmd->add_option("--constraints", flags.constraints,
                    "Replace the constraint sets, e.g. 450M:flops<=450M (repeatable)");
    cmd->add_flag("--force", flags.force, "Overwrite a completed run");
  };
  auto *search = app.add_subcommand("search", "Stage 1 + stage 2 (resumes from the checkpoint)");
  add_run_flags(search);
  search->add_option("--stop-after", flags.stop_after, "Stop after this many stage-2 iterations");
  auto *evolve = app.add_subcommand("evolve", "Stage 3 for every constraint set from a stage-2 checkpoint");
  add_run_flags(evolve);
  evolve->add_option("--checkpoint", evolve_ckpt, "Stage-2 checkpoint (default <out>/stage2.ckpt.json)");
  auto *run = app.add_subcommand("run", "Full pipeline");
  add_run_flags(run);

  std::string arch_path, format = "both";
  auto *costcmd = app.add_subcommand("cost", "Per-layer FLOPs (MACs) and parameters");
  costcmd->add_option("arch", arch_path, "Fixed-architecture space file or candidate/arch JSON")->required();
  costcmd->add_option("--format", format, "table, csv or both")->check(CLI::IsMember({"table", "csv", "both"}));

  std::string results_dir, export_out;
  auto *exportcmd = app.add_subcommand("export", "CSV of FLOPs, params and accuracies for front plots");
  exportcmd->add_option("results_dir", results_dir, "Run output directory")->required();
  exportcmd->add_option("--out", export_out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return report(kUsage, "usage", e.what());
  }

  try {
    if (*info) return cmd_space_info(space_path, as_json);
    if (*pool) return cmd_pool(space_path, pool_n, pool_seed, pool_out, window, pool_force);
    if (*pretrain) return cmd_pretrain(space_path, pool_file, pre_seed, ckpt_out, pre_epochs);
    if (*search) return cmd_search(flags);
    if (*evolve) return cmd_evolve(flags, evolve_ckpt);
    if (*run) return cmd_run(flags);
    if (*costcmd) return cmd_cost(arch_path, format);
    if (*exportcmd) return cmd_export(results_dir, export_out);
  } catch (const UsageError &e) {
    return report(kUsage, "usage", e.what());
  } catch (const ParseError &e) {
    return report(kUsage, "config", e.what(), e.line(), e.field());
  } catch (const ValidationError &e) {
    return report(kUsage, "config", e.what(), 0, e.parameter());
  } catch (const std::exception &e) {
    return report(kRuntime, "runtime", e.what());
  }
  return report(kUsage, "usage", "no command");
}
