#include "nars/run_config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "nars/error.hpp"

namespace nars {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

// "450M", "4.5e8", "1984" -> count.
std::uint64_t parse_count(std::string_view text, const std::string &field) {
  std::string t = trim(text);
  double mult = 1;
  if (!t.empty()) {
    switch (t.back()) {
      case 'K': case 'k': mult = 1e3; break;
      case 'M': case 'm': mult = 1e6; break;
      case 'G': case 'g': mult = 1e9; break;
      default: break;
    }
    if (mult != 1) t.pop_back();
  }
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || v <= 0) {
    throw ParseError("expected a positive count, got '" + std::string(text) + "'", 0, field);
  }
  return static_cast<std::uint64_t>(std::llround(v * mult));
}

std::uint64_t count_value(const json &j, const std::string &field) {
  if (j.is_string()) return parse_count(j.get<std::string>(), field);
  if (j.is_number()) {
    const double v = j.get<double>();
    if (v <= 0) throw ParseError("count must be positive", 0, field);
    return j.is_number_unsigned() ? j.get<std::uint64_t>() : static_cast<std::uint64_t>(std::llround(v));
  }
  throw ParseError("expected a count", 0, field);
}

// Object view that rejects unknown keys.
class Section {
 public:
  Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError("expected an object", 0, path_);
  }

  std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

  const json *find(const std::string &key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const std::string &key, T &out) {
    if (const json *v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception &) {
        throw ParseError("wrong type", 0, field(key));
      }
    }
  }

  void finish() const {
    for (const auto &[key, value] : j_.items()) {
      if (!used_.count(key)) throw ParseError("unknown field", 0, field(key));
    }
  }

 private:
  const json &j_;
  std::string path_;
  std::set<std::string> used_;
};

UpdateRule parse_rule(const std::string &s, const std::string &field) {
  if (s == "adam") return UpdateRule::Adam;
  if (s == "momentum") return UpdateRule::Momentum;
  throw ParseError("expected 'adam' or 'momentum'", 0, field);
}

std::string rule_name(UpdateRule r) { return r == UpdateRule::Adam ? "adam" : "momentum"; }

ConstraintSet constraint_from_json(const json &j, const std::string &path) {
  Section s(j, path);
  ConstraintSet out;
  s.read("name", out.name);
  if (const json *v = s.find("flops")) out.items.push_back({Metric::Flops, count_value(*v, s.field("flops"))});
  if (const json *v = s.find("params")) out.items.push_back({Metric::Params, count_value(*v, s.field("params"))});
  s.finish();
  if (out.name.empty()) {
    std::ostringstream name;
    for (const auto &c : out.items) {
      if (name.tellp() > 0) name << '+';
      name << to_string(c.metric) << "<=" << c.bound;
    }
    out.name = out.items.empty() ? "unconstrained" : name.str();
  }
  return out;
}

json constraint_json(const ConstraintSet &c) {
  json j = {{"name", c.name}};
  for (const auto &item : c.items) j[std::string(to_string(item.metric))] = item.bound;
  return j;
}

void read_finetune(Section &s, FinetuneOptions &ft) {
  const json *v = s.find("finetune");
  if (!v) return;
  Section f(*v, s.field("finetune"));
  f.read("frozen_epochs", ft.frozen_epochs);
  f.read("full_epochs", ft.full_epochs);
  f.read("learning_rate", ft.learning_rate);
  f.read("phase2_factor", ft.phase2_factor);
  f.read("batch_size", ft.batch_size);
  f.read("momentum", ft.momentum);
  std::string rule;
  f.read("optimizer", rule);
  if (!rule.empty()) ft.rule = parse_rule(rule, f.field("optimizer"));
  f.finish();
}

std::string resolve(const std::string &base, const std::string &p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base) / path).lexically_normal().string();
}

}  // namespace

ConstraintSet parse_constraint_set(std::string_view text) {
  ConstraintSet out;
  std::string t = trim(text);
  if (const auto colon = t.find(':'); colon != std::string::npos) {
    out.name = trim(std::string_view(t).substr(0, colon));
    t = trim(std::string_view(t).substr(colon + 1));
  }
  std::size_t pos = 0;
  while (pos <= t.size()) {
    const auto comma = t.find(',', pos);
    const std::string item = trim(std::string_view(t).substr(pos, comma == std::string::npos ? t.npos : comma - pos));
    pos = comma == std::string::npos ? t.size() + 1 : comma + 1;
    if (item.empty()) continue;
    const auto le = item.find("<=");
    if (le == std::string::npos) throw ParseError("expected metric<=bound in '" + item + "'", 0, "constraints");
    const std::string metric = trim(std::string_view(item).substr(0, le));
    Constraint c;
    if (metric == "flops") {
      c.metric = Metric::Flops;
    } else if (metric == "params") {
      c.metric = Metric::Params;
    } else {
      throw ParseError("unknown metric '" + metric + "'", 0, "constraints");
    }
    c.bound = parse_count(std::string_view(item).substr(le + 2), "constraints");
    out.items.push_back(c);
  }
  if (out.name.empty()) out.name = trim(text);
  return out;
}

RunConfig parse_run_config(std::string_view text, const std::string &base_dir) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig rc;
  Section top(j, "");
  top.read("space", rc.space_path);
  top.read("output_dir", rc.output_dir);
  top.read("seed", rc.seed);
  top.read("parallelism", rc.parallelism);
  if (rc.parallelism < 1) throw ParseError("must be at least 1", 0, "parallelism");

  if (const json *v = top.find("evaluator")) {
    Section e(*v, "evaluator");
    std::string kind = "synthetic";
    e.read("kind", kind);
    if (kind == "synthetic") {
      rc.evaluator.kind = EvaluatorSpec::Kind::Synthetic;
    } else if (kind == "plugin") {
      rc.evaluator.kind = EvaluatorSpec::Kind::Plugin;
    } else {
      throw ParseError("expected 'synthetic' or 'plugin'", 0, "evaluator.kind");
    }
    e.read("command", rc.evaluator.command);
    std::string mode = "multiplex";
    e.read("mode", mode);
    if (mode == "multiplex") {
      rc.evaluator.mode = PluginOptions::Mode::Multiplex;
    } else if (mode == "per_slot") {
      rc.evaluator.mode = PluginOptions::Mode::PerSlot;
    } else {
      throw ParseError("expected 'multiplex' or 'per_slot'", 0, "evaluator.mode");
    }
    e.read("timeout_s", rc.evaluator.timeout);
    e.finish();
    if (rc.evaluator.kind == EvaluatorSpec::Kind::Plugin && rc.evaluator.command.empty()) {
      throw ParseError("plugin evaluator needs a command", 0, "evaluator.command");
    }
  }

  auto &p = rc.pipeline;
  p.seed = rc.seed;
  if (const json *v = top.find("pretrain")) {
    Section s(*v, "pretrain");
    s.read("enabled", p.pretrain.enabled);
    s.read("validation_fraction", p.pretrain.validation_fraction);
    s.read("epochs", p.pretrain.train.epochs);
    s.read("batch_size", p.pretrain.train.batch_size);
    s.read("learning_rate", p.pretrain.train.learning_rate);
    s.read("momentum", p.pretrain.train.momentum);
    s.read("min_improvement", p.pretrain.train.min_improvement);
    s.read("patience", p.pretrain.train.patience);
    std::string rule;
    s.read("optimizer", rule);
    if (!rule.empty()) p.pretrain.train.rule = parse_rule(rule, s.field("optimizer"));
    s.finish();
    if (p.pretrain.validation_fraction < 0 || p.pretrain.validation_fraction >= 1) {
      throw ParseError("must be in [0, 1)", 0, "pretrain.validation_fraction");
    }
  }
  if (const json *v = top.find("stage2")) {
    Section s(*v, "stage2");
    s.read("pool_size", p.stage2.pool_size);
    s.read("batch", p.stage2.batch);
    s.read("iterations", p.stage2.iterations);
    s.read("early_stop_threshold", p.stage2.early_stop_threshold);
    s.read("full_budget", p.stage2.full_budget);
    if (const json *w = s.find("flop_window")) {
      if (!w->is_array() || w->size() != 2) throw ParseError("expected [low, high]", 0, "stage2.flop_window");
      p.stage2.flop_window = FlopWindow{count_value((*w)[0], "stage2.flop_window"),
                                        count_value((*w)[1], "stage2.flop_window")};
      if (p.stage2.flop_window->low > p.stage2.flop_window->high) {
        throw RangeError("low exceeds high", 0, "stage2.flop_window");
      }
    }
    if (const json *c = s.find("constraints")) p.stage2.constraints = constraint_from_json(*c, "stage2.constraints");
    read_finetune(s, p.stage2.finetune);
    s.finish();
  }
  if (p.stage2.batch < 1 || p.stage2.batch > p.stage2.pool_size) {
    throw ParseError("batch must be in [1, pool_size]", 0, "stage2.batch");
  }
  if (p.stage2.iterations < 1) throw ParseError("must be at least 1", 0, "stage2.iterations");
  if (!(p.stage2.early_stop_threshold > 0 && p.stage2.early_stop_threshold <= 1)) {
    throw ParseError("must be in (0, 1]", 0, "stage2.early_stop_threshold");
  }
  if (p.stage2.full_budget < 1) throw ParseError("must be at least 1", 0, "stage2.full_budget");

  if (const json *v = top.find("stage3")) {
    Section s(*v, "stage3");
    s.read("p_best", p.stage3.p_best);
    s.read("q_random", p.stage3.q_random);
    s.read("children", p.stage3.children);
    s.read("top_k", p.stage3.top_k);
    s.read("epsilon", p.stage3.epsilon);
    s.read("initial_rate", p.stage3.initial_rate);
    s.read("min_rate", p.stage3.min_rate);
    s.read("max_rate", p.stage3.max_rate);
    s.read("max_generations", p.stage3.max_generations);
    s.read("max_retries", p.stage3.max_retries);
    s.finish();
  }
  if (p.stage3.p_best + p.stage3.q_random < p.stage3.top_k) {
    throw ParseError("p_best + q_random must be at least top_k", 0, "stage3.top_k");
  }
  if (!(p.stage3.epsilon > 0)) throw ParseError("must be positive", 0, "stage3.epsilon");
  if (!(p.stage3.initial_rate > 0 && p.stage3.initial_rate <= 1)) {
    throw ParseError("must be in (0, 1]", 0, "stage3.initial_rate");
  }

  if (const json *v = top.find("constraint_sets")) {
    if (!v->is_array()) throw ParseError("expected a list", 0, "constraint_sets");
    for (std::size_t i = 0; i < v->size(); ++i) {
      p.constraint_sets.push_back(constraint_from_json((*v)[i], "constraint_sets[" + std::to_string(i) + "]"));
    }
  }
  top.finish();
  rc.space_path = resolve(base_dir, rc.space_path);
  rc.output_dir = resolve(base_dir, rc.output_dir);
  return rc;
}

RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_run_config(buf.str(), dir.empty() ? "." : dir.string());
}

json to_json(const RunConfig &rc) {
  const auto &p = rc.pipeline;
  json sets = json::array();
  for (const auto &c : p.constraint_sets) sets.push_back(constraint_json(c));
  json window = nullptr;
  if (p.stage2.flop_window) window = {p.stage2.flop_window->low, p.stage2.flop_window->high};
  const auto &ft = p.stage2.finetune;
  return {{"space", rc.space_path},
          {"output_dir", rc.output_dir},
          {"seed", rc.seed},
          {"parallelism", rc.parallelism},
          {"evaluator",
           {{"kind", rc.evaluator.kind == EvaluatorSpec::Kind::Synthetic ? "synthetic" : "plugin"},
            {"command", rc.evaluator.command},
            {"mode", rc.evaluator.mode == PluginOptions::Mode::Multiplex ? "multiplex" : "per_slot"},
            {"timeout_s", rc.evaluator.timeout}}},
          {"pretrain",
           {{"enabled", p.pretrain.enabled},
            {"validation_fraction", p.pretrain.validation_fraction},
            {"epochs", p.pretrain.train.epochs},
            {"batch_size", p.pretrain.train.batch_size},
            {"learning_rate", p.pretrain.train.learning_rate},
            {"momentum", p.pretrain.train.momentum},
            {"min_improvement", p.pretrain.train.min_improvement},
            {"patience", p.pretrain.train.patience},
            {"optimizer", rule_name(p.pretrain.train.rule)}}},
          {"stage2",
           {{"pool_size", p.stage2.pool_size},
            {"batch", p.stage2.batch},
            {"iterations", p.stage2.iterations},
            {"early_stop_threshold", p.stage2.early_stop_threshold},
            {"full_budget", p.stage2.full_budget},
            {"flop_window", window},
            {"constraints", constraint_json(p.stage2.constraints)},
            {"finetune",
             {{"frozen_epochs", ft.frozen_epochs},
              {"full_epochs", ft.full_epochs},
              {"learning_rate", ft.learning_rate},
              {"phase2_factor", ft.phase2_factor},
              {"batch_size", ft.batch_size},
              {"momentum", ft.momentum},
              {"optimizer", rule_name(ft.rule)}}}}},
          {"stage3",
           {{"p_best", p.stage3.p_best},
            {"q_random", p.stage3.q_random},
            {"children", p.stage3.children},
            {"top_k", p.stage3.top_k},
            {"epsilon", p.stage3.epsilon},
            {"initial_rate", p.stage3.initial_rate},
            {"min_rate", p.stage3.min_rate},
            {"max_rate", p.stage3.max_rate},
            {"max_generations", p.stage3.max_generations},
            {"max_retries", p.stage3.max_retries}}},
          {"constraint_sets", sets}};
}

std::unique_ptr<Evaluator> make_evaluator(const RunConfig &config, const SearchSpace &space) {
  if (config.evaluator.kind == EvaluatorSpec::Kind::Synthetic) {
    return std::make_unique<SyntheticEvaluator>(space, config.parallelism);
  }
  PluginOptions o;
  o.command = config.evaluator.command;
  o.parallelism = config.parallelism;
  o.mode = config.evaluator.mode;
  o.timeout = config.evaluator.timeout;
  return std::make_unique<PluginEvaluator>(std::move(o));
}

}  // namespace nars
