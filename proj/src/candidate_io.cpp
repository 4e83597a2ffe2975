#include "nars/candidate_io.hpp"

#include <istream>
#include <ostream>

#include "nars/error.hpp"

namespace nars {

using nlohmann::json;

namespace {

template <class T>
T field(const json &j, const char *key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0, key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ParseError(std::string("bad field '") + key + "': " + e.what(), 0, key);
  }
}

}  // namespace

json to_json(const ArchConfig &arch) {
  json stages = json::array();
  for (const auto &st : arch.stages) {
    stages.push_back({{"block", to_string(st.block)},
                      {"kernel", st.kernel},
                      {"expansion_first", st.expansion_first},
                      {"expansion_rest", st.expansion_rest},
                      {"channels", st.channels},
                      {"depth", st.depth},
                      {"stride", st.stride},
                      {"se", st.se},
                      {"act", to_string(st.act)}});
  }
  return {{"resolution", arch.resolution}, {"input_channels", arch.input_channels}, {"stages", stages}};
}

json to_json(const RecipeConfig &r) {
  return {{"lr", r.lr},
          {"optimizer", to_string(r.optimizer)},
          {"ema", r.ema},
          {"dropout", r.dropout},
          {"stochastic_depth", r.stochastic_depth},
          {"mixup", r.mixup},
          {"weight_decay", r.weight_decay}};
}

json to_json(const Candidate &c) { return {{"arch", to_json(c.arch)}, {"recipe", to_json(c.recipe)}}; }

ArchConfig arch_from_json(const json &j) {
  ArchConfig arch;
  arch.resolution = field<int>(j, "resolution");
  arch.input_channels = field<int>(j, "input_channels");
  for (const auto &s : field<json>(j, "stages")) {
    StageConfig st;
    const auto block = parse_block_kind(field<std::string>(s, "block"));
    if (!block) throw ParseError("unknown block kind", 0, "block");
    st.block = *block;
    st.kernel = field<int>(s, "kernel");
    st.expansion_first = field<double>(s, "expansion_first");
    st.expansion_rest = field<double>(s, "expansion_rest");
    st.channels = field<int>(s, "channels");
    st.depth = field<int>(s, "depth");
    st.stride = field<int>(s, "stride");
    st.se = field<bool>(s, "se");
    const auto act = parse_activation(field<std::string>(s, "act"));
    if (!act) throw ParseError("unknown activation", 0, "act");
    st.act = *act;
    arch.stages.push_back(st);
  }
  return arch;
}

RecipeConfig recipe_from_json(const json &j) {
  RecipeConfig r;
  r.lr = field<double>(j, "lr");
  const auto opt = parse_optimizer(field<std::string>(j, "optimizer"));
  if (!opt) throw ParseError("unknown optimizer", 0, "optimizer");
  r.optimizer = *opt;
  r.ema = field<bool>(j, "ema");
  r.dropout = field<double>(j, "dropout");
  r.stochastic_depth = field<double>(j, "stochastic_depth");
  r.mixup = field<double>(j, "mixup");
  r.weight_decay = field<double>(j, "weight_decay");
  return r;
}

Candidate candidate_from_json(const json &j) {
  return {arch_from_json(field<json>(j, "arch")), recipe_from_json(field<json>(j, "recipe"))};
}

void write_candidates(std::ostream &out, std::span<const Candidate> candidates) {
  for (const auto &c : candidates) out << to_json(c).dump() << '\n';
}

std::vector<Candidate> read_candidates(std::istream &in) {
  std::vector<Candidate> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(candidate_from_json(json::parse(line)));
    } catch (const json::exception &e) {
      throw ParseError(std::string("invalid candidate record: ") + e.what(), line_no);
    } catch (const ParseError &e) {
      throw ParseError(e.what(), line_no, e.field());
    }
  }
  return out;
}

}  // namespace nars
