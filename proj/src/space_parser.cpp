// Space-definition file parser.
//
//   # comment
//   [space]                       name, input_channels, resolution
//   [stage]                       one section per table row
//   block = MBConv
//   kernel = [3, 5]               bracket list: categorical choices
//   expansion = (4, 7)^1 / (2, 5)^2
//   channels = (56, 84, 4)        (low, high[, step]) range, step defaults to 1
//   depth = (4, 8)
//   stride = 2
//   se = N
//   act = hswish
//   [recipe]
//   lr = (20, 30) * 1e-3          grid in table units times an SI scale
//   optimizer = [RMSProp, SGD]
//   ema = [true, false]
//   sgd_lr_multiplier = 4
//
// "-" marks a field that does not apply to the block.

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "nars/error.hpp"
#include "nars/search_space.hpp"

namespace nars {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Field {
  std::string key;
  std::string value;
  int line = 0;
};

class FieldReader {
 public:
  explicit FieldReader(const Field &f) : f_(f) {}

  [[noreturn]] void fail(const std::string &msg) const { throw ParseError(msg, f_.line, f_.key); }

  double number(std::string_view text) const {
    text = trim(text);
    double v = 0;
    const auto *end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
      fail("expected a number in field '" + f_.key + "', got '" + std::string(text) + "'");
    }
    return v;
  }

  std::vector<std::string_view> split_list(std::string_view inner) const {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const auto comma = inner.find(',', start);
      parts.push_back(trim(inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    for (auto p : parts) {
      if (p.empty()) fail("empty element in list for field '" + f_.key + "'");
    }
    return parts;
  }

  // "-", number, (lo, hi[, step]) or [a, b, ...].
  Grid grid(std::string_view text) const {
    text = trim(text);
    if (text == "-") return {};
    if (text.empty()) fail("missing value for field '" + f_.key + "'");
    if (text.front() == '(') {
      if (text.back() != ')') fail("unterminated range in field '" + f_.key + "'");
      const auto parts = split_list(text.substr(1, text.size() - 2));
      if (parts.size() != 2 && parts.size() != 3) fail("range needs two or three values");
      const double lo = number(parts[0]);
      const double hi = number(parts[1]);
      const double step = parts.size() == 3 ? number(parts[2]) : 1.0;
      if (lo > hi) {
        throw RangeError("range inversion in field '" + f_.key + "': low " + std::string(parts[0]) +
                             " exceeds high " + std::string(parts[1]),
                         f_.line, f_.key);
      }
      if (step <= 0) throw RangeError("non-positive step in field '" + f_.key + "'", f_.line, f_.key);
      return Grid::range(lo, hi, step);
    }
    if (text.front() == '[') {
      if (text.back() != ']') fail("unterminated choice list in field '" + f_.key + "'");
      std::vector<double> values;
      for (auto p : split_list(text.substr(1, text.size() - 2))) values.push_back(number(p));
      return Grid::choices(std::move(values));
    }
    return Grid::fixed(number(text));
  }

  std::vector<std::string> words(std::string_view text) const {
    text = trim(text);
    if (!text.empty() && text.front() == '[') {
      if (text.back() != ']') fail("unterminated choice list in field '" + f_.key + "'");
      std::vector<std::string> out;
      for (auto p : split_list(text.substr(1, text.size() - 2))) out.emplace_back(p);
      return out;
    }
    return {std::string(text)};
  }

  // grid followed by an optional "^group" tag.
  std::pair<Grid, std::string> tagged_grid(std::string_view text) const {
    text = trim(text);
    const auto caret = text.rfind('^');
    if (caret == std::string_view::npos || text.find_first_of(")]", caret) != std::string_view::npos) {
      return {grid(text), {}};
    }
    const auto tag = trim(text.substr(caret + 1));
    if (tag.empty()) fail("empty shared-group tag in field '" + f_.key + "'");
    return {grid(text.substr(0, caret)), std::string(tag)};
  }

  bool flag(std::string_view text) const {
    text = trim(text);
    if (text == "Y" || text == "y" || text == "true" || text == "yes") return true;
    if (text == "N" || text == "n" || text == "false" || text == "no" || text == "-") return false;
    fail("expected Y/N in field '" + f_.key + "'");
  }

  int integer(std::string_view text) const {
    const double v = number(text);
    if (v != std::floor(v)) fail("expected an integer in field '" + f_.key + "'");
    return static_cast<int>(v);
  }

 private:
  const Field &f_;
};

ScaledGrid scaled_grid(const Field &f) {
  FieldReader r(f);
  std::string_view text = f.value;
  ScaledGrid out;
  const auto star = text.find('*');
  if (star != std::string_view::npos) {
    out.scale = r.number(text.substr(star + 1));
    if (out.scale <= 0) r.fail("scale must be positive");
    text = text.substr(0, star);
  }
  out.grid = r.grid(text);
  if (out.grid.empty()) r.fail("recipe field '" + f.key + "' cannot be '-'");
  return out;
}

void apply_stage_field(StageSpec &st, const Field &f) {
  FieldReader r(f);
  const std::string_view v = f.value;
  if (f.key == "label") {
    st.label = std::string(trim(v));
  } else if (f.key == "block") {
    const auto kind = parse_block_kind(trim(v));
    if (!kind) r.fail("unknown block kind '" + std::string(trim(v)) + "'");
    st.block = *kind;
  } else if (f.key == "kernel") {
    st.kernel = r.grid(v);
  } else if (f.key == "expansion") {
    const auto slash = v.find('/');
    if (slash == std::string_view::npos) {
      std::tie(st.expansion_first, st.group_first) = r.tagged_grid(v);
      st.expansion_rest = st.expansion_first;
      st.expansion_tied = true;
    } else {
      std::tie(st.expansion_first, st.group_first) = r.tagged_grid(v.substr(0, slash));
      std::tie(st.expansion_rest, st.group_rest) = r.tagged_grid(v.substr(slash + 1));
      st.expansion_tied = false;
      if (st.expansion_first.empty() || st.expansion_rest.empty()) r.fail("both sides of '/' need a value");
    }
  } else if (f.key == "channels") {
    st.channels = r.grid(v);
  } else if (f.key == "depth") {
    st.depth = r.grid(v);
  } else if (f.key == "stride") {
    st.stride = trim(v) == "-" ? 1 : r.integer(v);
  } else if (f.key == "se") {
    st.se = r.flag(v);
  } else if (f.key == "act") {
    const auto act = parse_activation(trim(v));
    if (!act) r.fail("unknown activation '" + std::string(trim(v)) + "'");
    st.act = *act;
  } else {
    r.fail("unknown stage field '" + f.key + "'");
  }
}

void apply_recipe_field(RecipeRanges &rec, const Field &f) {
  FieldReader r(f);
  if (f.key == "lr") {
    rec.lr = scaled_grid(f);
  } else if (f.key == "dropout") {
    rec.dropout = scaled_grid(f);
  } else if (f.key == "stochastic_depth") {
    rec.stochastic_depth = scaled_grid(f);
  } else if (f.key == "mixup") {
    rec.mixup = scaled_grid(f);
  } else if (f.key == "weight_decay") {
    rec.weight_decay = scaled_grid(f);
  } else if (f.key == "optimizer") {
    rec.optimizers.clear();
    for (const auto &w : r.words(f.value)) {
      const auto opt = parse_optimizer(w);
      if (!opt) r.fail("unknown optimizer '" + w + "'");
      rec.optimizers.push_back(*opt);
    }
  } else if (f.key == "ema") {
    rec.ema.clear();
    for (const auto &w : r.words(f.value)) rec.ema.push_back(r.flag(w));
  } else if (f.key == "sgd_lr_multiplier") {
    rec.sgd_lr_multiplier = r.number(f.value);
  } else {
    r.fail("unknown recipe field '" + f.key + "'");
  }
}

}  // namespace

SpaceDef parse_space_def(std::string_view text) {
  SpaceDef def;
  // Recipe defaults for architecture-only files: a single fixed recipe.
  def.recipe.lr.grid = Grid::fixed(0);
  def.recipe.optimizers = {Optimizer::RMSProp};
  def.recipe.ema = {false};
  def.recipe.dropout.grid = Grid::fixed(0);
  def.recipe.stochastic_depth.grid = Grid::fixed(0);
  def.recipe.mixup.grid = Grid::fixed(0);
  def.recipe.weight_decay.grid = Grid::fixed(0);

  enum class Section { None, Space, Stage, Recipe } section = Section::None;
  bool stage_has_block = false;
  auto close_stage = [&](int line) {
    if (section == Section::Stage && !stage_has_block) {
      throw ParseError("stage section without a 'block' field", line, "block");
    }
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header", line_no);
      const auto name = trim(line.substr(1, line.size() - 2));
      close_stage(line_no);
      if (name == "space") {
        section = Section::Space;
      } else if (name == "stage") {
        section = Section::Stage;
        stage_has_block = false;
        StageSpec st;
        st.label = "stage" + std::to_string(def.stages.size());
        st.line = line_no;
        def.stages.push_back(std::move(st));
      } else if (name == "recipe") {
        section = Section::Recipe;
      } else {
        throw ParseError("unknown section '" + std::string(name) + "'", line_no);
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    Field f{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
    if (f.key.empty()) throw ParseError("empty key", line_no);

    switch (section) {
      case Section::None:
        throw ParseError("field outside of a section", line_no, f.key);
      case Section::Space: {
        FieldReader r(f);
        if (f.key == "name") {
          def.name = f.value;
        } else if (f.key == "input_channels") {
          def.input_channels = r.integer(f.value);
        } else if (f.key == "resolution") {
          def.resolution = r.grid(f.value);
        } else {
          r.fail("unknown space field '" + f.key + "'");
        }
        break;
      }
      case Section::Stage:
        if (f.key == "block") stage_has_block = true;
        apply_stage_field(def.stages.back(), f);
        break;
      case Section::Recipe:
        apply_recipe_field(def.recipe, f);
        break;
    }
  }
  close_stage(line_no);
  if (def.resolution.empty()) throw ParseError("missing [space] resolution", 0, "resolution");
  if (def.stages.empty()) throw ParseError("no [stage] sections", 0, "stage");
  return def;
}

}  // namespace nars
