#include "nars/cost_model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nars/error.hpp"

namespace nars {
namespace {

using u64 = std::uint64_t;

int out_size(int in, int stride) { return (in + stride - 1) / stride; }

u64 expanded_width(int c_in, double e) {
  if (e == 1.0) return static_cast<u64>(c_in);
  const long mid = std::lround(c_in * e);
  return static_cast<u64>(mid < 1 ? 1 : mid);
}

u64 se_width(u64 mid) {
  const long se = std::lround(static_cast<double>(mid) / 4.0 / 8.0) * 8;
  return static_cast<u64>(se < 8 ? 8 : se);
}

u64 sq(int r) { return static_cast<u64>(r) * static_cast<u64>(r); }

// Walks the network, reporting each layer to `emit(label_fn, out_res, flops,
// params)`. Labels are built lazily so the totals-only path stays cheap.
template <class Emit>
void walk(const ArchConfig &arch, Emit &&emit) {
  int res = arch.resolution;
  int c_in = arch.input_channels;
  for (std::size_t s = 0; s < arch.stages.size(); ++s) {
    const auto &st = arch.stages[s];
    const int c_out = st.channels;
    auto label = [&](int block, const char *op) {
      return "stage" + std::to_string(s) + "." + std::string(to_string(st.block)) + ".b" +
             std::to_string(block) + "." + op;
    };
    switch (st.block) {
      case BlockKind::Conv: {
        const u64 k2 = static_cast<u64>(st.kernel) * static_cast<u64>(st.kernel);
        for (int b = 0; b < st.depth; ++b) {
          const int r = out_size(res, b == 0 ? st.stride : 1);
          const u64 params = static_cast<u64>(c_in) * static_cast<u64>(c_out) * k2;
          emit([&] { return label(b, "conv"); }, r, sq(r) * params, params);
          res = r;
          c_in = c_out;
        }
        break;
      }
      case BlockKind::MBConv: {
        const u64 k2 = static_cast<u64>(st.kernel) * static_cast<u64>(st.kernel);
        for (int b = 0; b < st.depth; ++b) {
          const double e = b == 0 ? st.expansion_first : st.expansion_rest;
          const u64 mid = expanded_width(c_in, e);
          const int r = out_size(res, b == 0 ? st.stride : 1);
          if (e != 1.0) {
            const u64 params = static_cast<u64>(c_in) * mid;
            emit([&] { return label(b, "expand"); }, res, sq(res) * params, params);
          }
          emit([&] { return label(b, "dw"); }, r, sq(r) * mid * k2, mid * k2);
          if (st.se) {
            const u64 se = se_width(mid);
            emit([&] { return label(b, "se"); }, r, 2 * mid * se + sq(r) * mid, 2 * mid * se + se + mid);
          }
          const u64 params = mid * static_cast<u64>(c_out);
          emit([&] { return label(b, "project"); }, r, sq(r) * params, params);
          res = r;
          c_in = c_out;
        }
        break;
      }
      case BlockKind::MBPool: {
        const u64 mid = expanded_width(c_in, st.expansion_first);
        const u64 expand = static_cast<u64>(c_in) * mid;
        emit([&] { return label(0, "expand"); }, res, sq(res) * expand, expand);
        if (st.kernel > 0) {
          const u64 k2 = static_cast<u64>(st.kernel) * static_cast<u64>(st.kernel);
          emit([&] { return label(0, "dw"); }, res, sq(res) * mid * k2, mid * k2);
        }
        res = 1;
        const u64 params = mid * static_cast<u64>(c_out);
        emit([&] { return label(0, "pool_project"); }, 1, params, params);
        c_in = c_out;
        break;
      }
      case BlockKind::FC: {
        const u64 weights = static_cast<u64>(c_in) * static_cast<u64>(c_out);
        res = 1;
        emit([&] { return label(0, "fc"); }, 1, weights, weights + static_cast<u64>(c_out));
        c_in = c_out;
        break;
      }
      case BlockKind::Skip: {
        if (c_in != c_out) {
          const u64 params = static_cast<u64>(c_in) * static_cast<u64>(c_out);
          emit([&] { return label(0, "skip_proj"); }, res, sq(res) * params, params);
        } else {
          emit([&] { return label(0, "identity"); }, res, 0, 0);
        }
        c_in = c_out;
        break;
      }
    }
  }
}

}  // namespace

CostReport cost(const ArchConfig &arch) {
  CostReport report;
  walk(arch, [&](auto &&label, int r, u64 flops, u64 params) {
    report.per_layer.push_back({label(), r, flops, params});
    report.total_flops += flops;
    report.total_params += params;
  });
  return report;
}

CostTotals cost_totals(const ArchConfig &arch) {
  CostTotals t;
  walk(arch, [&](auto &&, int, u64 flops, u64 params) {
    t.flops += flops;
    t.params += params;
  });
  return t;
}

std::string_view to_string(Metric metric) { return metric == Metric::Flops ? "flops" : "params"; }

ConstraintCheck check_constraints(const CostTotals &totals, const ConstraintSet &constraints) {
  ConstraintCheck out;
  for (const auto &c : constraints.items) {
    const u64 value = c.metric == Metric::Flops ? totals.flops : totals.params;
    if (value > c.bound) {
      out.satisfied = false;
      out.violations.push_back({c.metric, value, c.bound});
    }
  }
  return out;
}

ConstraintCheck check_constraints(const ArchConfig &arch, const ConstraintSet &constraints) {
  return check_constraints(cost_totals(arch), constraints);
}

bool satisfies(const CostTotals &totals, const ConstraintSet &constraints) {
  for (const auto &c : constraints.items) {
    if ((c.metric == Metric::Flops ? totals.flops : totals.params) > c.bound) return false;
  }
  return true;
}

std::string format_cost_table(const CostReport &report) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-32s %6s %16s %12s\n", "layer", "res", "flops(MAC)", "params");
  out << buf;
  for (const auto &l : report.per_layer) {
    std::snprintf(buf, sizeof buf, "%-32s %6d %16llu %12llu\n", l.label.c_str(), l.out_resolution,
                  static_cast<unsigned long long>(l.flops), static_cast<unsigned long long>(l.params));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-32s %6s %16llu %12llu\n", "total", "",
                static_cast<unsigned long long>(report.total_flops),
                static_cast<unsigned long long>(report.total_params));
  out << buf;
  return out.str();
}

std::string format_cost_csv(const CostReport &report) {
  std::ostringstream out;
  out << "layer,out_resolution,flops,params\n";
  for (const auto &l : report.per_layer) {
    out << l.label << ',' << l.out_resolution << ',' << l.flops << ',' << l.params << '\n';
  }
  out << "total,," << report.total_flops << ',' << report.total_params << '\n';
  return out.str();
}

}  // namespace nars
