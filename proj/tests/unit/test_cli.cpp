#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args`; stderr goes to `err_file` when given.
Run cli(const std::string &args, const std::string &err_file = "/dev/null") {
  const std::string cmd = std::string("\"") + NARS_CLI + "\" " + args + " 2>" + err_file;
  Run r;
  FILE *p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &stem)
      : path(fs::temp_directory_path() / (stem + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string &name) const { return (path / name).string(); }
};

void write(const std::string &path, const std::string &text) { std::ofstream(path) << text; }

const std::string kToy = testutil::kSpaces + "/toy.space";

std::string toy_config(const std::string &extra = "") {
  return "{ // small run\n  \"space\": \"" + kToy +
         "\", \"seed\": 3, \"parallelism\": 2,\n"
         "  \"stage2\": {\"pool_size\": 800, \"batch\": 8, \"iterations\": 3, \"full_budget\": 12,\n"
         "             \"finetune\": {\"frozen_epochs\": 20, \"full_epochs\": 20}},\n"
         "  \"constraint_sets\": [{\"name\": \"a\", \"flops\": \"40M\"}, {\"name\": \"b\", \"flops\": \"80M\"}]" +
         extra + " }\n";
}

std::size_t lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("space-info") {
  const auto r = cli("space-info \"" + testutil::kSpaces + "/joint.space\" --json");
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["cardinality"]["arch_log10"].get<double>() == doctest::Approx(18.3913).epsilon(1e-5));
  CHECK(j["stages"].size() == 10);

  TempDir d("nars-cli-info");
  write(d / "fc.space",
        "[space]\nname = fc\ninput_channels = 1984\nresolution = 1\n[stage]\nlabel = fc\nblock = FC\n"
        "kernel = -\nexpansion = -\nchannels = 1000\ndepth = 1\nstride = -\nse = -\nact = -\n");
  const auto one = json::parse(cli("space-info \"" + (d / "fc.space") + "\" --json").out);
  CHECK(one["cardinality"]["arch_log10"].get<double>() == 0.0);
  CHECK(one["cardinality"]["recipe_log10"].get<double>() == 0.0);

  CHECK(cli("space-info /nonexistent.space").code == 3);
  CHECK(cli("space-info").code == 2);
  CHECK(cli("no-such-command").code == 2);
}

TEST_CASE("cost") {
  TempDir d("nars-cli-cost");
  write(d / "fc.space",
        "[space]\nname = fc\ninput_channels = 1984\nresolution = 1\n[stage]\nlabel = fc\nblock = FC\n"
        "kernel = -\nexpansion = -\nchannels = 1000\ndepth = 1\nstride = -\nse = -\nact = -\n");
  const auto r = cli("cost \"" + (d / "fc.space") + "\" --format csv");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("total,,1984000,1985000") != std::string::npos);

  const auto b = cli("cost \"" + testutil::kSpaces + "/baseline.space\" --format both");
  CHECK(b.code == 0);
  CHECK(b.out.find("total") != std::string::npos);

  // Searchable architecture fields: not a single architecture.
  CHECK(cli("cost \"" + kToy + "\"").code != 0);
}

TEST_CASE("pool and pretrain") {
  TempDir d("nars-cli-pool");
  CHECK(cli("pool --space \"" + kToy + "\" --n 0 --out \"" + (d / "p") + "\"").code == 2);

  const auto a = cli("pool --space \"" + kToy + "\" --n 100 --seed 4 --out \"" + (d / "p") + "\"");
  REQUIRE(a.code == 0);
  const auto info = json::parse(a.out);
  const auto path = info["path"].get<std::string>();
  CHECK(info["records"] == 100);
  const auto first = slurp(path);
  CHECK(lines(first) == 100);

  const auto b = cli("pool --space \"" + kToy + "\" --n 100 --seed 4 --out \"" + (d / "q") + "\"");
  CHECK(slurp(json::parse(b.out)["path"].get<std::string>()) == first);

  const auto pre = cli("pretrain --space \"" + kToy + "\" --pool \"" + path + "\" --epochs 5 --out \"" +
                        (d / "pred.json") + "\"");
  CHECK(pre.code == 0);
  CHECK(fs::exists(d / "pred.json"));
  const auto report = json::parse(pre.out);
  CHECK(report["train_mse"].get<double>() >= 0);
  CHECK(report["val_mse"].get<double>() >= 0);

  write(d / "bad.jsonl", "{\"genes\": [1, 2\n");
  CHECK(cli("pretrain --space \"" + kToy + "\" --pool \"" + (d / "bad.jsonl") + "\" --out \"" +
             (d / "x.json") + "\"")
            .code == 3);
}

TEST_CASE("run, force and export") {
  TempDir d("nars-cli-run");
  write(d / "run.json", toy_config());
  const std::string base = "--config \"" + (d / "run.json") + "\" --out \"" + (d / "out") + "\"";

  CHECK(cli("export \"" + (d / "out") + "\"").out == "source,candidate_id,flops,params,predicted_score,measured_accuracy\n");

  REQUIRE(cli("run " + base).code == 0);
  for (const char *f : {"config.resolved.json", "results.json", "results.csv", "dataset.csv", "predictor.json",
                        "stage2.ckpt.json", "run.done"}) {
    CHECK_MESSAGE(fs::exists(d.path / "out" / f), f);
  }
  const auto results = slurp(d.path / "out" / "results.json");
  CHECK(cli("run " + base).code == 2);
  CHECK(cli("run " + base + " --force").code == 0);
  CHECK(slurp(d.path / "out" / "results.json") == results);

  const auto j = json::parse(results);
  std::size_t candidates = 0;
  for (const auto &r : j["results"]) candidates += r["top"].size();
  const auto exported = cli("export \"" + (d / "out") + "\"");
  CHECK(exported.code == 0);
  CHECK(lines(exported.out) == 1 + candidates + j["dataset"].size());
}

TEST_CASE("interrupted search resumes") {
  TempDir d("nars-cli-resume");
  write(d / "run.json", toy_config());
  const std::string cfg = "--config \"" + (d / "run.json") + "\"";
  REQUIRE(cli("search " + cfg + " --out \"" + (d / "whole") + "\"").code == 0);
  REQUIRE(cli("search " + cfg + " --out \"" + (d / "part") + "\" --stop-after 1").code == 0);
  CHECK(slurp(d.path / "part" / "stage2.ckpt.json") != slurp(d.path / "whole" / "stage2.ckpt.json"));
  REQUIRE(cli("search " + cfg + " --out \"" + (d / "part") + "\"").code == 0);
  CHECK(slurp(d.path / "part" / "stage2.ckpt.json") == slurp(d.path / "whole" / "stage2.ckpt.json"));

  const auto ev = cli("evolve " + cfg + " --out \"" + (d / "part") +
                       "\" --constraints 'flops<=30M' --constraints 'flops<=45M' --constraints 'flops<=60M'"
                       " --constraints 'flops<=90M'");
  CHECK(ev.code == 0);
  const auto j = json::parse(slurp(d.path / "part" / "results.json"));
  CHECK(j["results"].size() == 4);
}

TEST_CASE("config errors") {
  TempDir d("nars-cli-config");
  write(d / "bad.json", toy_config(", \"bogus\": 1"));
  const auto r = cli("run --config \"" + (d / "bad.json") + "\" --out \"" + (d / "o") + "\"", d / "err.txt");
  CHECK(r.code == 2);
  const auto err = json::parse(slurp(d.path / "err.txt"));
  CHECK(err["error"]["code"] == 2);
  CHECK(err["error"]["field"].get<std::string>().find("bogus") != std::string::npos);

  write(d / "broken.json", "{ \"space\": ");
  CHECK(cli("run --config \"" + (d / "broken.json") + "\"").code == 2);
}
