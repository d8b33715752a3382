#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "stellbench/boundary_io.hpp"
#include "stellbench/dataset.hpp"
#include "stellbench/geometry.hpp"
#include "support.hpp"

using namespace stellbench;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(STELLBENCH_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string boundary_lines(int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += boundary_to_json(make_rotating_ellipse(3, 3.5 + i, 1.4, 0.0)).dump() + "\n";
  return out;
}

std::string stub_oracle(const std::string& flags) {
  return "'subprocess:" + std::string(STUB_ADAPTER_PATH) + " " + flags + "'";
}

}  // namespace

TEST_CASE("help and usage errors") {
  auto r = run("--help");
  CHECK(r.code == 0);
  for (const char* sub : {"evaluate", "score", "optimize", "pareto", "sample-targets", "genmodel", "dataset", "plot-trace"})
    CHECK(r.output.find(sub) != std::string::npos);
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  r = run("score --problem geometric");
  CHECK(r.code == 2);
  CHECK(r.output.find("--boundaries") != std::string::npos);
  CHECK(run("score --problem nonsense --boundaries x --out y").code == 2);
  CHECK(run("score --help").code == 0);
  CHECK(run("genmodel").code == 2);
}

TEST_CASE("evaluate writes metrics and fails on a bad boundary") {
  stellbench::testing::TempDir dir("cli");
  write_text(dir.file("b.json"), boundary_to_json(make_rotating_ellipse(3, 6.0, 1.5, 0.0)).dump());
  auto r = run("evaluate --boundary " + dir.file("b.json") + " --oracle synthetic --out " + dir.file("e.json"));
  CHECK(r.code == 0);
  const auto j = read_json(dir.file("e.json"));
  CHECK(j.at("ok") == true);
  CHECK(j.at("metrics").at("aspect_ratio").get<double>() == doctest::Approx(6.0).epsilon(1e-3));
  CHECK_FALSE(j.at("metrics").contains("boozer_b"));
  CHECK(j.at("geometry_consistent") == true);

  auto fat = make_boundary({3, 2, 2, true});
  fat.r(1, 0) = 0.9;
  fat.z(1, 0) = 0.9;
  write_text(dir.file("fat.json"), boundary_to_json(fat).dump());
  r = run("evaluate --boundary " + dir.file("fat.json") + " --oracle synthetic --out " + dir.file("f.json"));
  CHECK(r.code == 1);
  CHECK(read_json(dir.file("f.json")).at("error") == "solver_failed");
  CHECK(run("evaluate --boundary " + dir.file("missing.json")).code == 1);
  CHECK(run("evaluate --boundary " + dir.file("b.json") + " --oracle warp-drive").code == 1);
}

TEST_CASE("score writes a byte-stable report") {
  stellbench::testing::TempDir dir("cli");
  write_text(dir.file("b.jsonl"), boundary_lines(3) + "{\"broken\": true}\n");
  auto r = run("score --problem geometric --boundaries " + dir.file("b.jsonl") + " --oracle synthetic --out " +
               dir.file("r1.json"));
  CHECK(r.code == 0);
  CHECK(run("score --problem geometric --boundaries " + dir.file("b.jsonl") + " --oracle synthetic --out " +
            dir.file("r2.json"))
            .code == 0);
  CHECK(slurp(dir.file("r1.json")) == slurp(dir.file("r2.json")));
  const auto j = read_json(dir.file("r1.json"));
  CHECK(j.at("complete") == true);
  REQUIRE(j.at("results").size() == 4);
  CHECK(j["results"][3]["evaluation"]["error"] == "protocol");
  CHECK(j.contains("best_score"));

  CHECK(run("score --problem mhd --boundaries " + dir.file("b.jsonl") + " --oracle synthetic --out " +
            dir.file("m.json"))
            .code == 0);
  const auto m = read_json(dir.file("m.json"));
  CHECK(m.contains("pareto_set"));
  CHECK(m.contains("hypervolume"));
}

TEST_CASE("score through the adapter stub and a crashing adapter") {
  stellbench::testing::TempDir dir("cli");
  write_text(dir.file("b.jsonl"), boundary_lines(5));
  auto r = run("score --problem geometric --boundaries " + dir.file("b.jsonl") + " --oracle " + stub_oracle("") +
               " --out " + dir.file("ok.json"));
  CHECK(r.code == 0);
  CHECK(run("score --problem geometric --boundaries " + dir.file("b.jsonl") + " --oracle synthetic --out " +
            dir.file("local.json"))
            .code == 0);
  const auto remote = read_json(dir.file("ok.json"));
  const auto local = read_json(dir.file("local.json"));
  CHECK(remote["results"] == local["results"]);

  r = run("score --problem geometric --boundaries " + dir.file("b.jsonl") + " --oracle " +
          stub_oracle("--crash-after 2") + " --out " + dir.file("partial.json"));
  CHECK(r.code == 1);
  CHECK(r.output.find("oracle unavailable") != std::string::npos);
  const auto partial = read_json(dir.file("partial.json"));
  CHECK(partial.at("complete") == false);
  CHECK(partial.at("results").size() == 2);
  CHECK(partial.at("evaluated") == 2);
  CHECK(partial.contains("error"));
}

TEST_CASE("optimize emits a trace that plot-trace converts") {
  stellbench::testing::TempDir dir("cli");
  write_text(dir.file("alm.json"), R"({"budget_base": 20, "budget_slope": 5})");
  auto r = run("optimize --problem geometric --oracle synthetic --seed 3 --outer 3 --config " + dir.file("alm.json") +
               " --trace " + dir.file("trace.jsonl") + " --out " + dir.file("opt.json"));
  CHECK(r.code == 0);
  std::ifstream trace(dir.file("trace.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"k", "objective", "violations", "rho", "y", "delta", "budget"}) CHECK(j.contains(key));
    CHECK(j["budget"] == 20 + 5 * lines);
    ++lines;
  }
  CHECK(lines == 3);
  const auto opt = read_json(dir.file("opt.json"));
  CHECK(opt.contains("boundary"));
  CHECK(run("optimize --problem geometric --oracle synthetic --seed 3 --outer 3 --config " + dir.file("alm.json") +
            " --out " + dir.file("opt2.json"))
            .code == 0);
  CHECK(slurp(dir.file("opt.json")) == slurp(dir.file("opt2.json")));

  r = run("plot-trace --trace " + dir.file("trace.jsonl") + " --out " + dir.file("plot"));
  CHECK(r.code == 0);
  CHECK(fs::exists(dir.path() / "plot" / "trace.csv"));
  CHECK(fs::exists(dir.path() / "plot" / "plot_trace.py"));

  CHECK(run("optimize --problem mhd --oracle synthetic --outer 1").code == 1);
  write_text(dir.file("bad.json"), R"({"gamma": 2.0})");
  CHECK(run("optimize --problem geometric --oracle synthetic --config " + dir.file("bad.json")).code == 1);
}

TEST_CASE("sample-targets is deterministic") {
  stellbench::testing::TempDir dir("cli");
  CHECK(run("sample-targets --count 3 --seed 4 --out " + dir.file("a")).code == 0);
  CHECK(run("sample-targets --count 3 --seed 4 --out " + dir.file("b")).code == 0);
  for (const char* f : {"target_00000.json", "target_00001.json", "target_00002.json"}) {
    CHECK(fs::exists(dir.path() / "a" / f));
    CHECK(slurp((dir.path() / "a" / f).string()) == slurp((dir.path() / "b" / f).string()));
  }
  const auto t = read_json((dir.path() / "a" / "target_00001.json").string());
  const double aspect = t.at("properties").at("aspect").get<double>();
  CHECK(aspect >= 4.0);
  CHECK(aspect <= 12.0);
}

TEST_CASE("dataset import, summarize and schema errors") {
  stellbench::testing::TempDir dir("cli");
  std::string rows;
  for (std::uint64_t s = 0; s < 20; ++s) {
    EquilibriumMetrics m;
    for (auto key : kMetricKeys) m.get(key) = 1.0 + double(s);
    auto jb = boundary_to_json(stellbench::testing::perturbed_ellipse(s, 0.02, 1 + int(s % 2) * 2));
    rows += nlohmann::json{{"boundary", jb}, {"metrics", metrics_to_json(m)}}.dump() + "\n";
  }
  write_text(dir.file("export.jsonl"), rows);
  auto r = run("dataset import --input " + dir.file("export.jsonl") + " --store " + dir.file("store") + " --nfp 3 --report " +
               dir.file("report.json"));
  CHECK(r.code == 0);
  const auto rep = read_json(dir.file("report.json"));
  CHECK(rep.at("imported") == 10);
  CHECK(rep.at("filtered_out") == 10);

  r = run("dataset summarize --store " + dir.file("store") + " --metrics aspect_ratio,qi --bins 5 --out " +
          dir.file("summary"));
  CHECK(r.code == 0);
  const auto sum = read_json(dir.file("summary/summary.json"));
  CHECK(sum.at("empty") == false);
  CHECK(fs::exists(dir.path() / "summary" / "hist_qi.csv"));

  write_text(dir.file("bad.jsonl"), R"({"boundary": {"n_field_periods": 3}})" "\n");
  r = run("dataset import --input " + dir.file("bad.jsonl") + " --store " + dir.file("store2"));
  CHECK(r.code == 1);
  CHECK(r.output.find("boundary.r_cos") != std::string::npos);
}

TEST_CASE("genmodel fit and sample") {
  stellbench::testing::TempDir dir("cli");
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::ofstream out(dir.file("records.jsonl"));
  for (int i = 0; i < 300; ++i) {
    DatasetRecord rec;
    rec.boundary = make_rotating_ellipse(3, 6.0, 1.5, 0.0);
    const double a = u(rng), b = u(rng);
    rec.boundary.r(2, 1) = 0.01 * a;
    rec.boundary.z(2, 1) = 0.01 * b;
    rec.boundary.r(1, -1) = 0.002 * u(rng);
    rec.metrics.aspect_ratio = 6.0;
    rec.metrics.average_triangularity = -0.2;
    rec.metrics.max_elongation = 2.0;
    rec.metrics.iota_edge_over_nfp = a + b > 0 ? 0.3 : 0.05;
    out << record_to_json(rec).dump() << "\n";
  }
  out.close();
  auto r = run("genmodel fit --dataset " + dir.file("records.jsonl") +
               " --problem geometric --latent-dim 2 --trees 30 --seed 1 --out " + dir.file("model.bin"));
  INFO(r.output);
  CHECK(r.code == 0);
  REQUIRE(fs::exists(dir.path() / "model.bin"));
  r = run("genmodel sample --model " + dir.file("model.bin") + " --count 10 --confidence 0.9 --seed 2 --out " +
          dir.file("c1.jsonl") + " --trace " + dir.file("trace.csv"));
  CHECK(r.code == 0);
  CHECK(run("genmodel sample --model " + dir.file("model.bin") + " --count 10 --confidence 0.9 --seed 2 --out " +
            dir.file("c2.jsonl"))
            .code == 0);
  CHECK(slurp(dir.file("c1.jsonl")) == slurp(dir.file("c2.jsonl")));
  CHECK_FALSE(slurp(dir.file("c1.jsonl")).empty());
  CHECK(fs::exists(dir.path() / "trace.csv"));
  write_text(dir.file("junk.bin"), "not a model");
  CHECK(run("genmodel sample --model " + dir.file("junk.bin") + " --count 2 --out " + dir.file("c3.jsonl")).code == 1);
}
