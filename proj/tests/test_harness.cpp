#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mirage/errors.hpp"
#include "mirage/harness.hpp"
#include "mirage/plot.hpp"

using namespace mirage;
using namespace mirage::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mirage_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("defaults follow the reference design") {
  const ExperimentConfig cfg;
  const sim::MirageConfig mc = cfg.cache_config();
  CHECK(mc.sets_per_skew == 16384);
  CHECK(mc.base_ways == 8);
  CHECK(mc.extra_ways == 6);
  CHECK(mc.data_capacity() == 131072);
  CHECK(cfg.prime_count == 10000);
  CHECK(cfg.low_accesses == 1000);
  CHECK(cfg.high_accesses == 4000);
  CHECK(cfg.template_counts().size() == 16);
}

TEST_CASE("config file parsing") {
  std::istringstream in(
      "# comment\n"
      "\n"
      "cipher = prince\n"
      "master_seed = 0x10\n"
      "sweep_buckets = 64, 128\n"
      "buggy = true\n"
      "key1 = 000102030405060708090A0B0C0D0E0F\n");
  const ExperimentConfig cfg = ExperimentConfig::parse(in);
  CHECK(cfg.algorithm == cipher::Algorithm::Prince128);
  CHECK(cfg.master_seed == 16);
  CHECK(cfg.sweep_buckets == std::vector<std::uint64_t>{64, 128});
  CHECK(cfg.buggy);
  CHECK(cfg.keys().k1.lo == 0x08090A0B0C0D0E0FULL);

  std::istringstream unknown("colour = blue\n");
  CHECK_THROWS_AS(ExperimentConfig::parse(unknown), ConfigError);
  std::istringstream malformed("trials\n");
  CHECK_THROWS_AS(ExperimentConfig::parse(malformed), ConfigError);
  std::istringstream bad_number("trials = ten\n");
  CHECK_THROWS_AS(ExperimentConfig::parse(bad_number), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/mirage.cfg"), ConfigError);
}

TEST_CASE("config hash ignores jobs and output directory only") {
  ExperimentConfig a, b;
  b.jobs = 8;
  b.out_dir = "elsewhere";
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 64);
  b.master_seed = 2;
  CHECK(a.hash() != b.hash());
  ExperimentConfig c;
  c.key1_hex = cipher::KeyPair::defaults(cipher::Algorithm::Present80).k1.to_hex();
  CHECK(a.hash() == c.hash());
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest round trip with checksums") {
  const fs::path dir = scratch("manifest");
  {
    std::ofstream(dir / "a.csv") << "x\n1\n";
  }
  RunManifest m;
  m.config_hash = "abc";
  m.master_seed = 7;
  m.command = "sim";
  m.add_file(dir / "a.csv");
  m.write(dir / "run.manifest");
  const RunManifest r = RunManifest::read(dir / "run.manifest");
  CHECK(r.config_hash == "abc");
  CHECK(r.master_seed == 7);
  CHECK(r.artifact_version == MIRAGE_VERSION);
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].first == "a.csv");
  CHECK(r.files[0].second == sha256_hex("x\n1\n"));
}

TEST_CASE("template store round trip and missing store") {
  const fs::path dir = scratch("store");
  ExperimentConfig cfg;
  const std::vector<attacks::Template> ts = {attacks::Template::from_samples(500, {10, 11, 12}),
                                             attacks::Template::from_samples(1000, {20, 22})};
  const auto paths = write_template_store(dir, cfg, ts);
  REQUIRE(paths.size() == 2);
  CHECK(slurp(paths[0]).rfind(header_comment(cfg), 0) == 0);
  const auto back = read_template_store(dir);
  REQUIRE(back.size() == 2);
  CHECK(back[0].samples == ts[0].samples);
  CHECK(back[1].mean == ts[1].mean);
  CHECK_THROWS_AS(read_template_store(dir / "missing"), InputError);
}

TEST_CASE("trace replay") {
  sim::MirageConfig mc;
  mc.sets_per_skew = 64;
  sim::MirageCache cache(mc);
  std::istringstream trace("# addresses\n0x10\n20\n\n10\n");
  const sim::CacheStats s = replay_trace(cache, trace);
  CHECK(s.accesses == 3);
  CHECK(s.hits == 1);
  std::istringstream bad("zz\n");
  CHECK_THROWS_AS(replay_trace(cache, bad), ConfigError);
}

TEST_CASE("sweep output is independent of the job count") {
  ExperimentConfig cfg;
  cfg.sweep_buckets = {64, 256};
  cfg.sweep_seeds = 3;
  cfg.sweep_threshold = 6;
  cfg.sweep_max_throws = 20000;
  std::ostringstream one, four;
  write_sweep_csv(one, cfg, run_sweep(cfg, true));
  cfg.jobs = 4;
  write_sweep_csv(four, cfg, run_sweep(cfg, true));
  CHECK(one.str() == four.str());
}

TEST_CASE("plot rendering") {
  std::string csv = "# config_hash=x master_seed=1\nvictim_accesses,trial,miss_count\n";
  for (int t = 1; t <= 16; ++t)
    for (int i = 0; i < 5; ++i) csv += std::to_string(500 * t) + "," + std::to_string(i) + "," +
                                       std::to_string(400 + 30 * t + i) + "\n";
  const std::string svg = plot::render_svg(csv, plot::PlotKind::HistogramOverlay);
  std::size_t curves = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1))
    ++curves;
  CHECK(curves == 16);
  CHECK(svg == plot::render_svg(csv, plot::PlotKind::HistogramOverlay));
  CHECK_THROWS_AS(plot::render_svg(csv, plot::PlotKind::LineSweep), ConfigError);

  const std::string sweep =
      "B,buckets,threshold,load_balanced,seed,throws_until_first_spill\n"
      "256,64,6,0,0,40\n256,64,6,1,0,NA\n1024,256,6,0,0,90\n1024,256,6,1,0,5000\n";
  CHECK(plot::render_svg(sweep, plot::PlotKind::LineSweep).find("<polyline") != std::string::npos);
  CHECK_THROWS_AS(plot::parse_kind("pie"), ArgumentError);
}

TEST_CASE("empty CSV is an error and writes no file") {
  const fs::path dir = scratch("plot");
  {
    std::ofstream(dir / "empty.csv") << "# only a comment\nvictim_accesses,trial,miss_count\n";
  }
  CHECK_THROWS_AS(plot::emit_plot(dir / "empty.csv", plot::PlotKind::HistogramOverlay, dir / "out.svg"),
                  ArgumentError);
  CHECK_FALSE(fs::exists(dir / "out.svg"));
}
