// mirage: command-line front end for the cache simulator and the attack experiments.
//
// Exit codes: 0 success, 1 usage error, 2 config error, 3 runtime error,
// 4 check failure (cipher-test vectors).

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mirage/analytics.hpp"
#include "mirage/attacks.hpp"
#include "mirage/errors.hpp"
#include "mirage/harness.hpp"
#include "mirage/plot.hpp"
#include "mirage/rand_cipher.hpp"

namespace fs = std::filesystem;
using namespace mirage;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitCheck = 4;

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::optional<std::string> out;
  std::optional<std::string> cipher;
  bool buggy = false;
  std::optional<unsigned> jobs;
  bool plot = false;
};

harness::ExperimentConfig resolve(const GlobalFlags& g) {
  harness::ExperimentConfig cfg;
  if (!g.config_path.empty()) cfg = harness::ExperimentConfig::load(g.config_path);
  if (g.seed) cfg.master_seed = *g.seed;
  if (g.trials) cfg.trials = *g.trials;
  if (g.out) cfg.out_dir = *g.out;
  if (g.cipher) cfg.set("cipher", *g.cipher);
  if (g.buggy) cfg.buggy = true;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (cfg.jobs == 0) cfg.jobs = 1;
  cfg.hash();  // validates keys
  return cfg;
}

class Run {
 public:
  Run(const harness::ExperimentConfig& cfg, std::string command) : cfg_(cfg), dir_(cfg.out_dir) {
    fs::create_directories(dir_);
    manifest_.config_hash = cfg.hash();
    manifest_.master_seed = cfg.master_seed;
    manifest_.command = std::move(command);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  /// Writes a CSV file whose first line is the config header comment.
  template <typename Body>
  fs::path csv(const std::string& name, const std::string& header, Body body) {
    const fs::path p = path(name);
    {
      std::ofstream out(p, std::ios::binary);
      if (!out) throw harness::InputError("cannot write " + p.string());
      out << harness::header_comment(cfg_) << "\n" << header << "\n";
      body(out);
    }
    manifest_.add_file(p);
    return p;
  }

  void record(const fs::path& p) { manifest_.add_file(p); }

  void plot(const fs::path& csv_path, plot::PlotKind kind) {
    const fs::path svg = fs::path(csv_path).replace_extension(".svg");
    plot::emit_plot(csv_path, kind, svg);
    manifest_.add_file(svg);
  }

  ~Run() noexcept(false) {
    if (std::uncaught_exceptions() == 0) {
      std::string name = manifest_.command;
      for (char& c : name)
        if (c == ' ') c = '-';
      manifest_.write(dir_ / (name + ".manifest"));
    }
  }

 private:
  const harness::ExperimentConfig& cfg_;
  fs::path dir_;
  harness::RunManifest manifest_;
};

std::string fmt(double v, int decimals = 2) { return harness::fixed(v, decimals); }

int cmd_cipher_test(const harness::ExperimentConfig& cfg, const std::string& vectors_path) {
  std::ifstream in(vectors_path);
  if (!in) throw harness::InputError("cannot open test vector file " + vectors_path);
  const auto checks = cipher::check_test_vectors(cipher::parse_test_vectors(in));
  Run run(cfg, "cipher-test");
  std::size_t failed = 0;
  run.csv("cipher_test.csv", "algorithm,key,plaintext,expected,encrypted,decrypted,passed", [&](std::ostream& o) {
    for (const auto& c : checks) {
      o << cipher::to_string(c.vector.key.algorithm) << ',' << c.vector.key.to_hex() << ','
        << cipher::to_hex_u64(c.vector.plaintext) << ',' << cipher::to_hex_u64(c.vector.ciphertext) << ','
        << cipher::to_hex_u64(c.encrypted) << ',' << cipher::to_hex_u64(c.decrypted) << ','
        << (c.passed() ? 1 : 0) << "\n";
      failed += c.passed() ? 0 : 1;
    }
  });
  std::cout << checks.size() - failed << "/" << checks.size() << " test vectors passed\n";
  if (failed) throw CheckFailed(std::to_string(failed) + " test vector(s) failed");
  return 0;
}

int cmd_uniformity(const harness::ExperimentConfig& cfg, std::uint64_t samples) {
  const sim::MirageConfig mc = cfg.cache_config();
  const auto r = cipher::uniformity_report(mc.keys, mc.index_bits(), samples, cfg.master_seed, mc.mode);
  Run run(cfg, "uniformity");
  run.csv("uniformity.csv", "skew,samples,bins,chi_square,lower_bound,upper_bound", [&](std::ostream& o) {
    o << "1," << r.samples << ',' << r.bins << ',' << fmt(r.chi_square_skew1, 4) << ',' << fmt(r.lower_bound(), 4)
      << ',' << fmt(r.upper_bound(), 4) << "\n";
    o << "2," << r.samples << ',' << r.bins << ',' << fmt(r.chi_square_skew2, 4) << ',' << fmt(r.lower_bound(), 4)
      << ',' << fmt(r.upper_bound(), 4) << "\n";
  });
  std::cout << "chi-square skew1 " << fmt(r.chi_square_skew1) << ", skew2 " << fmt(r.chi_square_skew2)
            << " (bins " << r.bins << ", 4-sigma band [" << fmt(r.lower_bound()) << ", " << fmt(r.upper_bound())
            << "])\n";
  return 0;
}

int cmd_sim(const harness::ExperimentConfig& cfg, const std::string& trace) {
  sim::MirageCache cache(cfg.cache_config());
  std::optional<std::uint64_t> first_sae;
  if (!trace.empty()) {
    std::ifstream in(trace);
    if (!in) throw harness::InputError("cannot open trace " + trace);
    harness::replay_trace(cache, in);
  } else {
    const std::uint64_t stream = derive_seed(cfg.master_seed, 7);
    for (std::uint64_t i = 0; i < cfg.sim_installs; ++i) {
      const auto out = cache.access(mix64(stream + i));
      if (out.sae_triggered && !first_sae) first_sae = i + 1;
    }
  }
  const sim::CacheStats s = cache.stats();
  Run run(cfg, "sim");
  run.csv("stats.csv", std::string(sim::CacheStats::kCsvHeader) + ",occupancy,first_sae", [&](std::ostream& o) {
    o << s.csv_row() << ',' << cache.occupancy() << ',' << (first_sae ? std::to_string(*first_sae) : "NA") << "\n";
  });
  std::cout << sim::CacheStats::kCsvHeader << "\n" << s.csv_row() << "\n";
  return 0;
}

int cmd_bucket_ball(const harness::ExperimentConfig& cfg, bool plot) {
  auto rows = harness::run_sweep(cfg, false);
  const auto balanced = harness::run_sweep(cfg, true);
  rows.insert(rows.end(), balanced.begin(), balanced.end());
  Run run(cfg, "bucket-ball");
  const fs::path p = run.csv("sweep.csv", analytics::kSweepCsvHeader, [&](std::ostream& o) {
    for (const auto& r : rows) o << analytics::sweep_csv_row(r) << "\n";
  });
  std::size_t spilled = 0;
  for (const auto& r : rows) spilled += r.throws_until_first_spill ? 1 : 0;
  std::cout << rows.size() << " runs, " << spilled << " reached the spill threshold\n";
  if (plot && spilled) run.plot(p, plot::PlotKind::LineSweep);
  return 0;
}

int cmd_analytic(const harness::ExperimentConfig& cfg, bool birthday, unsigned bits, double prob, bool birth_death,
                 bool bucket_prob, std::uint64_t target) {
  if (!birthday && !birth_death && !bucket_prob) birthday = birth_death = bucket_prob = true;
  analytics::BucketBallParams p;
  p.buckets = std::uint64_t{cfg.skews} * cfg.sets_per_skew;
  p.balls = std::uint64_t{cfg.sets_per_skew} * cfg.base_ways;
  p.base_state = cfg.base_ways;
  p.extra = cfg.extra_ways;
  Run run(cfg, "analytic");
  run.csv("analytic.csv", "quantity,parameter,value", [&](std::ostream& o) {
    if (birthday) {
      const double thumb = analytics::birthday_rule_of_thumb(bits);
      const std::uint64_t exact = analytics::birthday_accesses(bits, prob);
      std::cout << "birthday bits=" << bits << " rule_of_thumb=" << fmt(thumb, 0) << " exact(p=" << prob
                << ")=" << exact << "\n";
      o << "birthday_rule_of_thumb,bits=" << bits << ',' << fmt(thumb, 0) << "\n";
      o << "birthday_exact,bits=" << bits << ";p=" << prob << ',' << exact << "\n";
    }
    if (birth_death) {
      const auto chain = analytics::spill_chain_birth_death(p, p.base_state, p.extra);
      for (std::size_t i = 0; i < chain.size(); ++i) {
        std::cout << "P(N+" << i << ") = " << chain[i] << "\n";
        o << "birth_death_state,N+" << i << ',' << harness::scientific(chain[i]) << "\n";
      }
    }
    if (bucket_prob) {
      const std::uint64_t k = target ? target : p.base_state + p.extra;
      const double bin = analytics::any_bucket_exact_prob(k, p, analytics::Method::BinomialExact);
      const double poi = analytics::any_bucket_exact_prob(k, p, analytics::Method::Poisson);
      std::cout << "expected buckets holding " << k << " balls: binomial " << bin << ", poisson " << poi << "\n";
      o << "buckets_with_k_binomial,k=" << k << ',' << harness::scientific(bin) << "\n";
      o << "buckets_with_k_poisson,k=" << k << ',' << harness::scientific(poi) << "\n";
    }
  });
  return 0;
}

std::vector<int> covert_bits(const harness::ExperimentConfig& cfg) {
  Rng rng(derive_seed(cfg.master_seed, 6));
  std::vector<int> bits(cfg.covert_bits);
  for (int& b : bits) b = rng.coin() ? 1 : 0;
  return bits;
}

int cmd_covert(const harness::ExperimentConfig& cfg, bool plot) {
  const auto report =
      attacks::covert_transmit(covert_bits(cfg), cfg.cache_config(), cfg.channel(), cfg.master_seed, cfg.jobs);
  Run run(cfg, "covert");
  const fs::path p = run.path("covert.csv");
  {
    std::ofstream out(p, std::ios::binary);
    harness::write_covert_csv(out, cfg, report);
  }
  run.record(p);
  std::vector<std::uint64_t> low, high;
  for (const auto& r : report.records) (r.bit_sent ? high : low).push_back(r.miss_count);
  run.csv("covert_summary.csv", "symbol,accesses,bits,mean_miss_count,stddev,threshold,ber", [&](std::ostream& o) {
    o << "0," << cfg.low_accesses << ',' << low.size() << ',' << fmt(attacks::mean_of(low), 4) << ','
      << fmt(attacks::stddev_of(low), 4) << ',' << fmt(report.threshold, 4) << ',' << fmt(report.ber, 6) << "\n";
    o << "1," << cfg.high_accesses << ',' << high.size() << ',' << fmt(attacks::mean_of(high), 4) << ','
      << fmt(attacks::stddev_of(high), 4) << ',' << fmt(report.threshold, 4) << ',' << fmt(report.ber, 6) << "\n";
  });
  std::cout << "symbol 0 (" << cfg.low_accesses << " accesses): mean misses " << fmt(attacks::mean_of(low))
            << "\nsymbol 1 (" << cfg.high_accesses << " accesses): mean misses " << fmt(attacks::mean_of(high))
            << "\nthreshold " << fmt(report.threshold) << ", bit errors " << report.bit_errors << "/"
            << report.records.size() << ", BER " << fmt(report.ber, 4) << "\n";
  if (plot) run.plot(p, plot::PlotKind::HistogramOverlay);
  return 0;
}

int cmd_template_build(const harness::ExperimentConfig& cfg, bool plot) {
  const auto templates = attacks::build_templates(cfg.template_counts(), cfg.trials, cfg.cache_config(),
                                                  cfg.channel(), cfg.master_seed, cfg.jobs);
  Run run(cfg, "template build");
  const auto paths = harness::write_template_store(cfg.out_dir, cfg, templates);
  for (const auto& p : paths) run.record(p);
  for (const auto& t : templates)
    std::cout << t.victim_accesses << ": mean " << fmt(t.mean) << ", sd " << fmt(t.stddev) << "\n";
  if (plot) run.plot(paths[0], plot::PlotKind::HistogramOverlay);
  return 0;
}

int cmd_template_classify(const harness::ExperimentConfig& cfg, const std::string& store,
                          const std::vector<double>& misses, std::uint64_t observe) {
  const auto templates = harness::read_template_store(store.empty() ? fs::path(cfg.out_dir) : fs::path(store));
  Run run(cfg, "template classify");
  if (!misses.empty()) {
    run.csv("classified.csv", "miss_count,label,confidence", [&](std::ostream& o) {
      for (double m : misses) {
        const auto c = attacks::classify(m, templates);
        o << fmt(m, 0) << ',' << c.label << ',' << fmt(c.confidence, 6) << "\n";
        std::cout << fmt(m, 0) << " -> " << c.label << " (confidence " << fmt(c.confidence, 3) << ")\n";
      }
    });
    return 0;
  }
  std::vector<std::uint64_t> counts;
  if (observe) counts.push_back(observe);
  else for (const auto& t : templates) counts.push_back(t.victim_accesses);
  const auto obs = attacks::sample_observations(counts, cfg.trials, cfg.cache_config(), cfg.channel(),
                                                cfg.master_seed, cfg.jobs);
  std::size_t correct = 0;
  run.csv("classified.csv", "victim_accesses,miss_count,label,confidence", [&](std::ostream& o) {
    for (const auto& ob : obs) {
      const auto c = attacks::classify(static_cast<double>(ob.miss_count), templates);
      correct += c.label == ob.victim_accesses ? 1 : 0;
      o << ob.victim_accesses << ',' << ob.miss_count << ',' << c.label << ',' << fmt(c.confidence, 6) << "\n";
    }
  });
  std::cout << "accuracy " << fmt(100.0 * correct / static_cast<double>(obs.size())) << "% over " << obs.size()
            << " observations\n";
  return 0;
}

int cmd_compare_baseline(const harness::ExperimentConfig& cfg, bool plot) {
  const auto c = attacks::baseline_comparison(cfg.cache_config(), sim::BaselineConfig{}, cfg.channel(), cfg.trials,
                                              cfg.master_seed, cfg.jobs);
  Run run(cfg, "compare-baseline");
  const fs::path p = run.csv("compare_baseline.csv", "model,bit_sent,trial,miss_count", [&](std::ostream& o) {
    auto dump = [&](const char* model, const attacks::SymbolDistribution& d) {
      for (std::size_t i = 0; i < d.low.size(); ++i) o << model << ",0," << i << ',' << d.low[i] << "\n";
      for (std::size_t i = 0; i < d.high.size(); ++i) o << model << ",1," << i << ',' << d.high[i] << "\n";
    };
    dump("mirage", c.mirage);
    dump("baseline", c.baseline);
  });
  run.csv("compare_summary.csv", "model,mean_low,sd_low,mean_high,sd_high,separability", [&](std::ostream& o) {
    auto line = [&](const char* model, const attacks::SymbolDistribution& d) {
      o << model << ',' << fmt(d.mean_low, 4) << ',' << fmt(d.sd_low, 4) << ',' << fmt(d.mean_high, 4) << ','
        << fmt(d.sd_high, 4) << ',' << (std::isinf(d.separability) ? std::string("inf") : fmt(d.separability, 4))
        << "\n";
      std::cout << model << ": low " << fmt(d.mean_low) << " (sd " << fmt(d.sd_low) << "), high "
                << fmt(d.mean_high) << " (sd " << fmt(d.sd_high) << "), separability " << fmt(d.separability)
                << "\n";
    };
    line("mirage", c.mirage);
    line("baseline", c.baseline);
  });
  if (plot) run.plot(p, plot::PlotKind::HistogramOverlay);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIRAGE cache simulator and occupancy-attack experiments", "mirage"};
  app.set_version_flag("--version", MIRAGE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config_path, "flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--trials", g.trials, "trials per template / symbol / observation count");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--cipher", g.cipher, "present|prince");
  app.add_flag("--buggy", g.buggy, "emulate the faulty address-to-block conversion");
  app.add_option("--jobs", g.jobs, "worker threads (does not affect results)");
  app.add_flag("--plot", g.plot, "also render an SVG chart next to the CSV");

  std::string vectors = std::string(MIRAGE_DATA_DIR) + "/test_vectors.csv";
  auto* cipher_test = app.add_subcommand("cipher-test", "check the bundled cipher test vectors");
  cipher_test->add_option("--vectors", vectors, "vector file")->capture_default_str();

  std::uint64_t samples = std::uint64_t{1} << 21;
  auto* uniformity = app.add_subcommand("uniformity", "chi-square uniformity of the sibling indices");
  uniformity->add_option("--samples", samples)->capture_default_str();

  std::string trace;
  std::optional<std::uint64_t> installs;
  auto* simc = app.add_subcommand("sim", "replay a trace or random installs, write stats");
  simc->add_option("--trace", trace, "file with one hex line address per line");
  simc->add_option("--installs", installs, "random-line installs when no trace is given");

  auto* bucket_ball = app.add_subcommand("bucket-ball", "buckets-and-balls spill sweep");

  bool birthday = false, birth_death = false, bucket_prob = false;
  unsigned bits = 28;
  double prob = 0.5;
  std::uint64_t target = 0;
  auto* analytic = app.add_subcommand("analytic", "closed-form evaluations");
  analytic->add_flag("--birthday", birthday, "birthday bound on sibling-pair collisions");
  analytic->add_option("--bits", bits, "index bits across both skews")->capture_default_str();
  analytic->add_option("--prob", prob, "collision probability for the exact form")->capture_default_str();
  analytic->add_flag("--birth-death", birth_death, "per-state spill probabilities");
  analytic->add_flag("--bucket-prob", bucket_prob, "expected buckets holding k balls");
  analytic->add_option("--k", target, "occupancy for --bucket-prob (default base + extra ways)");

  auto* covert = app.add_subcommand("covert", "covert channel with calibrated threshold, BER report");

  auto* templ = app.add_subcommand("template", "fingerprinting templates");
  templ->require_subcommand(1);
  auto* tbuild = templ->add_subcommand("build", "build per-workload miss-count templates");
  std::string store;
  std::vector<double> misses;
  std::uint64_t observe = 0;
  auto* tclassify = templ->add_subcommand("classify", "classify miss counts against a template store");
  tclassify->add_option("--store", store, "template store directory (default: --out)");
  tclassify->add_option("--misses", misses, "observed miss counts to classify");
  tclassify->add_option("--observe", observe, "simulate this victim workload instead");

  auto* compare = app.add_subcommand("compare-baseline", "covert channel on MIRAGE vs a 16-way LRU cache");

  std::string plot_kind, plot_in, plot_out;
  auto* plotc = app.add_subcommand("plot", "render an SVG chart from a CSV output");
  plotc->add_option("--kind", plot_kind, "histogram_overlay|line_sweep")->required();
  plotc->add_option("--input", plot_in)->required();
  plotc->add_option("--output", plot_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*plotc) {
      plot::emit_plot(plot_in, plot::parse_kind(plot_kind), plot_out);
      return 0;
    }
    harness::ExperimentConfig cfg = resolve(g);
    if (installs) cfg.sim_installs = *installs;
    if (*cipher_test) return cmd_cipher_test(cfg, vectors);
    if (*uniformity) return cmd_uniformity(cfg, samples);
    if (*simc) return cmd_sim(cfg, trace);
    if (*bucket_ball) return cmd_bucket_ball(cfg, g.plot);
    if (*analytic) return cmd_analytic(cfg, birthday, bits, prob, birth_death, bucket_prob, target);
    if (*covert) return cmd_covert(cfg, g.plot);
    if (*tbuild) return cmd_template_build(cfg, g.plot);
    if (*tclassify) return cmd_template_classify(cfg, store, misses, observe);
    if (*compare) return cmd_compare_baseline(cfg, g.plot);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitCheck;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
