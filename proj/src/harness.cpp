#include "mirage/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "mirage/errors.hpp"
#include "mirage/parallel.hpp"

namespace mirage::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  int base = 10;
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
    v.remove_prefix(2);
    base = 16;
  }
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw ConfigError("invalid unsigned integer for '" + std::string(key) + "': '" + std::string(v) + "'");
  return out;
}

unsigned parse_uint(std::string_view key, std::string_view v) {
  const std::uint64_t x = parse_u64(key, v);
  if (x > 0xFFFFFFFFULL) throw ConfigError("value out of range for '" + std::string(key) + "'");
  return static_cast<unsigned>(x);
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean for '" + std::string(key) + "': '" + std::string(v) + "'");
}

std::vector<std::uint64_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::uint64_t> out;
  v = trim(v);
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_u64(key, v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty list for '" + std::string(key) + "'");
  return out;
}

std::string join(const std::vector<std::uint64_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(xs[i]);
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(std::string(trim(cell)));
  return out;
}

}  // namespace

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string scientific(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", value);
  return buf;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "sets_per_skew") sets_per_skew = parse_uint(key, value);
  else if (key == "base_ways") base_ways = parse_uint(key, value);
  else if (key == "extra_ways") extra_ways = parse_uint(key, value);
  else if (key == "skews") skews = parse_uint(key, value);
  else if (key == "cipher") {
    try {
      algorithm = cipher::parse_algorithm(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "key1") key1_hex = std::string(value);
  else if (key == "key2") key2_hex = std::string(value);
  else if (key == "buggy") buggy = parse_bool(key, value);
  else if (key == "prime_count") prime_count = parse_u64(key, value);
  else if (key == "prime_stride" || key == "stride") prime_stride = parse_u64(key, value);
  else if (key == "prime_base") prime_base = parse_u64(key, value);
  else if (key == "sender_stride") sender_stride = parse_u64(key, value);
  else if (key == "sender_base") sender_base = parse_u64(key, value);
  else if (key == "low_accesses") low_accesses = parse_u64(key, value);
  else if (key == "high_accesses") high_accesses = parse_u64(key, value);
  else if (key == "calibration_trials") calibration_trials = parse_uint(key, value);
  else if (key == "template_min") template_min = parse_u64(key, value);
  else if (key == "template_max") template_max = parse_u64(key, value);
  else if (key == "template_step") template_step = parse_u64(key, value);
  else if (key == "trials") trials = parse_u64(key, value);
  else if (key == "covert_bits") covert_bits = parse_u64(key, value);
  else if (key == "sim_installs") sim_installs = parse_u64(key, value);
  else if (key == "sweep_buckets") sweep_buckets = parse_list(key, value);
  else if (key == "sweep_balls_per_bucket") sweep_balls_per_bucket = parse_uint(key, value);
  else if (key == "sweep_threshold") sweep_threshold = parse_uint(key, value);
  else if (key == "sweep_max_throws") sweep_max_throws = parse_u64(key, value);
  else if (key == "sweep_seeds") sweep_seeds = parse_u64(key, value);
  else if (key == "master_seed" || key == "seed") master_seed = parse_u64(key, value);
  else if (key == "out" || key == "out_dir") out_dir = std::string(value);
  else if (key == "jobs") jobs = parse_uint(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(l.substr(0, eq), l.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in);
}

cipher::KeyPair ExperimentConfig::keys() const {
  cipher::KeyPair k = cipher::KeyPair::defaults(algorithm);
  if (key1_hex) k.k1 = cipher::BlockCipherKey::from_hex(algorithm, *key1_hex);
  if (key2_hex) k.k2 = cipher::BlockCipherKey::from_hex(algorithm, *key2_hex);
  k.validate();
  return k;
}

sim::MirageConfig ExperimentConfig::cache_config() const {
  sim::MirageConfig c;
  c.skews = skews;
  c.sets_per_skew = sets_per_skew;
  c.base_ways = base_ways;
  c.extra_ways = extra_ways;
  c.keys = keys();
  c.mode = buggy ? cipher::IndexMode::Buggy : cipher::IndexMode::Correct;
  c.rng_seed = master_seed;
  c.validate();
  return c;
}

attacks::ChannelConfig ExperimentConfig::channel() const {
  attacks::ChannelConfig ch;
  ch.receiver = {prime_count, prime_stride, prime_base};
  ch.symbol = {low_accesses, high_accesses};
  ch.sender_stride = sender_stride;
  ch.sender_base = sender_base;
  ch.calibration_trials = calibration_trials;
  try {
    ch.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return ch;
}

std::vector<std::uint64_t> ExperimentConfig::template_counts() const {
  if (template_step == 0 || template_min == 0 || template_min > template_max)
    throw ConfigError("template sweep needs 0 < template_min <= template_max and template_step > 0");
  std::vector<std::uint64_t> out;
  for (std::uint64_t c = template_min; c <= template_max; c += template_step) out.push_back(c);
  return out;
}

std::string ExperimentConfig::canonical() const {
  const cipher::KeyPair k = keys();
  std::map<std::string, std::string> kv = {
      {"sets_per_skew", std::to_string(sets_per_skew)},
      {"base_ways", std::to_string(base_ways)},
      {"extra_ways", std::to_string(extra_ways)},
      {"skews", std::to_string(skews)},
      {"cipher", std::string(cipher::to_string(algorithm))},
      {"key1", k.k1.to_hex()},
      {"key2", k.k2.to_hex()},
      {"buggy", buggy ? "1" : "0"},
      {"prime_count", std::to_string(prime_count)},
      {"prime_stride", std::to_string(prime_stride)},
      {"prime_base", std::to_string(prime_base)},
      {"sender_stride", std::to_string(sender_stride)},
      {"sender_base", sender_base ? std::to_string(*sender_base) : "auto"},
      {"low_accesses", std::to_string(low_accesses)},
      {"high_accesses", std::to_string(high_accesses)},
      {"calibration_trials", std::to_string(calibration_trials)},
      {"template_min", std::to_string(template_min)},
      {"template_max", std::to_string(template_max)},
      {"template_step", std::to_string(template_step)},
      {"trials", std::to_string(trials)},
      {"covert_bits", std::to_string(covert_bits)},
      {"sim_installs", std::to_string(sim_installs)},
      {"sweep_buckets", join(sweep_buckets)},
      {"sweep_balls_per_bucket", std::to_string(sweep_balls_per_bucket)},
      {"sweep_threshold", std::to_string(sweep_threshold)},
      {"sweep_max_throws", std::to_string(sweep_max_throws)},
      {"sweep_seeds", std::to_string(sweep_seeds)},
      {"master_seed", std::to_string(master_seed)},
  };
  std::string out;
  for (const auto& [key, value] : kv) out += key + "=" + value + "\n";
  return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical()); }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string header_comment(const ExperimentConfig& cfg) {
  return "# config_hash=" + cfg.hash() + " master_seed=" + std::to_string(cfg.master_seed);
}

void RunManifest::add_file(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  const std::string sum = file_sha256(path);
  for (auto& [n, s] : files) {
    if (n == name) {
      s = sum;
      return;
    }
  }
  files.emplace_back(name, sum);
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "config_hash=" << config_hash << "\n"
      << "master_seed=" << master_seed << "\n"
      << "artifact_version=" << artifact_version << "\n"
      << "command=" << command << "\n";
  for (const auto& [name, sum] : files) out << "file=" << name << " sha256=" << sum << "\n";
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read manifest " + path.string());
  RunManifest m;
  m.artifact_version.clear();
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "config_hash") m.config_hash = value;
    else if (key == "master_seed") m.master_seed = std::stoull(value);
    else if (key == "artifact_version") m.artifact_version = value;
    else if (key == "command") m.command = value;
    else if (key == "file") {
      const auto sp = value.find(" sha256=");
      if (sp == std::string::npos) throw InputError("malformed manifest entry: " + line);
      m.files.emplace_back(value.substr(0, sp), value.substr(sp + 8));
    }
  }
  return m;
}

void write_covert_csv(std::ostream& out, const ExperimentConfig& cfg, const attacks::CovertReport& report) {
  out << header_comment(cfg) << "\n" << attacks::CovertReport::kCsvHeader << "\n";
  for (const attacks::TrialRecord& r : report.records)
    out << r.trial << ',' << r.bit_sent << ',' << r.miss_count << ',' << r.bit_decoded << "\n";
}

std::vector<std::filesystem::path> write_template_store(const std::filesystem::path& dir,
                                                        const ExperimentConfig& cfg,
                                                        const std::vector<attacks::Template>& templates) {
  std::filesystem::create_directories(dir);
  const auto raw_path = dir / "templates.csv";
  const auto summary_path = dir / "templates_summary.csv";
  std::ofstream raw(raw_path, std::ios::binary);
  std::ofstream summary(summary_path, std::ios::binary);
  if (!raw || !summary) throw InputError("cannot write template store in " + dir.string());
  raw << header_comment(cfg) << "\nvictim_accesses,trial,miss_count\n";
  summary << header_comment(cfg) << "\nvictim_accesses,trials,mean,stddev\n";
  for (const attacks::Template& t : templates) {
    for (std::size_t i = 0; i < t.samples.size(); ++i)
      raw << t.victim_accesses << ',' << i << ',' << t.samples[i] << "\n";
    summary << t.victim_accesses << ',' << t.trials << ',' << fixed(t.mean, 4) << ',' << fixed(t.stddev, 4)
            << "\n";
  }
  return {raw_path, summary_path};
}

std::vector<attacks::Template> read_template_store(const std::filesystem::path& dir) {
  const auto path = dir / "templates.csv";
  std::ifstream in(path);
  if (!in) throw InputError("template store not found: " + path.string());
  std::map<std::uint64_t, std::vector<std::uint64_t>> samples;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (!header_seen) {
      if (cells != std::vector<std::string>{"victim_accesses", "trial", "miss_count"})
        throw InputError(path.string() + ": unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    if (cells.size() != 3) throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    try {
      samples[parse_u64("victim_accesses", cells[0])].push_back(parse_u64("miss_count", cells[2]));
    } catch (const ConfigError& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (samples.empty()) throw InputError("template store is empty: " + path.string());
  std::vector<attacks::Template> out;
  for (auto& [count, xs] : samples) out.push_back(attacks::Template::from_samples(count, std::move(xs)));
  return out;
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg,
                     const std::vector<analytics::SweepRow>& rows) {
  out << header_comment(cfg) << "\n" << analytics::kSweepCsvHeader << "\n";
  for (const analytics::SweepRow& r : rows) out << analytics::sweep_csv_row(r) << "\n";
}

std::vector<analytics::SweepRow> run_sweep(const ExperimentConfig& cfg, bool load_balanced) {
  if (cfg.sweep_seeds == 0) throw ConfigError("sweep_seeds must be positive");
  std::vector<analytics::SweepRow> rows(cfg.sweep_buckets.size() * cfg.sweep_seeds);
  parallel_for(rows.size(), cfg.jobs, [] { return 0; }, [&](int&, std::size_t i) {
    analytics::BucketBallParams p;
    p.buckets = cfg.sweep_buckets[i / cfg.sweep_seeds];
    p.balls = p.buckets * cfg.sweep_balls_per_bucket;
    const std::uint64_t seed = derive_seed(cfg.master_seed, p.buckets, i % cfg.sweep_seeds);
    const analytics::SpillStats s =
        analytics::bucket_ball_simulate(p, load_balanced, cfg.sweep_threshold, cfg.sweep_max_throws, seed);
    rows[i] = {p.balls, p.buckets, cfg.sweep_threshold, load_balanced, i % cfg.sweep_seeds,
               s.throws_until_first_spill};
  });
  return rows;
}

sim::CacheStats replay_trace(sim::MirageCache& cache, std::istream& trace) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(trace, line)) {
    ++lineno;
    std::string_view l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    if (l.size() > 2 && l[0] == '0' && (l[1] == 'x' || l[1] == 'X')) l.remove_prefix(2);
    std::uint64_t addr = 0;
    const auto [ptr, ec] = std::from_chars(l.data(), l.data() + l.size(), addr, 16);
    if (ec != std::errc{} || ptr != l.data() + l.size())
      throw ConfigError("trace line " + std::to_string(lineno) + ": malformed address '" + std::string(l) + "'");
    cache.access(addr);
  }
  return cache.stats();
}

}  // namespace mirage::harness
