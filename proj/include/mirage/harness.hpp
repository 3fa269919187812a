#pragma once

// Experiment configuration, output files and run manifests.
//
// A run is fully determined by its ExperimentConfig (which includes the master
// seed). The number of worker threads and the output directory are not part of
// the config hash and never affect results.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirage/analytics.hpp"
#include "mirage/attacks.hpp"
#include "mirage/cache.hpp"

namespace mirage::harness {

/// Raised when an expected input (template store, trace file) is missing or unreadable.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
  // Cache geometry and index derivation.
  std::uint32_t sets_per_skew = 16384;
  unsigned base_ways = 8;
  unsigned extra_ways = 6;
  unsigned skews = 2;
  cipher::Algorithm algorithm = cipher::Algorithm::Present80;
  std::optional<std::string> key1_hex;
  std::optional<std::string> key2_hex;
  bool buggy = false;

  // Attack parameters.
  std::uint64_t prime_count = 10000;
  std::uint64_t prime_stride = 1000;
  std::uint64_t prime_base = std::uint64_t{1} << 32;
  std::uint64_t sender_stride = 1000;
  std::optional<std::uint64_t> sender_base;
  std::uint64_t low_accesses = 1000;
  std::uint64_t high_accesses = 4000;
  unsigned calibration_trials = 30;
  std::uint64_t template_min = 500;
  std::uint64_t template_max = 8000;
  std::uint64_t template_step = 500;
  std::uint64_t trials = 100;
  std::uint64_t covert_bits = 100;

  // Plain simulation and bucket-and-ball sweep.
  std::uint64_t sim_installs = 1000000;
  std::vector<std::uint64_t> sweep_buckets = {1024, 4096, 16384, 32768};
  unsigned sweep_balls_per_bucket = 4;
  unsigned sweep_threshold = 14;
  std::uint64_t sweep_max_throws = 1000000;
  std::uint64_t sweep_seeds = 10;

  std::uint64_t master_seed = 1;

  // Not hashed.
  std::string out_dir = "out";
  unsigned jobs = 1;

  /// Applies one `key = value` setting. Throws ConfigError on unknown keys or
  /// malformed values.
  void set(std::string_view key, std::string_view value);
  /// Flat key-value text: `key = value` per line, '#' comments, blank lines.
  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig load(const std::filesystem::path& path);

  cipher::KeyPair keys() const;
  sim::MirageConfig cache_config() const;
  attacks::ChannelConfig channel() const;
  std::vector<std::uint64_t> template_counts() const;

  /// Sorted `key=value` lines of every hashed setting, keys resolved.
  std::string canonical() const;
  std::string hash() const;
};

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

/// `# config_hash=<hex> master_seed=<n>`, the first line of every CSV output.
std::string header_comment(const ExperimentConfig& cfg);

struct RunManifest {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string artifact_version = MIRAGE_VERSION;
  std::string command;
  std::vector<std::pair<std::string, std::string>> files;  // (name, sha256)

  /// Records `path` (relative name and checksum of its current contents).
  void add_file(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);
};

void write_covert_csv(std::ostream& out, const ExperimentConfig& cfg, const attacks::CovertReport& report);

/// Writes `templates.csv` (victim_accesses,trial,miss_count) and
/// `templates_summary.csv` (victim_accesses,trials,mean,stddev) into `dir`.
/// Returns the two paths.
std::vector<std::filesystem::path> write_template_store(const std::filesystem::path& dir,
                                                        const ExperimentConfig& cfg,
                                                        const std::vector<attacks::Template>& templates);
/// Reads templates.csv back. Throws InputError when the store is missing.
std::vector<attacks::Template> read_template_store(const std::filesystem::path& dir);

void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg,
                     const std::vector<analytics::SweepRow>& rows);
std::vector<analytics::SweepRow> run_sweep(const ExperimentConfig& cfg, bool load_balanced);

/// Replays one hex line address per line through the cache. Blank lines and
/// '#' comments are skipped; throws ConfigError on a malformed address.
sim::CacheStats replay_trace(sim::MirageCache& cache, std::istream& trace);

/// Formats a double with a fixed number of decimals and no locale influence.
std::string fixed(double value, int decimals);
/// "%.6e" formatting.
std::string scientific(double value);

}  // namespace mirage::harness
