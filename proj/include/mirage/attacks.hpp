#pragma once

// Cache-occupancy attacks on a shared last-level cache.
//
// A receiver primes a strided set of its own lines, another party (the covert
// sender or a fingerprinted victim) installs its lines, and the receiver
// re-accesses its lines and counts misses. Misses re-install through the
// normal path. Roles are fixed: the receiver primes and probes, the sender
// only installs.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mirage/cache.hpp"
#include "mirage/errors.hpp"
#include "mirage/parallel.hpp"
#include "mirage/rng.hpp"

namespace mirage::attacks {

struct PrimeConfig {
  std::uint64_t prime_count = 10000;
  std::uint64_t stride = 1000;
  std::uint64_t base = std::uint64_t{1} << 32;

  std::uint64_t line(std::uint64_t i) const { return base + i * stride; }
  /// One past the last primed line.
  std::uint64_t end() const { return base + prime_count * stride; }
  bool contains(std::uint64_t line_addr) const {
    return line_addr >= base && line_addr < end() && (line_addr - base) % stride == 0;
  }
  void validate() const;
};

struct PrimeResult {
  std::uint64_t self_evictions = 0;
  std::uint64_t resident = 0;
};

/// Valid lines evicted while the sender ran, split by owner.
struct VictimReport {
  std::uint64_t total_evictions = 0;
  std::uint64_t receiver_owned = 0;
  std::uint64_t sender_owned = 0;
  std::uint64_t other = 0;
};

struct CovertSymbol {
  std::uint64_t low_accesses = 1000;
  std::uint64_t high_accesses = 4000;
  std::uint64_t accesses(int bit) const { return bit ? high_accesses : low_accesses; }
};

struct ChannelConfig {
  PrimeConfig receiver;
  CovertSymbol symbol;
  std::uint64_t sender_stride = 1000;
  /// Defaults to the first line after the receiver's range.
  std::optional<std::uint64_t> sender_base;
  unsigned calibration_trials = 30;
  /// When false the sender stays idle during transmission (calibration still
  /// uses both symbols).
  bool sender_enabled = true;

  std::uint64_t sender_start() const { return sender_base.value_or(receiver.end()); }
  void validate() const;
};

struct TrialRecord {
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  std::uint64_t victim_accesses = 0;
  std::uint64_t self_evictions = 0;
  std::uint64_t resident = 0;
  VictimReport victim;
  std::uint64_t miss_count = 0;
  int bit_sent = -1;
  int bit_decoded = -1;
};

inline std::uint64_t cache_capacity(const sim::MirageCache& c) { return c.config().data_capacity(); }
inline std::uint64_t cache_capacity(const sim::BaselineCache& c) { return c.config().capacity(); }

/// Installs the receiver's lines into a freshly reset cache.
template <sim::CacheModel C>
PrimeResult prime(C& cache, const PrimeConfig& cfg) {
  cfg.validate();
  if (cfg.prime_count > cache_capacity(cache))
    throw ArgumentError("prime_count exceeds the cache's data capacity");
  if (cache.occupancy() != 0) throw ArgumentError("prime expects a freshly reset cache");
  PrimeResult r;
  for (std::uint64_t i = 0; i < cfg.prime_count; ++i) {
    const sim::AccessOutcome out = cache.access(cfg.line(i));
    if (out.globally_evicted && cfg.contains(*out.globally_evicted)) ++r.self_evictions;
  }
  for (std::uint64_t i = 0; i < cfg.prime_count; ++i) r.resident += cache.lookup(cfg.line(i)) ? 1 : 0;
  return r;
}

/// Installs `accesses` distinct sender lines starting at `base`.
template <sim::CacheModel C>
VictimReport victim_run(C& cache, std::uint64_t accesses, std::uint64_t stride, std::uint64_t base,
                        const PrimeConfig& receiver) {
  if (accesses == 0) return {};
  if (stride == 0) throw ArgumentError("sender stride must be at least 1");
  const std::uint64_t end = base + accesses * stride;
  if (base < receiver.end() && receiver.base < end)
    throw ArgumentError("sender address range overlaps the receiver's primed range");
  VictimReport r;
  for (std::uint64_t j = 0; j < accesses; ++j) {
    const sim::AccessOutcome out = cache.access(base + j * stride);
    if (!out.globally_evicted) continue;
    const std::uint64_t evicted = *out.globally_evicted;
    ++r.total_evictions;
    if (receiver.contains(evicted))
      ++r.receiver_owned;
    else if (evicted >= base && evicted < end && (evicted - base) % stride == 0)
      ++r.sender_owned;
    else
      ++r.other;
  }
  return r;
}

/// Re-accesses every primed line in order and returns the number of misses.
template <sim::CacheModel C>
std::uint64_t probe(C& cache, const PrimeConfig& cfg) {
  std::uint64_t misses = 0;
  for (std::uint64_t i = 0; i < cfg.prime_count; ++i) misses += cache.access(cfg.line(i)).hit() ? 0 : 1;
  return misses;
}

/// reset(seed) -> prime -> victim_run(victim_accesses) -> probe.
template <sim::CacheModel C>
TrialRecord occupancy_trial(C& cache, std::uint64_t seed, const ChannelConfig& cfg,
                            std::uint64_t victim_accesses) {
  cache.reset(seed);
  TrialRecord rec;
  rec.seed = seed;
  rec.victim_accesses = victim_accesses;
  const PrimeResult p = prime(cache, cfg.receiver);
  rec.self_evictions = p.self_evictions;
  rec.resident = p.resident;
  rec.victim = victim_run(cache, victim_accesses, cfg.sender_stride, cfg.sender_start(), cfg.receiver);
  rec.miss_count = probe(cache, cfg.receiver);
  return rec;
}

double mean_of(const std::vector<std::uint64_t>& xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev_of(const std::vector<std::uint64_t>& xs);

/// |mean(b) - mean(a)| over the pooled sample standard deviation. Returns 0
/// when the means coincide and +inf when only the spread is zero.
double separability(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

struct CovertReport {
  double threshold = 0.0;
  double calibration_mean_low = 0.0;
  double calibration_mean_high = 0.0;
  std::uint64_t bit_errors = 0;
  double ber = 0.0;
  std::vector<TrialRecord> calibration;
  std::vector<TrialRecord> records;

  static constexpr const char* kCsvHeader = "trial,bit_sent,miss_count,bit_decoded";
};

namespace seed_stream {
inline constexpr std::uint64_t kCalibration = 1;
inline constexpr std::uint64_t kCovertBits = 2;
inline constexpr std::uint64_t kTemplates = 3;
inline constexpr std::uint64_t kObservations = 4;
inline constexpr std::uint64_t kComparison = 5;
}  // namespace seed_stream

/// Covert channel over caches built by make_cache(). The decode threshold is
/// the midpoint of the mean miss counts of `calibration_trials` warm-up runs
/// per symbol; a bit decodes to 1 when its miss count exceeds the threshold.
template <typename Factory>
CovertReport covert_transmit_with(Factory make_cache, const std::vector<int>& bits,
                                  const ChannelConfig& cfg, std::uint64_t seed, unsigned jobs = 1) {
  if (bits.empty()) throw ArgumentError("covert_transmit needs at least one bit");
  cfg.validate();
  if (cfg.calibration_trials == 0) throw ArgumentError("calibration needs at least one trial per symbol");
  CovertReport report;
  const std::size_t n_cal = 2 * std::size_t{cfg.calibration_trials};
  report.calibration.resize(n_cal);
  parallel_for(n_cal, jobs, make_cache, [&](auto& cache, std::size_t i) {
    const int bit = i < cfg.calibration_trials ? 0 : 1;
    TrialRecord rec = occupancy_trial(cache, derive_seed(seed, seed_stream::kCalibration, i), cfg,
                                      cfg.symbol.accesses(bit));
    rec.trial = i;
    rec.bit_sent = bit;
    report.calibration[i] = rec;
  });
  std::vector<std::uint64_t> low, high;
  for (const TrialRecord& r : report.calibration) (r.bit_sent ? high : low).push_back(r.miss_count);
  report.calibration_mean_low = mean_of(low);
  report.calibration_mean_high = mean_of(high);
  report.threshold = 0.5 * (report.calibration_mean_low + report.calibration_mean_high);

  report.records.resize(bits.size());
  parallel_for(bits.size(), jobs, make_cache, [&](auto& cache, std::size_t i) {
    const int bit = bits[i] ? 1 : 0;
    const std::uint64_t accesses = cfg.sender_enabled ? cfg.symbol.accesses(bit) : 0;
    TrialRecord rec = occupancy_trial(cache, derive_seed(seed, seed_stream::kCovertBits, i), cfg, accesses);
    rec.trial = i;
    rec.bit_sent = bit;
    rec.bit_decoded = static_cast<double>(rec.miss_count) > report.threshold ? 1 : 0;
    report.records[i] = rec;
  });
  for (const TrialRecord& r : report.records) report.bit_errors += r.bit_sent != r.bit_decoded ? 1 : 0;
  report.ber = static_cast<double>(report.bit_errors) / static_cast<double>(bits.size());
  return report;
}

CovertReport covert_transmit(const std::vector<int>& bits, const sim::MirageConfig& cache_cfg,
                             const ChannelConfig& cfg, std::uint64_t seed, unsigned jobs = 1);

/// Empirical miss-count distribution of the receiver for one victim workload.
struct Template {
  std::uint64_t victim_accesses = 0;
  std::uint64_t trials = 0;
  std::vector<std::uint64_t> samples;
  std::map<std::uint64_t, std::uint64_t> miss_histogram;
  double mean = 0.0;
  double stddev = 0.0;

  static Template from_samples(std::uint64_t victim_accesses, std::vector<std::uint64_t> samples);
};

/// {500, 1000, ..., 8000}.
std::vector<std::uint64_t> default_template_counts();

/// Runs `trials_per_template` occupancy trials per victim access count. Trial
/// seeds depend on (seed, victim_accesses, trial) only.
std::vector<Template> build_templates(const std::vector<std::uint64_t>& access_counts,
                                      std::uint64_t trials_per_template,
                                      const sim::MirageConfig& cache_cfg, const ChannelConfig& cfg,
                                      std::uint64_t seed, unsigned jobs = 1);

struct Classification {
  std::uint64_t label = 0;
  double confidence = 0.0;
};

/// Maximum likelihood under a normal model per template; confidence is the
/// winner's posterior under a uniform prior. Falls back to nearest mean when
/// any template has zero spread.
Classification classify(double observed_miss_count, const std::vector<Template>& templates);

struct Observation {
  std::uint64_t victim_accesses = 0;
  std::uint64_t miss_count = 0;
};

/// `per_count` fresh occupancy trials for each access count, for evaluating
/// a classifier on data independent of the templates.
std::vector<Observation> sample_observations(const std::vector<std::uint64_t>& access_counts,
                                             std::uint64_t per_count,
                                             const sim::MirageConfig& cache_cfg,
                                             const ChannelConfig& cfg, std::uint64_t seed,
                                             unsigned jobs = 1);

double classification_accuracy(const std::vector<Observation>& observations,
                               const std::vector<Template>& templates);

struct SymbolDistribution {
  std::vector<std::uint64_t> low;
  std::vector<std::uint64_t> high;
  double mean_low = 0.0;
  double mean_high = 0.0;
  double sd_low = 0.0;
  double sd_high = 0.0;
  double separability = 0.0;
};

/// Receiver miss counts for both covert symbols, `trials` runs each.
template <typename Factory>
SymbolDistribution symbol_distribution(Factory make_cache, const ChannelConfig& cfg,
                                       std::uint64_t trials, std::uint64_t seed, unsigned jobs = 1) {
  cfg.validate();
  SymbolDistribution d;
  std::vector<std::uint64_t> misses(2 * trials);
  parallel_for(misses.size(), jobs, make_cache, [&](auto& cache, std::size_t i) {
    const int bit = i < trials ? 0 : 1;
    const std::uint64_t accesses = cfg.sender_enabled ? cfg.symbol.accesses(bit) : 0;
    misses[i] = occupancy_trial(cache, derive_seed(seed, seed_stream::kComparison, i), cfg, accesses).miss_count;
  });
  d.low.assign(misses.begin(), misses.begin() + static_cast<std::ptrdiff_t>(trials));
  d.high.assign(misses.begin() + static_cast<std::ptrdiff_t>(trials), misses.end());
  d.mean_low = mean_of(d.low);
  d.mean_high = mean_of(d.high);
  d.sd_low = stddev_of(d.low);
  d.sd_high = stddev_of(d.high);
  d.separability = separability(d.low, d.high);
  return d;
}

struct BaselineComparison {
  SymbolDistribution mirage;
  SymbolDistribution baseline;
};

/// The covert-channel experiment with identical parameters on MIRAGE and on
/// the classical set-associative cache.
BaselineComparison baseline_comparison(const sim::MirageConfig& mirage_cfg,
                                       const sim::BaselineConfig& baseline_cfg,
                                       const ChannelConfig& cfg, std::uint64_t trials,
                                       std::uint64_t seed, unsigned jobs = 1);

}  // namespace mirage::attacks
