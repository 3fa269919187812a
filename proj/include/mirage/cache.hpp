#pragma once

// MIRAGE last-level cache model.
//
// The tag store is split into two skews of `sets_per_skew` sets, each set with
// base_ways + extra_ways tag slots. The data store is a flat array of
// sets_per_skew * base_ways line slots. Tags and data entries reference each
// other (forward pointer / reverse pointer), so the data store is fully
// associative while lookup stays set-associative.
//
// Every miss installs the line into the sibling set with more invalid tags and
// then evicts a uniformly chosen data slot, whether or not the store has free
// slots. A set-associative eviction (SAE) happens only when both sibling sets
// are full.

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mirage/rand_cipher.hpp"
#include "mirage/rng.hpp"

namespace mirage::sim {

struct MirageConfig {
  unsigned skews = 2;
  std::uint32_t sets_per_skew = 16384;
  unsigned base_ways = 8;
  unsigned extra_ways = 6;
  cipher::KeyPair keys = cipher::KeyPair::defaults(cipher::Algorithm::Present80);
  cipher::IndexMode mode = cipher::IndexMode::Correct;
  std::uint64_t rng_seed = 1;

  unsigned index_bits() const;
  unsigned ways() const { return base_ways + extra_ways; }
  std::uint64_t data_capacity() const { return std::uint64_t{sets_per_skew} * base_ways; }
  std::uint64_t tag_slots() const { return std::uint64_t{skews} * sets_per_skew * ways(); }
  /// Throws ConfigError on unsupported geometry or keys.
  void validate() const;
};

enum class AccessKind { Hit, MissInstalled };

struct AccessOutcome {
  AccessKind kind = AccessKind::Hit;
  /// Line removed to make room for the install. For MIRAGE this is the global
  /// eviction victim; for the baseline cache it is the LRU victim.
  std::optional<std::uint64_t> globally_evicted;
  bool sae_triggered = false;
  std::optional<std::uint64_t> sae_victim;

  bool hit() const { return kind == AccessKind::Hit; }
};

/// Monotone counters. `global_evictions` counts evictions of valid lines.
struct CacheStats {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t global_evictions = 0;
  std::uint64_t sae_count = 0;

  static constexpr const char* kCsvHeader = "accesses,hits,misses,global_evictions,sae_count";
  std::string csv_row() const;
  friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

struct CacheInitState {
  unsigned valid_tags_per_set = 0;
  unsigned invalid_tags_per_set = 0;
};

struct TagLocation {
  unsigned skew = 0;
  std::uint32_t set = 0;
  unsigned way = 0;
  friend bool operator==(const TagLocation&, const TagLocation&) = default;
};

class MirageCache {
 public:
  explicit MirageCache(const MirageConfig& config);

  const MirageConfig& config() const { return config_; }

  bool lookup(std::uint64_t line_addr) const;
  AccessOutcome access(std::uint64_t line_addr);

  std::uint64_t occupancy() const { return occupancy_; }
  const CacheStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }

  /// Invalidates every entry, clears the counters and reseeds the generator.
  void reset(std::uint64_t rng_seed);
  void reset() { reset(config_.rng_seed); }

  /// Sibling indices of a line. Results are memoized in a direct-mapped table
  /// that survives reset(), since the keys never change for a cache instance.
  cipher::SiblingIndices indices(std::uint64_t line_addr) const;
  unsigned valid_tags(unsigned skew, std::uint32_t set) const;
  std::optional<TagLocation> locate(std::uint64_t line_addr) const;

  /// Places `line_addr` in its sibling set of `skew` without load balancing or
  /// global eviction, taking the lowest free data slot. For building states in
  /// experiments and tests; returns false if the set or the data store is full.
  bool place(std::uint64_t line_addr, unsigned skew);

  /// Fills every tag set with `valid_tags_per_set` placeholder lines (ids with
  /// the top bit set). Requires an empty cache and enough data slots.
  void prefill(const CacheInitState& init);

  /// Full scan of the pointer bijection and per-set counts. Returns an empty
  /// string when consistent, otherwise a description of the first violation.
  std::string check_invariants() const;

 private:
  struct TagEntry {
    std::uint64_t line = 0;
    std::uint32_t data_ptr = 0;
    bool valid = false;
  };
  struct DataEntry {
    std::uint64_t line = 0;
    std::uint32_t tag_slot = 0;
    bool valid = false;
  };

  std::size_t set_id(unsigned skew, std::uint32_t set) const {
    return std::size_t{skew} * config_.sets_per_skew + set;
  }
  std::size_t slot_id(std::size_t set, unsigned way) const { return set * ways_ + way; }
  TagLocation decode(std::size_t slot) const;
  std::optional<std::size_t> find(const cipher::SiblingIndices& s, std::uint64_t line) const;
  void invalidate_data(std::uint32_t data_slot);
  void bind(std::size_t tag_slot, std::uint32_t data_slot, std::uint64_t line);

  struct MemoEntry {
    std::uint64_t line = 0;
    cipher::SiblingIndices indices;
    bool valid = false;
  };
  static constexpr std::size_t kMemoSize = std::size_t{1} << 16;

  MirageConfig config_;
  cipher::IndexFunction index_;
  mutable std::vector<MemoEntry> memo_;
  unsigned ways_;
  std::vector<TagEntry> tags_;
  std::vector<DataEntry> data_;
  std::vector<std::uint8_t> valid_per_set_;
  std::uint64_t occupancy_ = 0;
  CacheStats stats_;
  Rng rng_;
};

struct BaselineConfig {
  std::uint32_t sets = 16384;
  unsigned ways = 16;
  void validate() const;
  std::uint64_t capacity() const { return std::uint64_t{sets} * ways; }
};

/// Physically indexed set-associative cache with true LRU replacement.
class BaselineCache {
 public:
  explicit BaselineCache(const BaselineConfig& config = {});

  const BaselineConfig& config() const { return config_; }
  bool lookup(std::uint64_t line_addr) const;
  AccessOutcome access(std::uint64_t line_addr);
  std::uint64_t occupancy() const { return occupancy_; }
  const CacheStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }
  /// The seed is ignored; the baseline has no random state.
  void reset(std::uint64_t rng_seed = 0);

 private:
  struct Way {
    std::uint64_t line = 0;
    std::uint64_t last_use = 0;
    bool valid = false;
  };

  BaselineConfig config_;
  std::vector<Way> ways_;
  std::uint64_t clock_ = 0;
  std::uint64_t occupancy_ = 0;
  CacheStats stats_;
};

AccessOutcome baseline_access(BaselineCache& cache, std::uint64_t line_addr);

template <typename C>
concept CacheModel = requires(C cache, const C ccache, std::uint64_t addr) {
  { cache.access(addr) } -> std::same_as<AccessOutcome>;
  { ccache.lookup(addr) } -> std::same_as<bool>;
  { ccache.occupancy() } -> std::convertible_to<std::uint64_t>;
  { ccache.stats() } -> std::convertible_to<CacheStats>;
  cache.reset(addr);
};

}  // namespace mirage::sim
