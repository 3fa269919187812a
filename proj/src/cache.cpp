#include "mirage/cache.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "mirage/errors.hpp"

namespace mirage::sim {

std::string CacheStats::csv_row() const {
  std::ostringstream os;
  os << accesses << ',' << hits << ',' << misses << ',' << global_evictions << ',' << sae_count;
  return os.str();
}

unsigned MirageConfig::index_bits() const {
  return static_cast<unsigned>(std::countr_zero(sets_per_skew));
}

void MirageConfig::validate() const {
  if (skews != 2) throw ConfigError("only two skews are supported (one per key), got " + std::to_string(skews));
  if (sets_per_skew < 2 || !std::has_single_bit(sets_per_skew))
    throw ConfigError("sets_per_skew must be a power of two >= 2");
  if (index_bits() > 30) throw ConfigError("sets_per_skew too large");
  if (base_ways == 0) throw ConfigError("base_ways must be positive");
  if (ways() > 255) throw ConfigError("base_ways + extra_ways must not exceed 255");
  if (data_capacity() > 0xFFFFFFFFULL) throw ConfigError("data store too large");
  keys.validate();
}

MirageCache::MirageCache(const MirageConfig& config)
    : config_((config.validate(), config)),
      index_(config.keys, config.index_bits(), config.mode),
      memo_(kMemoSize),
      ways_(config.ways()),
      tags_(config.tag_slots()),
      data_(config.data_capacity()),
      valid_per_set_(std::size_t{config.skews} * config.sets_per_skew, 0),
      rng_(config.rng_seed) {}

void MirageCache::reset(std::uint64_t rng_seed) {
  std::fill(tags_.begin(), tags_.end(), TagEntry{});
  std::fill(data_.begin(), data_.end(), DataEntry{});
  std::fill(valid_per_set_.begin(), valid_per_set_.end(), std::uint8_t{0});
  occupancy_ = 0;
  stats_ = {};
  rng_.reseed(rng_seed);
}

cipher::SiblingIndices MirageCache::indices(std::uint64_t line_addr) const {
  MemoEntry& e = memo_[mix64(line_addr) & (kMemoSize - 1)];
  if (!e.valid || e.line != line_addr) e = {line_addr, index_(line_addr), true};
  return e.indices;
}

TagLocation MirageCache::decode(std::size_t slot) const {
  const std::size_t set = slot / ways_;
  return {static_cast<unsigned>(set / config_.sets_per_skew),
          static_cast<std::uint32_t>(set % config_.sets_per_skew),
          static_cast<unsigned>(slot % ways_)};
}

std::optional<std::size_t> MirageCache::find(const cipher::SiblingIndices& s,
                                             std::uint64_t line) const {
  const std::size_t sets[2] = {set_id(0, s.i1), set_id(1, s.i2)};
  for (std::size_t set : sets) {
    const std::size_t first = slot_id(set, 0);
    for (unsigned w = 0; w < ways_; ++w) {
      const TagEntry& t = tags_[first + w];
      if (t.valid && t.line == line) return first + w;
    }
  }
  return std::nullopt;
}

bool MirageCache::lookup(std::uint64_t line_addr) const {
  return find(indices(line_addr), line_addr).has_value();
}

std::optional<TagLocation> MirageCache::locate(std::uint64_t line_addr) const {
  const auto slot = find(indices(line_addr), line_addr);
  if (!slot) return std::nullopt;
  return decode(*slot);
}

unsigned MirageCache::valid_tags(unsigned skew, std::uint32_t set) const {
  return valid_per_set_.at(set_id(skew, set));
}

void MirageCache::invalidate_data(std::uint32_t data_slot) {
  DataEntry& d = data_[data_slot];
  TagEntry& t = tags_[d.tag_slot];
  t.valid = false;
  --valid_per_set_[d.tag_slot / ways_];
  d.valid = false;
  --occupancy_;
}

void MirageCache::bind(std::size_t tag_slot, std::uint32_t data_slot, std::uint64_t line) {
  tags_[tag_slot] = {line, data_slot, true};
  data_[data_slot] = {line, static_cast<std::uint32_t>(tag_slot), true};
  ++valid_per_set_[tag_slot / ways_];
  ++occupancy_;
}

AccessOutcome MirageCache::access(std::uint64_t line_addr) {
  ++stats_.accesses;
  const cipher::SiblingIndices s = indices(line_addr);
  if (find(s, line_addr)) {
    ++stats_.hits;
    return {};
  }
  ++stats_.misses;
  AccessOutcome out;
  out.kind = AccessKind::MissInstalled;

  // Load balancing: the sibling set with more invalid tags, ties at random.
  const std::size_t set0 = set_id(0, s.i1);
  const std::size_t set1 = set_id(1, s.i2);
  const unsigned valid0 = valid_per_set_[set0];
  const unsigned valid1 = valid_per_set_[set1];
  std::size_t set = set0;
  if (valid1 < valid0 || (valid1 == valid0 && rng_.coin())) set = set1;

  std::size_t tag_slot = 0;
  const unsigned valid = valid_per_set_[set];
  if (valid == ways_) {
    // Both sibling sets are full: set-associative eviction.
    tag_slot = slot_id(set, static_cast<unsigned>(rng_.below(ways_)));
    out.sae_triggered = true;
    out.sae_victim = tags_[tag_slot].line;
    invalidate_data(tags_[tag_slot].data_ptr);
    ++stats_.sae_count;
  } else {
    auto pick = rng_.below(ways_ - valid);
    const std::size_t first = slot_id(set, 0);
    for (unsigned w = 0; w < ways_; ++w) {
      if (tags_[first + w].valid) continue;
      if (pick-- == 0) {
        tag_slot = first + w;
        break;
      }
    }
  }

  // Global eviction on every install, over all data slots.
  const auto data_slot = static_cast<std::uint32_t>(rng_.below(data_.size()));
  if (data_[data_slot].valid) {
    out.globally_evicted = data_[data_slot].line;
    invalidate_data(data_slot);
    ++stats_.global_evictions;
  }
  bind(tag_slot, data_slot, line_addr);
  return out;
}

bool MirageCache::place(std::uint64_t line_addr, unsigned skew) {
  if (skew >= config_.skews) throw ArgumentError("skew out of range");
  const cipher::SiblingIndices s = indices(line_addr);
  if (find(s, line_addr)) return false;
  const std::size_t set = set_id(skew, skew == 0 ? s.i1 : s.i2);
  if (valid_per_set_[set] == ways_) return false;
  const auto free_data = std::find_if(data_.begin(), data_.end(), [](const DataEntry& d) { return !d.valid; });
  if (free_data == data_.end()) return false;
  for (unsigned w = 0; w < ways_; ++w) {
    const std::size_t slot = slot_id(set, w);
    if (!tags_[slot].valid) {
      bind(slot, static_cast<std::uint32_t>(free_data - data_.begin()), line_addr);
      return true;
    }
  }
  return false;
}

void MirageCache::prefill(const CacheInitState& init) {
  if (init.valid_tags_per_set + init.invalid_tags_per_set != ways_)
    throw ArgumentError("valid + invalid tags per set must equal the set's ways");
  if (occupancy_ != 0) throw ArgumentError("prefill requires an empty cache");
  const std::uint64_t needed = std::uint64_t{init.valid_tags_per_set} * valid_per_set_.size();
  if (needed > data_.size()) throw ArgumentError("initial state needs more data slots than the store holds");
  std::uint32_t next_data = 0;
  for (std::size_t set = 0; set < valid_per_set_.size(); ++set) {
    for (unsigned w = 0; w < init.valid_tags_per_set; ++w) {
      const std::uint64_t placeholder = (1ULL << 63) | (std::uint64_t{set} << 8) | w;
      bind(slot_id(set, w), next_data++, placeholder);
    }
  }
}

std::string MirageCache::check_invariants() const {
  std::ostringstream err;
  std::uint64_t valid_tags = 0;
  for (std::size_t set = 0; set < valid_per_set_.size(); ++set) {
    unsigned count = 0;
    for (unsigned w = 0; w < ways_; ++w) {
      const std::size_t slot = slot_id(set, w);
      const TagEntry& t = tags_[slot];
      if (!t.valid) continue;
      ++count;
      if (t.data_ptr >= data_.size()) {
        err << "tag slot " << slot << " points past the data store";
        return err.str();
      }
      const DataEntry& d = data_[t.data_ptr];
      if (!d.valid || d.tag_slot != slot || d.line != t.line) {
        err << "tag slot " << slot << " and data slot " << t.data_ptr << " disagree";
        return err.str();
      }
    }
    if (count != valid_per_set_[set] || count > ways_) {
      err << "set " << set << " count mismatch";
      return err.str();
    }
    valid_tags += count;
  }
  std::uint64_t valid_data = 0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const DataEntry& d = data_[i];
    if (!d.valid) continue;
    ++valid_data;
    const TagEntry& t = tags_[d.tag_slot];
    if (!t.valid || t.data_ptr != i || t.line != d.line) {
      err << "data slot " << i << " has a dangling reverse pointer";
      return err.str();
    }
  }
  if (valid_tags != valid_data || valid_data != occupancy_) {
    err << "valid tags " << valid_tags << ", valid data " << valid_data << ", occupancy " << occupancy_;
    return err.str();
  }
  return {};
}

}  // namespace mirage::sim
