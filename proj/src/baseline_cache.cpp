#include <algorithm>
#include <bit>

#include "mirage/cache.hpp"
#include "mirage/errors.hpp"

namespace mirage::sim {

void BaselineConfig::validate() const {
  if (sets == 0 || !std::has_single_bit(sets)) throw ConfigError("baseline sets must be a power of two");
  if (ways == 0) throw ConfigError("baseline ways must be positive");
}

BaselineCache::BaselineCache(const BaselineConfig& config)
    : config_((config.validate(), config)), ways_(config.capacity()) {}

void BaselineCache::reset(std::uint64_t) {
  std::fill(ways_.begin(), ways_.end(), Way{});
  clock_ = 0;
  occupancy_ = 0;
  stats_ = {};
}

bool BaselineCache::lookup(std::uint64_t line_addr) const {
  const std::size_t first = (line_addr & (config_.sets - 1)) * config_.ways;
  for (unsigned w = 0; w < config_.ways; ++w) {
    const Way& way = ways_[first + w];
    if (way.valid && way.line == line_addr) return true;
  }
  return false;
}

AccessOutcome BaselineCache::access(std::uint64_t line_addr) {
  ++stats_.accesses;
  ++clock_;
  const std::size_t first = (line_addr & (config_.sets - 1)) * config_.ways;
  std::size_t victim = first;
  bool have_free = false;
  for (unsigned w = 0; w < config_.ways; ++w) {
    Way& way = ways_[first + w];
    if (way.valid && way.line == line_addr) {
      way.last_use = clock_;
      ++stats_.hits;
      return {};
    }
    if (have_free) continue;
    if (!way.valid) {
      victim = first + w;
      have_free = true;
    } else if (way.last_use < ways_[victim].last_use) {
      victim = first + w;
    }
  }
  ++stats_.misses;
  AccessOutcome out;
  out.kind = AccessKind::MissInstalled;
  Way& slot = ways_[victim];
  if (slot.valid) {
    out.globally_evicted = slot.line;
    ++stats_.global_evictions;
  } else {
    ++occupancy_;
  }
  slot = {line_addr, clock_, true};
  return out;
}

AccessOutcome baseline_access(BaselineCache& cache, std::uint64_t line_addr) {
  return cache.access(line_addr);
}

}  // namespace mirage::sim
