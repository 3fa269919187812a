#include "mirage/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "mirage/errors.hpp"

namespace mirage::analytics {

namespace {

void require_buckets(const BucketBallParams& params) {
  if (params.buckets == 0) throw ArgumentError("bucket count must be at least 1");
}

}  // namespace

double spill_prob_birth_death(double p_n, const BucketBallParams& params) {
  require_buckets(params);
  if (!(p_n >= 0.0 && p_n <= 1.0)) throw ArgumentError("p_N must lie in [0, 1]");
  const double rate = static_cast<double>(params.balls) /
                      (static_cast<double>(params.buckets) * (params.base_state + 1.0));
  return std::clamp(rate * p_n * p_n, 0.0, 1.0);
}

std::vector<double> spill_chain_birth_death(const BucketBallParams& params, unsigned start,
                                            unsigned steps) {
  std::vector<double> chain{1.0};
  BucketBallParams p = params;
  for (unsigned i = 0; i < steps; ++i) {
    p.base_state = start + i;
    chain.push_back(spill_prob_birth_death(chain.back(), p));
  }
  return chain;
}

double any_bucket_exact_prob(std::uint64_t occupancy_target, const BucketBallParams& params,
                             Method method) {
  require_buckets(params);
  if (occupancy_target > params.balls) throw ArgumentError("occupancy target exceeds ball count");
  const auto k = static_cast<double>(occupancy_target);
  const auto b = static_cast<double>(params.buckets);
  const auto n = static_cast<double>(params.balls);
  if (method == Method::Poisson) {
    const double lambda = params.lambda();
    if (lambda == 0.0) return occupancy_target == 0 ? b : 0.0;
    return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0) + std::log(b));
  }
  if (params.buckets == 1) return occupancy_target == params.balls ? 1.0 : 0.0;
  const double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  const double log_term = log_choose - k * std::log(b) + (n - k) * std::log1p(-1.0 / b) + std::log(b);
  return std::exp(log_term);
}

std::uint64_t birthday_accesses(unsigned index_bits_total, double target_prob) {
  if (!(target_prob > 0.0 && target_prob < 1.0)) throw ArgumentError("target probability must lie in (0, 1)");
  const double space = std::ldexp(1.0, static_cast<int>(index_bits_total));
  return static_cast<std::uint64_t>(std::ceil(std::sqrt(2.0 * space * -std::log1p(-target_prob))));
}

double birthday_rule_of_thumb(unsigned index_bits_total) {
  return std::pow(2.0, index_bits_total / 2.0);
}

MWayRequirement m_way_requirement(const BucketBallParams& params, unsigned index_bits_per_skew) {
  if (params.extra == 0) throw ArgumentError("m = 0 has no extra tags to fill");
  MWayRequirement r;
  r.from_state = params.base_state;
  r.to_state = params.base_state + params.extra;
  r.pairwise_bits = 2 * index_bits_per_skew;
  r.invalid_tags_to_fill = 2 * params.extra;
  if (r.to_state <= params.balls) {
    r.expected_buckets_binomial = any_bucket_exact_prob(r.to_state, params, Method::BinomialExact);
    r.expected_buckets_poisson = any_bucket_exact_prob(r.to_state, params, Method::Poisson);
  }
  std::ostringstream note;
  note << "eviction needs a transition N=" << r.from_state << " -> N+m=" << r.to_state
       << ": all " << r.invalid_tags_to_fill << " invalid tags of a sibling pair filled, a "
       << r.invalid_tags_to_fill << "-deep multi-collision on the " << r.pairwise_bits
       << "-bit index tuple";
  if (params.extra == 1) note << " (single collision)";
  r.note = note.str();
  return r;
}

SpillStats bucket_ball_simulate(const BucketBallParams& params, bool load_balanced,
                                unsigned spill_threshold, std::uint64_t max_throws,
                                std::uint64_t seed) {
  require_buckets(params);
  if (spill_threshold < 1) throw ArgumentError("spill threshold must be at least 1");
  if (max_throws == 0) throw ArgumentError("max_throws must be positive");
  Rng rng(seed);
  std::vector<std::uint32_t> load(params.buckets, 0);
  std::vector<std::uint32_t> resident;  // bucket of every resident ball
  if (params.balls > 0) resident.reserve(params.balls);
  SpillStats stats;
  stats.occupancy_histogram.assign(spill_threshold + 1, 0);
  for (std::uint64_t t = 1; t <= max_throws; ++t) {
    if (params.balls > 0 && resident.size() == params.balls) {
      const std::size_t victim = rng.below(resident.size());
      --load[resident[victim]];
      resident[victim] = resident.back();
      resident.pop_back();
    }
    const auto first = static_cast<std::uint32_t>(rng.below(params.buckets));
    const auto second = static_cast<std::uint32_t>(rng.below(params.buckets));
    std::uint32_t bucket = first;
    if (load_balanced && (load[second] < load[first] || (load[second] == load[first] && rng.coin())))
      bucket = second;
    const unsigned occupancy = ++load[bucket];
    if (params.balls > 0) resident.push_back(bucket);
    stats.throws = t;
    stats.max_occupancy = std::max(stats.max_occupancy, occupancy);
    ++stats.occupancy_histogram[std::min(occupancy, spill_threshold)];
    if (occupancy >= spill_threshold) {
      stats.throws_until_first_spill = t;
      stats.spill_count = 1;
      break;
    }
  }
  return stats;
}

std::uint64_t first_collision_draws(unsigned bits, Rng& rng) {
  if (bits > 30) throw ArgumentError("first_collision_draws supports at most 30 bits");
  const std::uint64_t space = 1ULL << bits;
  std::unordered_set<std::uint64_t> seen;
  for (std::uint64_t draws = 1;; ++draws) {
    if (!seen.insert(rng.below(space)).second) return draws;
  }
}

double first_collision_median(unsigned bits, std::uint64_t trials, std::uint64_t seed) {
  if (trials == 0) throw ArgumentError("need at least one trial");
  std::vector<std::uint64_t> draws(trials);
  for (std::uint64_t i = 0; i < trials; ++i) {
    Rng rng(derive_seed(seed, i));
    draws[i] = first_collision_draws(bits, rng);
  }
  std::sort(draws.begin(), draws.end());
  if (trials % 2 == 1) return static_cast<double>(draws[trials / 2]);
  return 0.5 * static_cast<double>(draws[trials / 2 - 1] + draws[trials / 2]);
}

std::string sweep_csv_row(const SweepRow& row) {
  std::ostringstream os;
  os << row.balls << ',' << row.buckets << ',' << row.threshold << ',' << (row.load_balanced ? 1 : 0)
     << ',' << row.seed << ',';
  if (row.throws_until_first_spill) os << *row.throws_until_first_spill;
  else os << "NA";
  return os.str();
}

}  // namespace mirage::analytics
