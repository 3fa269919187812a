#pragma once

// Closed-form bucket-and-ball estimates and a Monte Carlo cross-check.
//
// Buckets model tag sets, balls model line installs. lambda is the mean number
// of balls per bucket, B / buckets.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mirage/rng.hpp"

namespace mirage::analytics {

struct BucketBallParams {
  std::uint64_t balls = 131072;   // B
  std::uint64_t buckets = 32768;  // number of buckets
  unsigned base_state = 8;        // N
  unsigned extra = 6;             // m

  double lambda() const { return static_cast<double>(balls) / static_cast<double>(buckets); }
};

/// One birth-death step: B / (buckets * (N + 1)) * p_N^2, clamped to [0, 1].
double spill_prob_birth_death(double p_n, const BucketBallParams& params);

/// Chains the step from state `start` (probability 1) for `steps` transitions.
/// Element i is the probability of state start + i.
std::vector<double> spill_chain_birth_death(const BucketBallParams& params, unsigned start,
                                            unsigned steps);

enum class Method { BinomialExact, Poisson };

/// Expected number of buckets holding exactly `occupancy_target` balls:
///   BinomialExact: C(B, k) (1/b)^k (1 - 1/b)^(B-k) * b  (log space)
///   Poisson:       lambda^k e^-lambda / k! * b
double any_bucket_exact_prob(std::uint64_t occupancy_target, const BucketBallParams& params,
                             Method method);

/// Accesses for a collision among 2^bits values with probability target_prob:
/// ceil(sqrt(2 * 2^bits * ln(1 / (1 - target_prob)))).
std::uint64_t birthday_accesses(unsigned index_bits_total, double target_prob);
/// The 2^(bits/2) rule of thumb.
double birthday_rule_of_thumb(unsigned index_bits_total);

struct MWayRequirement {
  unsigned from_state = 0;
  unsigned to_state = 0;
  unsigned pairwise_bits = 0;
  unsigned invalid_tags_to_fill = 0;
  double expected_buckets_binomial = 0.0;
  double expected_buckets_poisson = 0.0;
  std::string note;
};

/// A set-associative eviction needs both sibling sets past all m extra ways,
/// so the relevant transition is N -> N + m, not N -> N + 1. Quantified with
/// any_bucket_exact_prob at occupancy N + m.
MWayRequirement m_way_requirement(const BucketBallParams& params, unsigned index_bits_per_skew = 14);

struct SpillStats {
  std::uint64_t throws = 0;
  std::optional<std::uint64_t> throws_until_first_spill;
  std::uint64_t spill_count = 0;
  unsigned max_occupancy = 0;
  /// occupancy_histogram[k]: throws that left their bucket holding k balls.
  std::vector<std::uint64_t> occupancy_histogram;
};

/// Throws balls one at a time. Each ball draws two independent uniform
/// buckets and lands in the emptier one (ties at random) when load_balanced,
/// otherwise in the first. When params.balls > 0 the system holds at most
/// that many balls: once full, a uniformly chosen resident ball is removed
/// before each throw. Stops when a bucket reaches spill_threshold or after
/// max_throws.
SpillStats bucket_ball_simulate(const BucketBallParams& params, bool load_balanced,
                                unsigned spill_threshold, std::uint64_t max_throws,
                                std::uint64_t seed);

/// Draws uniform `bits`-bit values until one repeats; returns the number of
/// draws including the repeating one.
std::uint64_t first_collision_draws(unsigned bits, Rng& rng);
double first_collision_median(unsigned bits, std::uint64_t trials, std::uint64_t seed);

struct SweepRow {
  std::uint64_t balls = 0;
  std::uint64_t buckets = 0;
  unsigned threshold = 0;
  bool load_balanced = false;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> throws_until_first_spill;
};

inline constexpr const char* kSweepCsvHeader =
    "B,buckets,threshold,load_balanced,seed,throws_until_first_spill";
std::string sweep_csv_row(const SweepRow& row);

}  // namespace mirage::analytics
