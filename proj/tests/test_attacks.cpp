#include <doctest.h>

#include <cmath>
#include <limits>

#include "mirage/attacks.hpp"

using namespace mirage;
using namespace mirage::attacks;

namespace {

sim::MirageConfig small_cache() {
  sim::MirageConfig c;
  c.sets_per_skew = 1024;  // 8192 data slots
  return c;
}

ChannelConfig small_channel() {
  ChannelConfig ch;
  ch.receiver = {600, 7, 1 << 24};
  ch.symbol = {60, 240};
  ch.sender_stride = 7;
  ch.calibration_trials = 10;
  return ch;
}

}  // namespace

TEST_CASE("separability on known samples") {
  CHECK(separability({1, 2, 3}, {4, 5, 6}) == doctest::Approx(3.0));
  CHECK(separability({4, 5, 6}, {1, 2, 3}) == doctest::Approx(3.0));
  CHECK(std::isinf(separability({1, 1}, {2, 2})));
  CHECK(separability({1, 1}, {1, 1}) == 0.0);
  CHECK(mean_of({}) == 0.0);
  CHECK(stddev_of({5}) == 0.0);
  CHECK(stddev_of({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(std::sqrt(32.0 / 7.0)));
}

TEST_CASE("template summary statistics") {
  const Template t = Template::from_samples(1000, {10, 12, 12, 14});
  CHECK(t.trials == 4);
  CHECK(t.mean == 12.0);
  CHECK(t.stddev == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK(t.miss_histogram.at(12) == 2);
}

TEST_CASE("maximum-likelihood classification") {
  const std::vector<Template> ts = {Template::from_samples(1000, {9, 10, 11}),
                                    Template::from_samples(2000, {19, 20, 21})};
  CHECK(classify(14, ts).label == 1000);
  CHECK(classify(16, ts).label == 2000);
  const Classification mid = classify(15, ts);
  CHECK(mid.confidence == doctest::Approx(0.5));
  const Classification far = classify(25, ts);
  CHECK(far.label == 2000);
  CHECK(far.confidence > 0.999);

  SUBCASE("wider template wins far in its tail") {
    const std::vector<Template> uneven = {Template::from_samples(1, {99, 100, 101}),
                                          Template::from_samples(2, {80, 100, 120})};
    CHECK(classify(100, uneven).label == 1);
    CHECK(classify(110, uneven).label == 2);
  }
  SUBCASE("zero spread falls back to nearest mean") {
    const std::vector<Template> flat = {Template::from_samples(1, {5, 5}), Template::from_samples(2, {9, 9})};
    CHECK(classify(6, flat).label == 1);
    CHECK(classify(8, flat).label == 2);
    CHECK(classify(7, flat).confidence == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(classify(1, {ts[0]}), ArgumentError);
}

TEST_CASE("prime and victim preconditions") {
  sim::MirageCache cache(small_cache());
  PrimeConfig too_many{9000, 1, 0};
  CHECK_THROWS_AS(prime(cache, too_many), ArgumentError);
  PrimeConfig ok{100, 3, 0};
  prime(cache, ok);
  CHECK_THROWS_AS(prime(cache, ok), ArgumentError);
  CHECK_THROWS_AS(victim_run(cache, 10, 3, 150, ok), ArgumentError);
  CHECK_NOTHROW(victim_run(cache, 10, 3, ok.end(), ok));
  PrimeConfig zero_stride{10, 0, 0};
  CHECK_THROWS_AS(zero_stride.validate(), ArgumentError);
}

TEST_CASE("probe misses cover every receiver line lost before the probe") {
  sim::MirageCache cache(small_cache());
  const ChannelConfig ch = small_channel();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TrialRecord r = occupancy_trial(cache, seed, ch, 240);
    CHECK(r.resident + r.self_evictions == ch.receiver.prime_count);
    CHECK(r.miss_count >= (ch.receiver.prime_count - r.resident) + r.victim.receiver_owned);
    CHECK(r.miss_count <= ch.receiver.prime_count);
    CHECK(r.victim.total_evictions == r.victim.receiver_owned + r.victim.sender_owned + r.victim.other);
  }
}

TEST_CASE("more sender installs mean more receiver misses") {
  const ChannelConfig ch = small_channel();
  const auto ts = build_templates({0, 200, 800}, 30, small_cache(), ch, 4);
  CHECK(ts[0].mean < ts[1].mean);
  CHECK(ts[1].mean < ts[2].mean);
  CHECK_THROWS_AS(build_templates({100}, 1, small_cache(), ch, 4), ArgumentError);
}

TEST_CASE("trial seeds depend only on seed, workload and trial index") {
  const ChannelConfig ch = small_channel();
  const auto both = build_templates({100, 300}, 6, small_cache(), ch, 42, 1);
  const auto one = build_templates({300}, 6, small_cache(), ch, 42, 3);
  CHECK(both[1].samples == one[0].samples);
}

TEST_CASE("covert channel decodes and is independent of the job count") {
  const ChannelConfig ch = small_channel();
  std::vector<int> bits;
  for (int i = 0; i < 40; ++i) bits.push_back((i * 7 + 3) % 5 < 2);
  const CovertReport a = covert_transmit(bits, small_cache(), ch, 77, 1);
  const CovertReport b = covert_transmit(bits, small_cache(), ch, 77, 4);
  CHECK(a.calibration_mean_low < a.threshold);
  CHECK(a.threshold < a.calibration_mean_high);
  CHECK(a.ber <= 0.1);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].miss_count == b.records[i].miss_count);
    CHECK(a.records[i].bit_decoded == b.records[i].bit_decoded);
  }
  CHECK_THROWS_AS(covert_transmit({}, small_cache(), ch, 1), ArgumentError);

  ChannelConfig idle = ch;
  idle.sender_enabled = false;
  const CovertReport silent = covert_transmit({1, 1, 1, 1}, small_cache(), idle, 77);
  for (const auto& r : silent.records) CHECK(r.victim_accesses == 0);
}

TEST_CASE("classification accuracy on held-out observations") {
  const ChannelConfig ch = small_channel();
  const std::vector<std::uint64_t> counts = {0, 1500};
  const auto ts = build_templates(counts, 20, small_cache(), ch, 10);
  const auto obs = sample_observations(counts, 20, small_cache(), ch, 11);
  CHECK(obs.size() == 40);
  CHECK(classification_accuracy(obs, ts) >= 0.95);
}

TEST_CASE("strided traffic on the LRU baseline gives symbol-independent misses") {
  ChannelConfig ch;
  ch.receiver = {2000, 1000, 1 << 20};
  ch.symbol = {100, 400};
  ch.sender_stride = 1000;
  const auto cmp = baseline_comparison(small_cache(), sim::BaselineConfig{}, ch, 5, 1);
  CHECK(cmp.baseline.separability < 0.2);
  CHECK(cmp.baseline.sd_low == 0.0);
  CHECK(cmp.mirage.mean_high > cmp.mirage.mean_low);
  CHECK_THROWS_AS(baseline_comparison(small_cache(), {}, ch, 1, 1), ArgumentError);
}

TEST_CASE("sender disabled leaves nothing to separate") {
  ChannelConfig ch = small_channel();
  ch.sender_enabled = false;
  const auto cmp = baseline_comparison(small_cache(), sim::BaselineConfig{}, ch, 30, 3);
  CHECK(cmp.baseline.separability == 0.0);
  CHECK(cmp.mirage.separability < 1.0);
}

TEST_CASE("baseline separability turns positive once the receiver fills the sender's sets") {
  // Stride-1000 lines reach 2048 of the 16384 sets; 32768 of them fill those sets.
  ChannelConfig ch;
  ch.receiver = {32768, 1000, std::uint64_t{1} << 32};
  ch.symbol = {1000, 4000};
  ch.sender_stride = 1000;
  const auto d = symbol_distribution([] { return sim::BaselineCache{}; }, ch, 3, 1);
  CHECK(d.mean_high > d.mean_low);
  CHECK(d.separability > 3);
}
