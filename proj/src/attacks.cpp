#include "mirage/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mirage::attacks {

void PrimeConfig::validate() const {
  if (stride == 0) throw ArgumentError("prime stride must be at least 1");
  if (prime_count > 0 && (std::numeric_limits<std::uint64_t>::max() - base) / stride < prime_count)
    throw ArgumentError("prime range overflows the address space");
}

void ChannelConfig::validate() const {
  receiver.validate();
  if (sender_stride == 0) throw ArgumentError("sender stride must be at least 1");
  if (symbol.low_accesses >= symbol.high_accesses)
    throw ArgumentError("low symbol must use fewer accesses than the high symbol");
}

double mean_of(const std::vector<std::uint64_t>& xs) {
  if (xs.empty()) return 0.0;
  long double sum = 0;
  for (std::uint64_t x : xs) sum += x;
  return static_cast<double>(sum / xs.size());
}

double stddev_of(const std::vector<std::uint64_t>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  long double acc = 0;
  for (std::uint64_t x : xs) {
    const double d = static_cast<double>(x) - m;
    acc += d * d;
  }
  return std::sqrt(static_cast<double>(acc / (xs.size() - 1)));
}

double separability(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  const double delta = std::abs(mean_of(b) - mean_of(a));
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = stddev_of(a);
  const double sb = stddev_of(b);
  const double dof = na + nb - 2.0;
  const double pooled = dof > 0 ? std::sqrt(((na - 1) * sa * sa + (nb - 1) * sb * sb) / dof) : 0.0;
  if (pooled == 0.0) return delta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return delta / pooled;
}

CovertReport covert_transmit(const std::vector<int>& bits, const sim::MirageConfig& cache_cfg,
                             const ChannelConfig& cfg, std::uint64_t seed, unsigned jobs) {
  return covert_transmit_with([&] { return sim::MirageCache(cache_cfg); }, bits, cfg, seed, jobs);
}

Template Template::from_samples(std::uint64_t victim_accesses, std::vector<std::uint64_t> samples) {
  Template t;
  t.victim_accesses = victim_accesses;
  t.trials = samples.size();
  for (std::uint64_t m : samples) ++t.miss_histogram[m];
  t.mean = mean_of(samples);
  t.stddev = stddev_of(samples);
  t.samples = std::move(samples);
  return t;
}

std::vector<std::uint64_t> default_template_counts() {
  std::vector<std::uint64_t> counts;
  for (std::uint64_t c = 500; c <= 8000; c += 500) counts.push_back(c);
  return counts;
}

std::vector<Template> build_templates(const std::vector<std::uint64_t>& access_counts,
                                      std::uint64_t trials_per_template,
                                      const sim::MirageConfig& cache_cfg, const ChannelConfig& cfg,
                                      std::uint64_t seed, unsigned jobs) {
  if (access_counts.empty()) throw ArgumentError("build_templates needs at least one access count");
  if (trials_per_template < 2) throw ArgumentError("templates need at least two trials each");
  cfg.validate();
  const std::size_t total = access_counts.size() * trials_per_template;
  std::vector<std::uint64_t> misses(total);
  parallel_for(total, jobs, [&] { return sim::MirageCache(cache_cfg); },
               [&](sim::MirageCache& cache, std::size_t i) {
                 const std::uint64_t count = access_counts[i / trials_per_template];
                 const std::uint64_t trial = i % trials_per_template;
                 const std::uint64_t s = derive_seed(derive_seed(seed, seed_stream::kTemplates, count), trial);
                 misses[i] = occupancy_trial(cache, s, cfg, count).miss_count;
               });
  std::vector<Template> out;
  out.reserve(access_counts.size());
  for (std::size_t t = 0; t < access_counts.size(); ++t) {
    const auto first = misses.begin() + static_cast<std::ptrdiff_t>(t * trials_per_template);
    out.push_back(Template::from_samples(
        access_counts[t],
        std::vector<std::uint64_t>(first, first + static_cast<std::ptrdiff_t>(trials_per_template))));
  }
  return out;
}

Classification classify(double observed, const std::vector<Template>& templates) {
  if (templates.size() < 2) throw ArgumentError("classification needs at least two templates");
  const bool degenerate = std::any_of(templates.begin(), templates.end(),
                                      [](const Template& t) { return !(t.stddev > 0.0); });
  if (degenerate) {
    std::size_t best = 0;
    std::size_t ties = 1;
    for (std::size_t i = 1; i < templates.size(); ++i) {
      const double d = std::abs(templates[i].mean - observed);
      const double b = std::abs(templates[best].mean - observed);
      if (d < b) {
        best = i;
        ties = 1;
      } else if (d == b) {
        ++ties;
      }
    }
    return {templates[best].victim_accesses, 1.0 / static_cast<double>(ties)};
  }
  std::vector<double> loglik(templates.size());
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const double z = (observed - templates[i].mean) / templates[i].stddev;
    loglik[i] = -std::log(templates[i].stddev) - 0.5 * z * z;
  }
  const auto best = static_cast<std::size_t>(std::max_element(loglik.begin(), loglik.end()) - loglik.begin());
  double norm = 0.0;
  for (double l : loglik) norm += std::exp(l - loglik[best]);
  return {templates[best].victim_accesses, 1.0 / norm};
}

std::vector<Observation> sample_observations(const std::vector<std::uint64_t>& access_counts,
                                             std::uint64_t per_count,
                                             const sim::MirageConfig& cache_cfg,
                                             const ChannelConfig& cfg, std::uint64_t seed,
                                             unsigned jobs) {
  cfg.validate();
  std::vector<Observation> out(access_counts.size() * per_count);
  parallel_for(out.size(), jobs, [&] { return sim::MirageCache(cache_cfg); },
               [&](sim::MirageCache& cache, std::size_t i) {
                 const std::uint64_t count = access_counts[i / per_count];
                 const std::uint64_t s =
                     derive_seed(derive_seed(seed, seed_stream::kObservations, count), i % per_count);
                 out[i] = {count, occupancy_trial(cache, s, cfg, count).miss_count};
               });
  return out;
}

double classification_accuracy(const std::vector<Observation>& observations,
                               const std::vector<Template>& templates) {
  if (observations.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Observation& o : observations)
    correct += classify(static_cast<double>(o.miss_count), templates).label == o.victim_accesses ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(observations.size());
}

BaselineComparison baseline_comparison(const sim::MirageConfig& mirage_cfg,
                                       const sim::BaselineConfig& baseline_cfg,
                                       const ChannelConfig& cfg, std::uint64_t trials,
                                       std::uint64_t seed, unsigned jobs) {
  if (trials < 2) throw ArgumentError("baseline comparison needs at least two trials per symbol");
  BaselineComparison c;
  c.mirage = symbol_distribution([&] { return sim::MirageCache(mirage_cfg); }, cfg, trials, seed, jobs);
  c.baseline = symbol_distribution([&] { return sim::BaselineCache(baseline_cfg); }, cfg, trials, seed, jobs);
  return c;
}

}  // namespace mirage::attacks
