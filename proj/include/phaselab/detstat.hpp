#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "phaselab/distribution.hpp"
#include "phaselab/errors.hpp"
#include "phaselab/geometry.hpp"
#include "phaselab/special.hpp"

namespace phaselab {

/// Decaying source: mean photon number R^2, decay rate Gamma, observation
/// window T.
struct SourceParams {
  double R = 1.0;
  double Gamma = 1.0;
  double T = 1.0;

  /// Mean number of detections in [0, T]: R^2 (1 - e^{-Gamma T}).
  double mean_count() const { return R * R * -std::expm1(-Gamma * T); }
};

/// Probability of exactly L detections in the window (Poissonian, independent
/// of how the detectors are arranged).
inline double count_probability(const SourceParams& src, int L) {
  return poisson_pmf(L, src.mean_count());
}

/// How the L detections split over the channels, in channel order.
struct Partition {
  std::vector<int> counts;

  int total() const {
    int n = 0;
    for (int c : counts) n += c;
    return n;
  }
  bool operator==(const Partition&) const = default;
  bool operator<(const Partition& o) const { return counts < o.counts; }
};

/// log of the partition factor F({n_s}) = <prod_s g_s^{n_s}> under the given
/// initial distribution.  F depends only on the counts, not the detection
/// order or times.
inline double log_history_weight(const PhaseDistribution& init,
                                 std::span<const DetectorChannel> channels,
                                 const Partition& partition) {
  if (partition.counts.size() != channels.size())
    throw std::invalid_argument("log_history_weight: counts/channels size mismatch");
  PhaseDistribution dist = init;
  for (std::size_t s = 0; s < channels.size(); ++s) {
    if (partition.counts[s] < 0) throw std::invalid_argument("log_history_weight: negative count");
    dist = dist.after_detection(channels[s], partition.counts[s]);
  }
  const double ratio = dist.normalization() / init.normalization();
  if (!(ratio > 0.0)) throw AnnihilatedDistribution();
  return dist.log_prefactor() - init.log_prefactor() + std::log(ratio);
}

inline double history_weight(const PhaseDistribution& init,
                             std::span<const DetectorChannel> channels,
                             const Partition& partition) {
  try {
    return std::exp(log_history_weight(init, channels, partition));
  } catch (const AnnihilatedDistribution&) {
    return 0.0;  // impossible history
  }
}

/// log of the partition probability given that exactly L = sum n_s
/// detections occurred: log[ multinomial(L; {n_s}) * F({n_s}) ].  Impossible
/// partitions yield -infinity.
inline double log_partition_probability(const PhaseDistribution& init,
                                        std::span<const DetectorChannel> channels,
                                        const Partition& partition) {
  double lw;
  try {
    lw = log_history_weight(init, channels, partition);
  } catch (const AnnihilatedDistribution&) {
    return -std::numeric_limits<double>::infinity();
  }
  double lmult = log_factorial(partition.total());
  for (int n : partition.counts) lmult -= log_factorial(n);
  return lmult + lw;
}

inline double partition_probability(const PhaseDistribution& init,
                                    std::span<const DetectorChannel> channels,
                                    const Partition& partition) {
  return std::exp(log_partition_probability(init, channels, partition));
}

/// Closed form for a single balanced beam splitter fed by a phase-symmetric
/// state: P(n1, n2 | M) = 2^{-2M} C(2 n1, n1) C(2 n2, n2) with M = n1 + n2.
/// Exhibits the bunching of detections into one output channel.
inline double two_channel_uniform_closed_form(int M, int n1) {
  if (n1 < 0 || n1 > M) throw std::invalid_argument("two_channel_uniform_closed_form: n1 out of range");
  const int n2 = M - n1;
  if (M <= 30) {
    return static_cast<double>(binomial_u64(2 * n1, n1)) * static_cast<double>(binomial_u64(2 * n2, n2)) *
           std::ldexp(1.0, -2 * M);
  }
  return std::exp(log_binomial(2 * n1, n1) + log_binomial(2 * n2, n2) - 2 * M * std::log(2.0));
}

/// Marginal over one beam splitter of the four-channel partition law:
/// P(n1, n2 | M) = C(M, n1) 2^M <g_1^{n1} g_2^{n2}>, evaluated through the
/// exact ring-integral algebra.  Summing the four-channel probabilities over
/// the other splitter's counts must reproduce this.
inline double two_channel_marginal(const PhaseDistribution& init,
                                   std::span<const DetectorChannel> channels, int n1, int n2) {
  if (channels.size() < 2) throw std::invalid_argument("two_channel_marginal: need the two channels");
  double lw;
  try {
    lw = log_history_weight(init, channels.first(2), Partition{{n1, n2}});
  } catch (const AnnihilatedDistribution&) {
    return 0.0;
  }
  const int M = n1 + n2;
  return std::exp(log_binomial(M, n1) + M * std::log(2.0) + lw);
}

namespace detail {

inline double composition_count(int L, int cells) {
  // C(L + cells - 1, cells - 1), in floating point (budget check only)
  double r = 1.0;
  for (int i = 1; i < cells; ++i) r *= static_cast<double>(L + i) / i;
  return r;
}

template <typename Visit>
void enumerate_compositions_rec(int remaining, int cell, std::vector<int>& counts, Visit&& visit) {
  if (cell + 1 == static_cast<int>(counts.size())) {
    counts[static_cast<std::size_t>(cell)] = remaining;
    visit(counts);
    return;
  }
  for (int n = 0; n <= remaining; ++n) {
    counts[static_cast<std::size_t>(cell)] = n;
    enumerate_compositions_rec(remaining - n, cell + 1, counts, visit);
  }
}

}  // namespace detail

/// Visits every way to split L detections over `cells` channels, in
/// lexicographic order.  Refuses jobs beyond the composition budget.
template <typename Visit>
void enumerate_compositions(int L, int cells, Visit&& visit, double budget = 1e7) {
  if (L < 0 || cells < 1) throw std::invalid_argument("enumerate_compositions: bad arguments");
  if (detail::composition_count(L, cells) > budget)
    throw EnumerationBudgetExceeded("enumerate_compositions: composition count exceeds budget");
  std::vector<int> counts(static_cast<std::size_t>(cells), 0);
  detail::enumerate_compositions_rec(L, 0, counts, visit);
}

/// All partitions of L whose probability is within relative tolerance 1e-9
/// of the maximum, optionally restricted by a constraint; lexicographically
/// sorted.  Ties at the maximum are genuine features of the statistics (the
/// bunching maxima come in symmetric families), hence the set-valued result.
inline std::vector<Partition> most_probable_partitions(
    const PhaseDistribution& init, std::span<const DetectorChannel> channels, int L,
    const std::function<bool(const Partition&)>& constraint = nullptr, double budget = 1e7) {
  const double rel_tol = 1e-9;
  std::vector<std::pair<Partition, double>> near_best;
  double best = -std::numeric_limits<double>::infinity();
  enumerate_compositions(
      L, static_cast<int>(channels.size()),
      [&](const std::vector<int>& counts) {
        Partition part{counts};
        if (constraint && !constraint(part)) return;
        double lmult = log_factorial(L);
        for (int n : counts) lmult -= log_factorial(n);
        double lp;
        try {
          lp = lmult + log_history_weight(init, channels, part);
        } catch (const AnnihilatedDistribution&) {
          return;
        }
        if (lp > best) {
          best = lp;
          std::erase_if(near_best, [&](const auto& e) { return e.second < best - 2.0 * rel_tol; });
        }
        if (lp >= best - 2.0 * rel_tol) near_best.emplace_back(std::move(part), lp);
      },
      budget);
  std::vector<Partition> out;
  for (auto& [part, lp] : near_best) {
    // exact relative comparison on probabilities: |p/p_max - 1| <= rel_tol
    if (std::abs(std::expm1(lp - best)) <= rel_tol) out.push_back(std::move(part));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace phaselab
