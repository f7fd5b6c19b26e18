#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "phaselab/chain.hpp"
#include "phaselab/detstat.hpp"
#include "phaselab/distribution.hpp"
#include "phaselab/errors.hpp"
#include "phaselab/geometry.hpp"
#include "phaselab/rng.hpp"

namespace phaselab {

/// Detection network in front of the decaying modes.
struct DetectorSetup {
  enum class Kind { two_beam_splitter, pulsed_direct, continuous_coupled, chain };

  Kind kind = Kind::two_beam_splitter;
  double xi = 0.0;          // two_beam_splitter: second splitter's phase
  double pulse_area = 0.0;  // pulsed_direct: delta * tau of the coupling pulse
  CouplingSpec coupling;    // continuous_coupled
  ChainConfig chain_config; // chain

  static DetectorSetup two_beam_splitter(double xi) {
    DetectorSetup s;
    s.kind = Kind::two_beam_splitter;
    s.xi = xi;
    return s;
  }
  static DetectorSetup pulsed_direct(double pulse_area) {
    DetectorSetup s;
    s.kind = Kind::pulsed_direct;
    s.pulse_area = pulse_area;
    return s;
  }
  static DetectorSetup continuous_coupled(const CouplingSpec& c) {
    DetectorSetup s;
    s.kind = Kind::continuous_coupled;
    s.coupling = c;
    return s;
  }
  static DetectorSetup chain(const ChainConfig& cfg) {
    cfg.validate();
    DetectorSetup s;
    s.kind = Kind::chain;
    s.chain_config = cfg;
    return s;
  }

  bool is_chain() const { return kind == Kind::chain; }
  bool time_dependent() const { return kind == Kind::continuous_coupled; }

  int channel_count() const {
    switch (kind) {
      case Kind::two_beam_splitter: return 4;
      case Kind::pulsed_direct:
      case Kind::continuous_coupled: return 2;
      case Kind::chain: return 2 * chain_config.bonds();
    }
    return 0;
  }

  std::vector<std::string> channel_ids() const {
    switch (kind) {
      case Kind::two_beam_splitter: return {"1", "2", "3", "4"};
      case Kind::pulsed_direct:
      case Kind::continuous_coupled: return {"a", "b"};
      case Kind::chain: {
        std::vector<std::string> ids;
        for (int s = 1; s <= chain_config.bonds(); ++s) {
          ids.push_back(std::to_string(s) + "+");
          ids.push_back(std::to_string(s) + "-");
        }
        return ids;
      }
    }
    return {};
  }

  /// Channel directions and rate shares at time t.  Static setups ignore t;
  /// chain setups have no common Bloch sphere and are handled separately.
  std::vector<DetectorChannel> channels_at(double t) const {
    switch (kind) {
      case Kind::two_beam_splitter: {
        auto a = beam_splitter_channels(xi);
        return {a.begin(), a.end()};
      }
      case Kind::pulsed_direct: {
        auto a = pulsed_counterrotated_channels(pulse_area);
        return {a.begin(), a.end()};
      }
      case Kind::continuous_coupled: {
        auto a = coupled_channels(coupling, t);
        return {a.begin(), a.end()};
      }
      case Kind::chain:
        throw ConfigError("channels_at: chain setups have per-bond channels");
    }
    throw ConfigError("channels_at: unknown setup kind");
  }
};

/// How detection times are generated.
///  - autonomous: the physical law -- the count is Poissonian with mean
///    R^2 (1 - e^{-Gamma T}) and each time has density prop. to e^{-Gamma t};
///  - fixed_count_uniform: exactly `fixed_count` detections at independent
///    uniform times in [0, T] (the protocol behind the coupled-mode figures).
enum class TimeModel { autonomous, fixed_count_uniform };

enum class Policy { sample, most_probable };

struct TrajectoryConfig {
  SourceParams source;
  DetectorSetup setup;
  BaseMeasure initial_base = BaseMeasure::ring(0.5 * kPi);
  Policy policy = Policy::sample;
  TimeModel time_model = TimeModel::autonomous;
  int fixed_count = 0;
  std::uint64_t seed = 0;

  /// Mean detection count of the autonomous model (chains emit on every bond).
  double mean_count() const {
    const double per = source.mean_count();
    return setup.is_chain() ? per * setup.chain_config.bonds() : per;
  }
};

struct DetectionEvent {
  double t = 0.0;
  int channel = 0;  // index into setup.channel_ids()
};

struct TrajectoryResult {
  std::vector<DetectionEvent> events;
  Partition partition;                  // counts per channel id
  std::vector<BondCounts> bond_counts;  // chain setups only
  std::optional<PhaseDistribution> final_dist;  // non-chain setups only
  double log_branching = 0.0;  // log prob of the realized channel sequence given the times
};

/// Sorted detection times for one trajectory.
inline std::vector<double> sample_detection_times(const TrajectoryConfig& cfg, RandomStream& rng) {
  std::vector<double> times;
  if (cfg.time_model == TimeModel::fixed_count_uniform) {
    times.reserve(static_cast<std::size_t>(cfg.fixed_count));
    for (int i = 0; i < cfg.fixed_count; ++i) times.push_back(rng.uniform(0.0, cfg.source.T));
  } else {
    const int L = rng.poisson(cfg.mean_count());
    times.reserve(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) times.push_back(rng.truncated_exponential(cfg.source.Gamma, cfg.source.T));
  }
  std::sort(times.begin(), times.end());
  return times;
}

namespace detail {

inline int choose_channel(const std::vector<double>& p, Policy policy, RandomStream& rng) {
  if (policy == Policy::most_probable) {
    // argmax; ties resolved to the lowest channel index
    int best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
  }
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace detail

/// One quantum-jump trajectory: sample the detection times, then walk the
/// conditional distribution through the branching probabilities one
/// detection at a time.
inline TrajectoryResult run_trajectory(const TrajectoryConfig& cfg, RandomStream& rng) {
  TrajectoryResult res;
  const std::vector<double> times = sample_detection_times(cfg, rng);
  res.partition.counts.assign(static_cast<std::size_t>(cfg.setup.channel_count()), 0);

  if (cfg.setup.is_chain()) {
    const ChainConfig& chain = cfg.setup.chain_config;
    const int B = chain.bonds();
    std::vector<BondCounts> counts(static_cast<std::size_t>(B));
    std::vector<double> p(static_cast<std::size_t>(2 * B), 0.0);
    for (double t : times) {
      double total = 0.0;
      for (int c = 0; c < 2 * B; ++c) {
        std::vector<BondCounts> cand(counts);
        auto& bc = cand[static_cast<std::size_t>(c / 2)];
        (c % 2 == 0 ? bc.n : bc.m) += 1;
        p[static_cast<std::size_t>(c)] = chain_history_weight(chain, cand);
        total += p[static_cast<std::size_t>(c)];
      }
      if (!(total > 0.0)) throw AnnihilatedDistribution();
      for (double& v : p) v /= total;
      const int pick = detail::choose_channel(p, cfg.policy, rng);
      auto& bc = counts[static_cast<std::size_t>(pick / 2)];
      (pick % 2 == 0 ? bc.n : bc.m) += 1;
      res.events.push_back({t, pick});
      res.partition.counts[static_cast<std::size_t>(pick)] += 1;
      res.log_branching += std::log(p[static_cast<std::size_t>(pick)]);
    }
    res.bond_counts = std::move(counts);
    return res;
  }

  PhaseDistribution dist(cfg.initial_base);
  for (double t : times) {
    const std::vector<DetectorChannel> chans = cfg.setup.channels_at(t);
    const std::vector<double> p = branching_probabilities(dist, chans);
    const int pick = detail::choose_channel(p, cfg.policy, rng);
    dist = dist.after_detection(chans[static_cast<std::size_t>(pick)]);
    res.events.push_back({t, pick});
    res.partition.counts[static_cast<std::size_t>(pick)] += 1;
    res.log_branching += std::log(p[static_cast<std::size_t>(pick)]);
  }
  res.final_dist = std::move(dist);
  return res;
}

/// Trajectory for ensemble member `index`: runs on its own deterministic
/// stream, so members are independent and any subset can be reproduced.
inline TrajectoryResult run_trajectory_indexed(const TrajectoryConfig& cfg, std::uint64_t index) {
  RandomStream rng = RandomStream::for_index(cfg.seed, index);
  return run_trajectory(cfg, rng);
}

struct TrajectorySummary {
  std::vector<int> counts;
  int L = 0;
  int n_peaks = 0;
  double peak_phi = std::numeric_limits<double>::quiet_NaN();
  double peak_height = std::numeric_limits<double>::quiet_NaN();
};

struct EnsembleOptions {
  int jobs = 1;
  bool collect_peaks = false;
  int peak_grid = 512;
};

struct EnsembleStats {
  int n_traj = 0;
  std::map<std::vector<int>, int> partition_counts;
  std::map<int, int> count_histogram;
  std::vector<TrajectorySummary> trajectories;  // indexed by trajectory id
};

/// Runs n independent trajectories and aggregates their statistics.  The
/// result is identical for any `jobs` value: member i always uses stream i,
/// and the reduction runs in index order.
inline EnsembleStats run_ensemble(const TrajectoryConfig& cfg, int n, const EnsembleOptions& opts = {}) {
  if (n < 0) throw std::invalid_argument("run_ensemble: negative trajectory count");
  EnsembleStats stats;
  stats.n_traj = n;
  stats.trajectories.resize(static_cast<std::size_t>(n));

  const int jobs = std::max(1, opts.jobs);
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&](int begin, int end) {
    try {
      for (int i = begin; i < end; ++i) {
        const TrajectoryResult r = run_trajectory_indexed(cfg, static_cast<std::uint64_t>(i));
        TrajectorySummary& s = stats.trajectories[static_cast<std::size_t>(i)];
        s.counts = r.partition.counts;
        s.L = r.partition.total();
        if (opts.collect_peaks && r.final_dist.has_value()) {
          const PeakSet peaks = peak_locations(*r.final_dist, opts.peak_grid);
          s.n_peaks = static_cast<int>(peaks.peaks.size());
          if (!peaks.peaks.empty()) {
            const auto top = std::max_element(
                peaks.peaks.begin(), peaks.peaks.end(),
                [](const PhasePeak& a, const PhasePeak& b) { return a.height < b.height; });
            s.peak_phi = top->phi;
            s.peak_height = top->height;
          }
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (jobs == 1) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      const int begin = j * chunk;
      const int end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const auto& s : stats.trajectories) {
    stats.partition_counts[s.counts] += 1;
    stats.count_histogram[s.L] += 1;
  }
  return stats;
}

}  // namespace phaselab
