#include <CLI11.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "phaselab/phaselab.hpp"

namespace fs = std::filesystem;
using namespace phaselab;
using cli::ExperimentConfig;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Probability columns for CSV rows: linear value and log10.  Values below
/// 1e-300 keep only the log10 column (linear column pinned to 0).
std::string prob_columns(double log_p) {
  const double p = std::exp(log_p);
  const double l10 = log_p / std::log(10.0);
  if (p < 1e-300) return "0," + fmt(l10);
  return fmt(p) + "," + fmt(l10);
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);  // binary: '\n' endings everywhere
  if (!out) throw Error("cannot open output file: " + (dir / name).string());
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& config_seed) {
  if (flag) return *flag;
  if (config_seed) return *config_seed;
  if (const char* env = std::getenv("PHASELAB_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    throw ConfigError("PHASELAB_SEED: not a valid integer");
  }
  return 0;
}

/// Runs fn(i) for i in [0, n) across `jobs` threads and returns the results
/// in index order, so file output stays byte-identical for any job count.
template <typename F>
auto ordered_parallel(int n, int jobs, F&& fn) {
  using R = std::invoke_result_t<F, int>;
  std::vector<R> results(static_cast<std::size_t>(n));
  jobs = std::max(1, jobs);
  std::exception_ptr first_error;
  std::mutex mu;
  auto worker = [&](int begin, int end) {
    try {
      for (int i = begin; i < end; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!first_error) first_error = std::current_exception();
    }
  };
  if (jobs == 1) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      const int b = j * chunk, e = std::min(n, b + chunk);
      if (b >= e) break;
      pool.emplace_back(worker, b, e);
    }
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

json partition_to_json(const std::vector<int>& counts) { return json(counts); }

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int cmd_stats(const ExperimentConfig& cfg, const fs::path& out_dir, std::uint64_t seed) {
  (void)seed;
  if (!cfg.L) throw ConfigError("stats: config requires 'L'");
  const int L = *cfg.L;

  if (cfg.experiment == ExperimentConfig::Experiment::chain) {
    const ChainConfig& chain = cfg.chain;
    const int B = chain.bonds();
    auto csv = open_output(out_dir, "partitions.csv");
    for (int s = 1; s <= B; ++s) csv << "n" << s << ",m" << s << (s < B ? "," : "");
    csv << ",prob,log10_prob\n";
    enumerate_compositions(L, 2 * B, [&](const std::vector<int>& cells) {
      std::vector<BondCounts> counts(static_cast<std::size_t>(B));
      for (int s = 0; s < B; ++s)
        counts[static_cast<std::size_t>(s)] = {cells[static_cast<std::size_t>(2 * s)],
                                               cells[static_cast<std::size_t>(2 * s + 1)]};
      for (int v : cells) csv << v << ",";
      csv << prob_columns(log_chain_partition_probability(chain, counts)) << "\n";
    });

    const auto comax = most_probable_chain_partitions(chain, L);
    json report;
    report["experiment"] = "chain";
    report["L"] = L;
    report["partitions"] = json::array();
    for (const auto& part : comax) {
      json rows = json::array();
      for (const auto& b : part) rows.push_back({b.n, b.m});
      report["partitions"].push_back(rows);
    }
    if (!comax.empty()) {
      report["log10_prob"] = std::log10(chain_partition_probability(chain, comax.front()));
      report["prob"] = chain_partition_probability(chain, comax.front());
    }
    auto jf = open_output(out_dir, "comax.json");
    jf << report.dump(2) << "\n";
    return 0;
  }

  const DetectorSetup setup = cfg.setup();
  if (setup.time_dependent())
    throw ConfigError("stats: partition tables need a static setup (two_bs, pulsed or chain)");
  const std::vector<DetectorChannel> channels = setup.channels_at(0.0);
  const std::vector<std::string> ids = setup.channel_ids();
  const PhaseDistribution init(cfg.initial_base);

  std::function<bool(const Partition&)> constraint;
  if (cfg.balanced_constraint) {
    if (channels.size() != 4 || L % 2 != 0)
      throw ConfigError("stats: balanced constraint needs four channels and even L");
    constraint = [L](const Partition& p) {
      return p.counts[0] + p.counts[1] == L / 2 && p.counts[2] + p.counts[3] == L / 2;
    };
  }

  auto csv = open_output(out_dir, "partitions.csv");
  for (std::size_t i = 0; i < ids.size(); ++i) csv << "n" << ids[i] << (i + 1 < ids.size() ? "," : "");
  csv << ",prob,log10_prob\n";
  enumerate_compositions(L, static_cast<int>(channels.size()), [&](const std::vector<int>& counts) {
    Partition part{counts};
    if (constraint && !constraint(part)) return;
    for (int v : counts) csv << v << ",";
    csv << prob_columns(log_partition_probability(init, channels, part)) << "\n";
  });

  const auto comax = most_probable_partitions(init, channels, L, constraint);
  json report;
  report["experiment"] = cfg.experiment == ExperimentConfig::Experiment::two_bs ? "two_bs" : "pulsed";
  report["L"] = L;
  report["constrained"] = cfg.balanced_constraint;
  report["partitions"] = json::array();
  for (const auto& p : comax) report["partitions"].push_back(partition_to_json(p.counts));
  if (!comax.empty()) {
    const double lp = log_partition_probability(init, channels, comax.front());
    report["prob"] = std::exp(lp);
    report["log10_prob"] = lp / std::log(10.0);
  }
  auto jf = open_output(out_dir, "comax.json");
  jf << report.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// trajectory
// ---------------------------------------------------------------------------

struct TrajectoryFileRows {
  std::string events;
  std::string marginals;
  std::string peaks;
  std::vector<int> counts;
  int L = 0;
};

int cmd_trajectory(const ExperimentConfig& cfg, const fs::path& out_dir, std::uint64_t seed, int jobs,
                   int grid, const std::string& prefix = "") {
  TrajectoryConfig tc;
  tc.source = cfg.source;
  tc.setup = cfg.setup();
  tc.initial_base = cfg.initial_base;
  tc.policy = cfg.policy;
  tc.time_model = cfg.time_model;
  tc.seed = seed;
  if (cfg.time_model == TimeModel::fixed_count_uniform) {
    if (!cfg.L) throw ConfigError("trajectory: fixed_count_uniform requires 'L'");
    tc.fixed_count = *cfg.L;
  }
  const int n = cfg.trajectories;
  const std::vector<std::string> ids = tc.setup.channel_ids();
  const bool chain = tc.setup.is_chain();

  auto rows = ordered_parallel(n, jobs, [&](int i) {
    const TrajectoryResult r = run_trajectory_indexed(tc, static_cast<std::uint64_t>(i));
    TrajectoryFileRows out;
    out.counts = r.partition.counts;
    out.L = r.partition.total();
    for (const auto& ev : r.events)
      out.events += std::to_string(i) + "," + fmt(ev.t) + "," + ids[static_cast<std::size_t>(ev.channel)] + "\n";
    const double dphi = kTwoPi / grid;
    if (chain) {
      for (int b = 0; b < tc.setup.chain_config.bonds(); ++b) {
        const auto m = chain_bond_marginal(tc.setup.chain_config, r.bond_counts, b, grid);
        for (int j = 0; j < grid; ++j)
          out.marginals += std::to_string(i) + "," + std::to_string(b + 1) + "," + fmt(j * dphi) + "," +
                           fmt(m[static_cast<std::size_t>(j)]) + "\n";
      }
    } else {
      const auto m = r.final_dist->phase_marginal(grid);
      for (int j = 0; j < grid; ++j)
        out.marginals += std::to_string(i) + "," + fmt(j * dphi) + "," + fmt(m[static_cast<std::size_t>(j)]) + "\n";
      const PeakSet peaks = peak_locations(*r.final_dist, std::max(grid, 512));
      for (const auto& p : peaks.peaks)
        out.peaks += std::to_string(i) + "," + fmt(p.phi) + "," + fmt(p.height) + "\n";
    }
    return out;
  });

  auto events_csv = open_output(out_dir, prefix + "events.csv");
  events_csv << "traj_id,t,channel\n";
  for (const auto& r : rows) events_csv << r.events;

  auto marg_csv = open_output(out_dir, prefix + "marginals.csv");
  marg_csv << (chain ? "traj_id,bond,phi,density\n" : "traj_id,phi,density\n");
  for (const auto& r : rows) marg_csv << r.marginals;

  if (!chain) {
    auto peaks_csv = open_output(out_dir, prefix + "peaks.csv");
    peaks_csv << "traj_id,peak_phi,peak_height\n";
    for (const auto& r : rows) peaks_csv << r.peaks;
  }

  // ensemble summary
  std::map<std::vector<int>, int> partition_counts;
  std::map<int, int> count_hist;
  for (const auto& r : rows) {
    partition_counts[r.counts] += 1;
    count_hist[r.L] += 1;
  }
  json summary;
  summary["n_trajectories"] = n;
  summary["seed"] = seed;
  summary["policy"] = cfg.policy == Policy::sample ? "sample" : "most_probable";
  summary["time_model"] = cfg.time_model == TimeModel::autonomous ? "autonomous" : "fixed_count_uniform";
  summary["mean_count"] = tc.mean_count();
  summary["channels"] = ids;
  summary["count_histogram"] = json::object();
  for (const auto& [L, c] : count_hist) summary["count_histogram"][std::to_string(L)] = c;
  summary["partitions"] = json::array();
  for (const auto& [counts, c] : partition_counts) {
    json row;
    row["counts"] = counts;
    row["frequency"] = c;
    summary["partitions"].push_back(row);
  }
  auto jf = open_output(out_dir, prefix + "ensemble.json");
  jf << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

int cmd_oracle(const std::optional<ExperimentConfig>& cfg, const fs::path& out_dir, std::uint64_t seed,
               bool quick) {
  json checks = json::array();
  bool all_pass = true;
  auto record = [&](const std::string& name, double dev, double tol) {
    const bool pass = dev < tol;
    all_pass = all_pass && pass;
    checks.push_back({{"name", name}, {"max_deviation", dev}, {"tolerance", tol}, {"pass", pass}});
  };

  RandomStream rng(seed ^ 0xF0CCACC1Au);
  const int n_max_scs = quick ? 30 : 60;
  const int n_angles = quick ? 100 : 1000;

  double dev_norm = 0.0, dev_occ = 0.0;
  for (int i = 0; i < n_angles; ++i) {
    const int N = 1 + static_cast<int>(rng.uniform() * n_max_scs);
    const double th = rng.uniform() * kPi;
    const double ph = rng.uniform() * kTwoPi;
    const TwoModeFockVector v = scs_amplitudes(N, th, ph);
    dev_norm = std::max(dev_norm, std::abs(v.amplitudes.squaredNorm() - 1.0));
    double occ = 0.0;
    for (int k = 0; k <= N; ++k) occ += k * std::norm(v.amplitudes(k));
    dev_occ = std::max(dev_occ, std::abs(occ - N * std::cos(0.5 * th) * std::cos(0.5 * th)));
  }
  record("scs_norm", dev_norm, 1e-12);
  record("scs_mean_occupation", dev_occ, 1e-10);

  // ladder action: a on SCS equals sqrt(N) cos(theta/2) times the lower SCS
  double dev_ladder = 0.0;
  for (int N = 1; N <= (quick ? 10 : 20); ++N) {
    const double th = 0.3 + 0.1 * N, ph = 0.7;
    const TwoModeFockVector v = scs_amplitudes(N, th, ph);
    const TwoModeFockVector lower = scs_amplitudes(N - 1, th, ph);
    const TwoModeFockVector va = apply_annihilation(v, Mode::a);
    const TwoModeFockVector vb = apply_annihilation(v, Mode::b);
    const double sn = std::sqrt(static_cast<double>(N));
    dev_ladder = std::max(dev_ladder,
                          (va.amplitudes - sn * std::cos(0.5 * th) * lower.amplitudes).cwiseAbs().maxCoeff());
    const std::complex<double> sb = std::polar(sn * std::sin(0.5 * th), ph);
    dev_ladder = std::max(dev_ladder, (vb.amplitudes - sb * lower.amplitudes).cwiseAbs().maxCoeff());
  }
  record("ladder_action", dev_ladder, 1e-12);

  // rotation consistency: (c†)^N |vac> / sqrt(N!) reproduces the SCS
  double dev_rot = 0.0;
  for (int trial = 0; trial < (quick ? 5 : 20); ++trial) {
    const int N = 1 + static_cast<int>(rng.uniform() * 30);
    const double th = rng.uniform() * kPi, ph = rng.uniform() * kTwoPi;
    TwoModeFockVector v;
    v.N = 0;
    v.amplitudes = Eigen::VectorXcd::Ones(1);
    for (int k = 0; k < N; ++k) {
      v = apply_mode_creation(v, th, ph);
      v.amplitudes /= std::sqrt(static_cast<double>(k + 1));
    }
    dev_rot = std::max(dev_rot, (v.amplitudes - scs_amplitudes(N, th, ph).amplitudes).cwiseAbs().maxCoeff());
  }
  record("rotation_consistency", dev_rot, 1e-10);

  // detection factor from the truncated basis vs. the Bloch-sphere value (R^2/2)(1 + u.u0)
  const std::vector<double> strengths = quick ? std::vector<double>{0.5} : std::vector<double>{0.5, 1.0, 2.0};
  double dev_factor = 0.0;
  for (double R : strengths) {
    PoissonMixedState st{R, 0.0, 0.0, required_n_max(R)};
    for (int i = 0; i < 100; ++i) {
      st.theta = std::acos(2.0 * rng.uniform() - 1.0);
      st.phi = rng.uniform() * kTwoPi;
      const double t0 = std::acos(2.0 * rng.uniform() - 1.0);
      const double p0 = rng.uniform() * kTwoPi;
      const UnitVector3 u0 = direction_to_vector(SphericalDirection(t0, p0));
      const UnitVector3 u = direction_to_vector(SphericalDirection(st.theta, st.phi));
      const double got = detection_factor_oracle(st, u0);
      const double want = 0.5 * R * R * (1.0 + u.dot(u0));
      dev_factor = std::max(dev_factor, std::abs(got - want));
    }
  }
  record("detection_factor", dev_factor, 1e-8);

  // full history densities against the factorized weight
  const SourceParams src = cfg ? cfg->source : SourceParams{quick ? 0.5 : 1.0, 1.0, 2.0};
  const auto bs = beam_splitter_channels(0.5 * kPi);
  const std::vector<DetectorChannel> channels(bs.begin(), bs.end());
  const PhaseDistribution ring(BaseMeasure::ring(0.5 * kPi));
  double dev_hist = 0.0;
  const int max_L = quick ? 3 : 6;
  for (int L = 0; L <= max_L; ++L) {
    std::vector<std::pair<double, int>> events;
    Partition part{std::vector<int>(4, 0)};
    for (int i = 0; i < L; ++i) {
      const double t = src.T * (i + 0.5) / (L + 1);
      const int ch = (i * 2 + L) % 4;
      events.emplace_back(t, ch);
      part.counts[static_cast<std::size_t>(ch)] += 1;
    }
    const double got = history_prob_oracle(src, channels, events, BaseMeasure::ring(0.5 * kPi));
    double lw = log_history_weight(ring, channels, part) - src.mean_count();
    for (const auto& [t, ch] : events) lw += std::log(src.Gamma * src.R * src.R) - src.Gamma * t;
    const double want = std::exp(lw);
    dev_hist = std::max(dev_hist, std::abs(got / want - 1.0));
  }
  record("history_density", dev_hist, 1e-7);

  // the truncation guard must refuse an undersized basis
  bool refused = false;
  try {
    detection_factor_oracle(PoissonMixedState{2.0, 0.5, 0.5, 3}, UnitVector3{0, 0, 1});
  } catch (const TruncationError&) {
    refused = true;
  }
  checks.push_back({{"name", "truncation_guard"}, {"max_deviation", refused ? 0.0 : 1.0}, {"tolerance", 0.5}, {"pass", refused}});
  all_pass = all_pass && refused;

  json report;
  report["pass"] = all_pass;
  report["quick"] = quick;
  report["seed"] = seed;
  report["checks"] = checks;
  auto jf = open_output(out_dir, "oracle_report.json");
  jf << report.dump(2) << "\n";
  std::cout << (all_pass ? "oracle: all checks passed\n" : "oracle: FAILURES, see oracle_report.json\n");
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// figure
// ---------------------------------------------------------------------------

int cmd_figure(const std::string& which, const fs::path& out_dir, std::uint64_t seed, int jobs, int grid) {
  if (which == "fig2") {
    const int L = 40, half = L / 2;
    const auto bs = beam_splitter_channels(0.5 * kPi);
    const std::vector<DetectorChannel> channels(bs.begin(), bs.end());
    const PhaseDistribution ring(BaseMeasure::ring(0.5 * kPi));
    auto csv = open_output(out_dir, "fig2.csv");
    csv << "n1,n3,prob\n";
    for (int n1 = 0; n1 <= half; ++n1)
      for (int n3 = 0; n3 <= half; ++n3) {
        const Partition p{{n1, half - n1, n3, half - n3}};
        csv << n1 << "," << n3 << "," << fmt(partition_probability(ring, channels, p)) << "\n";
      }
    const auto comax = most_probable_partitions(ring, channels, L, [half](const Partition& p) {
      return p.counts[0] + p.counts[1] == half && p.counts[2] + p.counts[3] == half;
    });
    json report;
    report["partitions"] = json::array();
    for (const auto& p : comax) report["partitions"].push_back(partition_to_json(p.counts));
    auto jf = open_output(out_dir, "fig2_comax.json");
    jf << report.dump(2) << "\n";
    return 0;
  }
  if (which == "fig4" || which == "fig5") {
    ExperimentConfig cfg;
    cfg.experiment = which == "fig4" ? ExperimentConfig::Experiment::continuous
                                     : ExperimentConfig::Experiment::energy_shift;
    cfg.coupling.delta = 1.0;
    cfg.coupling.epsilon = which == "fig4" ? 0.0 : 0.25;
    cfg.source = SourceParams{1.0, 1.0, kTwoPi / cfg.coupling.delta};
    cfg.initial_base = BaseMeasure::ring(0.5 * kPi);
    cfg.L = 10;
    cfg.time_model = TimeModel::fixed_count_uniform;
    cfg.policy = Policy::most_probable;
    cfg.trajectories = 10;
    return cmd_trajectory(cfg, out_dir, seed, jobs, grid, which + "_");
  }
  throw ConfigError("figure: expected fig2, fig4 or fig5");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phaselab: detection statistics and conditional phase dynamics of decaying bosonic modes"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_flag;
  int jobs = 1;
  std::optional<int> grid_flag;
  std::optional<double> tol_flag;
  bool quick = false;
  std::string figure_name;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
    if (needs_config) opt->required();
    sub->add_option("--out", out_dir, "output directory (default: current)");
    sub->add_option("--seed", seed_flag, "RNG seed (overrides config and PHASELAB_SEED)");
    sub->add_option("--jobs", jobs, "worker threads for ensembles")->check(CLI::PositiveNumber);
    sub->add_option("--grid", grid_flag, "phase-grid size for marginals")->check(CLI::Range(8, 1 << 20));
    sub->add_option("--tol", tol_flag, "tolerance override");
  };

  CLI::App* stats = app.add_subcommand("stats", "partition probability tables and co-maximal sets");
  add_common(stats, true);
  CLI::App* traj = app.add_subcommand("trajectory", "quantum-jump trajectory ensembles");
  add_common(traj, true);
  CLI::App* oracle = app.add_subcommand("oracle", "first-principles Fock-basis verification");
  add_common(oracle, false);
  oracle->add_flag("--quick", quick, "reduced-size check set");
  CLI::App* figure = app.add_subcommand("figure", "canned configurations for the reference figures");
  figure->add_option("name", figure_name, "fig2 | fig4 | fig5")->required();
  add_common(figure, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; any parse error is a config error
  }

  try {
    std::optional<ExperimentConfig> cfg;
    if (!config_path.empty()) cfg = cli::load_config(config_path);
    if (cfg) {
      if (grid_flag) cfg->grid = *grid_flag;
      if (tol_flag) cfg->tolerance = *tol_flag;
    }
    const std::uint64_t seed = resolve_seed(seed_flag, cfg ? cfg->seed : std::nullopt);
    const int grid = grid_flag ? *grid_flag : (cfg ? cfg->grid : 512);

    if (stats->parsed()) return cmd_stats(*cfg, out_dir, seed);
    if (traj->parsed()) return cmd_trajectory(*cfg, out_dir, seed, jobs, grid);
    if (oracle->parsed()) return cmd_oracle(cfg, out_dir, seed, quick);
    if (figure->parsed()) return cmd_figure(figure_name, out_dir, seed, jobs, grid);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
