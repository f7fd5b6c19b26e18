#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "phaselab/errors.hpp"
#include "phaselab/geometry.hpp"
#include "phaselab/special.hpp"

namespace phaselab {

/// Chain of K single-mode sources, neighbouring modes mixed pairwise on
/// balanced beam splitters.  Bond s carries a phase offset xi_s; a linear
/// chain has K-1 bonds, a circular one K (the last bond closes the ring and
/// constrains the bond phases to sum to zero).
struct ChainConfig {
  enum class Topology { linear, circular };

  int K = 2;
  Topology topology = Topology::linear;
  std::vector<double> xi;

  int bonds() const { return topology == Topology::linear ? K - 1 : K; }

  void validate() const {
    if (K < 2) throw ConfigError("chain: need at least two modes");
    if (static_cast<int>(xi.size()) != bonds())
      throw ConfigError("chain: xi must have one entry per bond");
  }
};

/// Detections on one bond: n in the '+' output, m in the '-' output.
struct BondCounts {
  int n = 0;
  int m = 0;

  bool operator==(const BondCounts&) const = default;
  auto operator<=>(const BondCounts&) const = default;
};

/// Fourier coefficients of cos^{2n}(x/2) sin^{2m}(x/2): returns h(k) for
/// k = 0..n+m (the function is real and even in k).  Computed by exact
/// integer convolution -- the polynomial 4^{n+m} cos^{2n}(x/2) sin^{2m}(x/2)
/// has integer coefficients in e^{ix} -- so every table entry is correct to
/// one rounding.
inline const std::vector<double>& half_angle_coeffs(int n, int m) {
  if (n < 0 || m < 0) throw std::invalid_argument("half_angle_coeffs: negative exponent");
  if (n + m > 60) throw std::invalid_argument("half_angle_coeffs: order > 60 would overflow the exact table");
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({n, m});
  if (it != cache.end()) return it->second;

  const int S = n + m;
  // coefficients of (2 + z + 1/z)^n (2 - z - 1/z)^m, c[j + S] holds z^j
  std::vector<__int128> c(static_cast<std::size_t>(2 * S + 1), 0);
  c[static_cast<std::size_t>(S)] = 1;
  std::vector<__int128> next(c.size(), 0);
  for (int step = 0; step < S; ++step) {
    const __int128 sign = step < n ? 1 : -1;
    for (std::size_t j = 0; j < c.size(); ++j) {
      __int128 v = 2 * c[j];
      if (j > 0) v += sign * c[j - 1];
      if (j + 1 < c.size()) v += sign * c[j + 1];
      next[j] = v;
    }
    std::swap(c, next);
  }
  std::vector<double> h(static_cast<std::size_t>(S + 1), 0.0);
  for (int k = 0; k <= S; ++k)
    h[static_cast<std::size_t>(k)] =
        std::ldexp(static_cast<double>(static_cast<long double>(c[static_cast<std::size_t>(k + S)])), -2 * S);
  return cache.emplace(std::make_pair(n, m), std::move(h)).first->second;
}

/// Partition factor F({n_s, m_s}) for a chain fed by independent phase-
/// symmetric sources: each bond contributes cos^{2n}((Phi-xi)/2) sin^{2m}
/// factors of the bond phase.  Linear bonds are independent, so F is the
/// product of per-bond means; the circular constraint sum(Phi_s) = 0 turns F
/// into a Fourier sum over the matched harmonic index.
inline double chain_history_weight(const ChainConfig& cfg, std::span<const BondCounts> counts) {
  cfg.validate();
  if (static_cast<int>(counts.size()) != cfg.bonds())
    throw std::invalid_argument("chain_history_weight: one count pair per bond required");
  for (const auto& b : counts)
    if (b.n < 0 || b.m < 0) throw std::invalid_argument("chain_history_weight: negative count");

  if (cfg.topology == ChainConfig::Topology::linear) {
    long double logf = 0.0L;
    for (const auto& b : counts) logf += std::log(static_cast<long double>(half_angle_coeffs(b.n, b.m)[0]));
    return static_cast<double>(std::exp(logf));
  }

  int kmax = counts[0].n + counts[0].m;
  double Xi = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    kmax = std::min(kmax, counts[s].n + counts[s].m);
    Xi += cfg.xi[s];
  }
  long double F = 0.0L;
  for (int k = 0; k <= kmax; ++k) {
    long double prod = k == 0 ? 1.0L : 2.0L * std::cos(k * Xi);
    for (const auto& b : counts) prod *= half_angle_coeffs(b.n, b.m)[static_cast<std::size_t>(k)];
    F += prod;
  }
  return static_cast<double>(F);
}

/// log probability of the per-bond partition given L total detections:
/// multinomial over the 2 * bonds channels, each detection choosing its bond
/// uniformly, times the partition factor.  -infinity when impossible.
inline double log_chain_partition_probability(const ChainConfig& cfg, std::span<const BondCounts> counts) {
  const double F = chain_history_weight(cfg, counts);
  if (!(F > 0.0)) return -std::numeric_limits<double>::infinity();
  int L = 0;
  double lmult = 0.0;
  for (const auto& b : counts) {
    L += b.n + b.m;
    lmult -= log_factorial(b.n) + log_factorial(b.m);
  }
  lmult += log_factorial(L);
  return lmult + std::log(F) - L * std::log(static_cast<double>(cfg.bonds()));
}

inline double chain_partition_probability(const ChainConfig& cfg, std::span<const BondCounts> counts) {
  return std::exp(log_chain_partition_probability(cfg, counts));
}

/// Partitions of L detections over the chain channels whose probability is
/// within relative tolerance 1e-9 of the maximum, lexicographically sorted
/// (bond by bond, n before m).
inline std::vector<std::vector<BondCounts>> most_probable_chain_partitions(const ChainConfig& cfg, int L,
                                                                           double budget = 1e7) {
  cfg.validate();
  if (L < 0) throw std::invalid_argument("most_probable_chain_partitions: negative L");
  const int B = cfg.bonds();
  const int cells = 2 * B;
  {
    double combos = 1.0;
    for (int i = 1; i < cells; ++i) combos *= static_cast<double>(L + i) / i;
    if (combos > budget)
      throw EnumerationBudgetExceeded("most_probable_chain_partitions: composition count exceeds budget");
  }
  // warm the coefficient cache once so the scan below is pure table lookups
  std::vector<std::vector<const std::vector<double>*>> table(static_cast<std::size_t>(L + 1));
  for (int n = 0; n <= L; ++n) {
    table[static_cast<std::size_t>(n)].resize(static_cast<std::size_t>(L - n + 1));
    for (int m = 0; m + n <= L; ++m) table[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] = &half_angle_coeffs(n, m);
  }
  double Xi = 0.0;
  for (double x : cfg.xi) Xi += x;
  const bool circular = cfg.topology == ChainConfig::Topology::circular;

  const double rel_tol = 1e-9;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::vector<BondCounts>, double>> near_best;
  std::vector<BondCounts> counts(static_cast<std::size_t>(B));

  // recursive scan over compositions of L into the 2B cells
  auto evaluate = [&]() {
    double lmult = log_factorial(L);
    int kmax = L;
    for (const auto& b : counts) {
      lmult -= log_factorial(b.n) + log_factorial(b.m);
      kmax = std::min(kmax, b.n + b.m);
    }
    long double F;
    if (circular) {
      F = 0.0L;
      for (int k = 0; k <= kmax; ++k) {
        long double prod = k == 0 ? 1.0L : 2.0L * std::cos(k * Xi);
        for (const auto& b : counts)
          prod *= (*table[static_cast<std::size_t>(b.n)][static_cast<std::size_t>(b.m)])[static_cast<std::size_t>(k)];
        F += prod;
      }
    } else {
      F = 1.0L;
      for (const auto& b : counts)
        F *= (*table[static_cast<std::size_t>(b.n)][static_cast<std::size_t>(b.m)])[0];
    }
    if (!(F > 0.0L)) return;
    const double lp = lmult + static_cast<double>(std::log(F));
    if (lp > best) {
      best = lp;
      std::erase_if(near_best, [&](const auto& e) { return e.second < best - 2.0 * rel_tol; });
    }
    if (lp >= best - 2.0 * rel_tol) near_best.emplace_back(counts, lp);
  };
  auto scan = [&](auto&& self, int cell, int remaining) -> void {
    if (cell + 1 == cells) {
      counts[static_cast<std::size_t>(cell / 2)].m = remaining;
      evaluate();
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      if (cell % 2 == 0)
        counts[static_cast<std::size_t>(cell / 2)].n = v;
      else
        counts[static_cast<std::size_t>(cell / 2)].m = v;
      self(self, cell + 1, remaining - v);
    }
  };
  scan(scan, 0, L);

  std::vector<std::vector<BondCounts>> out;
  for (auto& [part, lp] : near_best)
    if (std::abs(std::expm1(lp - best)) <= rel_tol) out.push_back(std::move(part));
  std::sort(out.begin(), out.end());
  return out;
}

/// Normalized marginal of one bond phase on a uniform grid, given the
/// recorded per-bond counts.  For a circular chain the other bonds feed back
/// through the ring constraint; their influence enters through the circular
/// convolution of their detection factors.
inline std::vector<double> chain_bond_marginal(const ChainConfig& cfg, std::span<const BondCounts> counts,
                                               int bond, int grid) {
  cfg.validate();
  if (grid < 8) throw std::invalid_argument("chain_bond_marginal: grid must be >= 8");
  if (bond < 0 || bond >= cfg.bonds()) throw std::invalid_argument("chain_bond_marginal: bond out of range");
  if (static_cast<int>(counts.size()) != cfg.bonds())
    throw std::invalid_argument("chain_bond_marginal: one count pair per bond required");
  const auto& bc = counts[static_cast<std::size_t>(bond)];
  const double xi_b = cfg.xi[static_cast<std::size_t>(bond)];
  std::vector<double> m(static_cast<std::size_t>(grid), 0.0);
  const double dphi = kTwoPi / grid;

  auto own_factor = [&](double phi) {
    const double c2 = 0.5 * (1.0 + std::cos(phi - xi_b));
    const double s2 = 0.5 * (1.0 - std::cos(phi - xi_b));
    return std::pow(c2, bc.n) * std::pow(s2, bc.m);
  };

  if (cfg.topology == ChainConfig::Topology::linear) {
    for (int j = 0; j < grid; ++j) m[static_cast<std::size_t>(j)] = own_factor(j * dphi);
  } else {
    // rest(y): density of the sum of the other bond phases, via Fourier series
    int kmax = std::numeric_limits<int>::max();
    for (int s = 0; s < cfg.bonds(); ++s)
      if (s != bond) kmax = std::min(kmax, counts[static_cast<std::size_t>(s)].n + counts[static_cast<std::size_t>(s)].m);
    std::vector<std::complex<double>> rest_coeff(static_cast<std::size_t>(kmax + 1));
    for (int k = 0; k <= kmax; ++k) {
      std::complex<double> prod(1.0, 0.0);
      for (int s = 0; s < cfg.bonds(); ++s) {
        if (s == bond) continue;
        const auto& hs = half_angle_coeffs(counts[static_cast<std::size_t>(s)].n, counts[static_cast<std::size_t>(s)].m);
        prod *= hs[static_cast<std::size_t>(k)] * std::polar(1.0, -k * cfg.xi[static_cast<std::size_t>(s)]);
      }
      rest_coeff[static_cast<std::size_t>(k)] = prod;
    }
    auto rest = [&](double y) {
      double acc = rest_coeff[0].real();
      for (int k = 1; k <= kmax; ++k)
        acc += 2.0 * (rest_coeff[static_cast<std::size_t>(k)] * std::polar(1.0, k * y)).real();
      return acc;
    };
    for (int j = 0; j < grid; ++j) {
      const double phi = j * dphi;
      m[static_cast<std::size_t>(j)] = std::max(own_factor(phi) * rest(-phi), 0.0);
    }
  }
  double sum = 0.0;
  for (double v : m) sum += v * dphi;
  if (!(sum > 0.0)) throw AnnihilatedDistribution();
  for (double& v : m) v /= sum;
  return m;
}

}  // namespace phaselab
