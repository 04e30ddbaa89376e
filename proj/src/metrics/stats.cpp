#include "agentcrowd/metrics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "agentcrowd/error.hpp"

namespace agentcrowd {

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw LengthMismatchError("pearson: lengths differ");
  if (x.size() < 2) throw EmptyError("pearson: needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

// Sum over tie groups of t^3 - t.
double tie_term(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double t = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double c = static_cast<double>(j - i);
    t += c * c * c - c;
    i = j;
  }
  return t;
}

constexpr std::size_t kExactMannWhitney = 12;
constexpr std::size_t kExactKruskal = 10;

}  // namespace

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b, PValueMethod method,
                           bool continuity) {
  if (a.empty() || b.empty()) throw EmptySampleError("mann_whitney_u: both samples must be nonempty");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const std::size_t na = a.size(), nb = b.size(), n = pooled.size();

  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += ranks[i];
  MannWhitney out;
  out.u = ra - static_cast<double>(na * (na + 1)) / 2.0;

  const bool exact = method == PValueMethod::Exact || (method == PValueMethod::Auto && n <= kExactMannWhitney);
  if (exact) {
    // Distribution of the doubled rank sum of `a` over all C(n, na) splits.
    std::vector<int> r2(n);
    int total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total2 += r2[i];
    }
    std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(total2) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = std::min(na, i + 1); k >= 1; --k) {
        for (int s = total2; s >= r2[i]; --s) ways[k][static_cast<std::size_t>(s)] += ways[k - 1][static_cast<std::size_t>(s - r2[i])];
      }
    }
    int observed2 = 0;
    for (std::size_t i = 0; i < na; ++i) observed2 += r2[i];
    // Twice the null mean of the rank sum is na * (n + 1).
    const long long centre2 = static_cast<long long>(na) * static_cast<long long>(n + 1);
    const long long dev = std::llabs(observed2 - centre2);
    double hits = 0.0, all = 0.0;
    for (int s = 0; s <= total2; ++s) {
      const double w = ways[na][static_cast<std::size_t>(s)];
      all += w;
      if (std::llabs(s - centre2) >= dev) hits += w;
    }
    out.p = std::min(1.0, hits / all);
    out.exact = true;
    return out;
  }

  const double mu = static_cast<double>(na * nb) / 2.0;
  const double dn = static_cast<double>(n);
  const double var = static_cast<double>(na * nb) / 12.0 * ((dn + 1.0) - tie_term(pooled) / (dn * (dn - 1.0)));
  if (var <= 0.0) {
    out.p = 1.0;
    return out;
  }
  double diff = std::fabs(out.u - mu);
  if (continuity) diff = std::max(0.0, diff - 0.5);
  const double z = diff / std::sqrt(var);
  out.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

KruskalWallis kruskal_wallis(std::span<const std::vector<double>> groups, PValueMethod method) {
  if (groups.size() < 2) throw EmptyGroupError("kruskal_wallis needs at least two groups");
  std::vector<double> pooled;
  std::vector<std::size_t> sizes;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw EmptyGroupError("kruskal_wallis: group " + std::to_string(g + 1) + " is empty");
    pooled.insert(pooled.end(), groups[g].begin(), groups[g].end());
    sizes.push_back(groups[g].size());
  }
  const auto ranks = midranks(pooled);
  const double n = static_cast<double>(pooled.size());
  const double correction = 1.0 - tie_term(pooled) / (n * n * n - n);

  KruskalWallis out;
  out.df = static_cast<int>(groups.size()) - 1;
  if (correction <= 0.0) {
    out.h = 0.0;
    out.p = 1.0;
    return out;
  }

  auto statistic = [&](std::span<const double> rank_sums) {
    double s = 0.0;
    for (std::size_t g = 0; g < sizes.size(); ++g) s += rank_sums[g] * rank_sums[g] / static_cast<double>(sizes[g]);
    return s;
  };
  auto h_of = [&](double s) { return (12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction; };

  std::vector<double> sums(groups.size(), 0.0);
  {
    std::size_t pos = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t i = 0; i < sizes[g]; ++i) sums[g] += ranks[pos++];
    }
  }
  const double observed = statistic(sums);
  out.h = std::max(0.0, h_of(observed));

  const bool exact = method == PValueMethod::Exact || (method == PValueMethod::Auto && pooled.size() <= kExactKruskal);
  if (exact) {
    // Every distinct assignment of the pooled ranks to groups of the given sizes.
    std::vector<std::size_t> room = sizes;
    std::vector<double> acc(groups.size(), 0.0);
    const double tol = 1e-9 * std::max(1.0, observed);
    double hits = 0.0, all = 0.0;
    std::function<void(std::size_t)> place = [&](std::size_t i) {
      if (i == ranks.size()) {
        all += 1.0;
        if (statistic(acc) >= observed - tol) hits += 1.0;
        return;
      }
      for (std::size_t g = 0; g < room.size(); ++g) {
        if (room[g] == 0) continue;
        --room[g];
        acc[g] += ranks[i];
        place(i + 1);
        acc[g] -= ranks[i];
        ++room[g];
      }
    };
    place(0);
    out.p = hits / all;
    out.exact = true;
    return out;
  }
  out.p = boost::math::gamma_q(out.df / 2.0, out.h / 2.0);
  return out;
}

}  // namespace agentcrowd
