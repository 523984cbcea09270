#include "retouch/refselect.hpp"

#include <algorithm>
#include <limits>

#include "retouch/common.hpp"

namespace retouch {

std::vector<std::vector<double>> pairwise_distances(const std::vector<ColorToneFeature>& feats,
                                                    Exec exec) {
  const int n = static_cast<int>(feats.size());
  if (n < 1) throw ConfigError("pairwise_distances: empty feature list");
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  par_for(n, exec, [&](std::int64_t i) {
    for (int j = static_cast<int>(i) + 1; j < n; ++j)
      dist[i][j] = chi_square(feats[i], feats[j]);
  });
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) dist[i][j] = dist[j][i];
  return dist;
}

std::vector<int> select_references(const std::vector<std::vector<double>>& dist, int k) {
  const int n = static_cast<int>(dist.size());
  if (n < 1) throw ConfigError("select_references: empty pool");
  if (k < 1) throw ConfigError("select_references: k must be >= 1");
  if (k > n)
    throw ConfigError("select_references: k = " + std::to_string(k) + " exceeds pool size " +
                      std::to_string(n));
  for (const auto& row : dist)
    if (static_cast<int>(row.size()) != n)
      throw ConfigError("select_references: distance matrix is not square");

  std::vector<int> selected;
  std::vector<bool> taken(n, false);

  // Most representative first: the medoid.
  int medoid = 0;
  double best_mean = std::numeric_limits<double>::max();
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < n; ++j) s += dist[i][j];
    const double mean = n > 1 ? s / (n - 1) : 0.0;
    if (mean < best_mean) {
      best_mean = mean;
      medoid = i;
    }
  }
  selected.push_back(medoid);
  taken[medoid] = true;

  while (static_cast<int>(selected.size()) < k) {
    std::vector<int> cand;
    for (int i = 0; i < n; ++i)
      if (!taken[i]) cand.push_back(i);
    const int m = static_cast<int>(cand.size());
    std::vector<double> d_ref(m), d_query(m);
    for (int a = 0; a < m; ++a) {
      double s = 0;
      for (int sel : selected) s += dist[cand[a]][sel];
      d_ref[a] = s / static_cast<double>(selected.size());
      double q = 0;
      for (int b = 0; b < m; ++b)
        if (b != a) q += dist[cand[a]][cand[b]];
      d_query[a] = m > 1 ? q / (m - 1) : 0.0;
    }
    // 1-based competition ranks: count of strictly better candidates + 1.
    int pick = 0;
    double best_rho = std::numeric_limits<double>::max();
    for (int a = 0; a < m; ++a) {
      int r1 = 1, r2 = 1;
      for (int b = 0; b < m; ++b) {
        if (d_ref[b] > d_ref[a]) ++r1;     // descending: far from selected is better
        if (d_query[b] < d_query[a]) ++r2;  // ascending: central to remaining is better
      }
      const double rho = 0.5 * (r1 + r2);
      if (rho < best_rho) {  // strict: ties keep the lowest candidate index
        best_rho = rho;
        pick = a;
      }
    }
    selected.push_back(cand[pick]);
    taken[cand[pick]] = true;
  }
  return selected;
}

std::vector<int> select_references(const std::vector<ColorToneFeature>& feats, int k, Exec exec) {
  return select_references(pairwise_distances(feats, exec), k);
}

}  // namespace retouch
