#include "psfinv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psfinv/errors.hpp"

namespace psfinv::stats {

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw UndefinedCorrelation("pearson: sequences differ in length");
  if (xs.size() < 3) throw UndefinedCorrelation("pearson: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0) || !(syy > 0)) throw UndefinedCorrelation("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) { return pearson(ranks(xs), ranks(ys)); }

double median(std::vector<double> xs) {
  if (xs.empty()) throw InvalidInput("median: empty sequence");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

CorrelationMatrix correlation_matrix(const std::vector<std::string>& labels,
                                     const std::vector<std::vector<double>>& columns, Coefficient kind) {
  if (labels.size() != columns.size()) throw InvalidInput("correlation_matrix: label count mismatch");
  const std::size_t n = columns.size();
  CorrelationMatrix m{labels, std::vector<std::vector<double>>(n, std::vector<double>(n, 1.0))};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double r;
      try {
        r = kind == Coefficient::pearson ? pearson(columns[i], columns[j]) : spearman(columns[i], columns[j]);
      } catch (const UndefinedCorrelation& e) {
        throw UndefinedCorrelation(std::string(e.what()) + " (columns " + labels[i] + ", " + labels[j] + ")");
      }
      m.values[i][j] = m.values[j][i] = r;
    }
  return m;
}

}  // namespace psfinv::stats
