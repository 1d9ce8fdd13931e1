#pragma once

#include <string>
#include <vector>

namespace psfinv::stats {

// Throws UndefinedCorrelation for fewer than 3 points, unequal lengths or a constant input.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);
// Pearson on average ranks.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);
std::vector<double> ranks(const std::vector<double>& xs);

double median(std::vector<double> xs);

struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

enum class Coefficient { pearson, spearman };

// Column-wise correlation; errors name the offending column pair.
CorrelationMatrix correlation_matrix(const std::vector<std::string>& labels,
                                     const std::vector<std::vector<double>>& columns,
                                     Coefficient kind = Coefficient::pearson);

}  // namespace psfinv::stats
