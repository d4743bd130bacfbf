#include "moma/wm/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moma::wm {

double sample_variance(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(n - 1);
}

double epistemic_reward_uncertainty(std::span<const double> rewards) {
  return sample_variance(rewards);
}

double epistemic_general_uncertainty(const std::vector<Vec>& member_predictions) {
  const std::size_t n = member_predictions.size();
  if (n < 2) throw std::invalid_argument("epistemic_general_uncertainty: need at least 2 members");
  const std::size_t d = member_predictions.front().size();
  for (const Vec& v : member_predictions) {
    if (v.size() != d) throw std::invalid_argument("epistemic_general_uncertainty: ragged predictions");
  }
  if (d == 0) throw std::invalid_argument("epistemic_general_uncertainty: empty predictions");

  if (d == 1) {
    Vec column(n);
    for (std::size_t m = 0; m < n; ++m) column[m] = member_predictions[m][0];
    // |c| instead of sqrt(c^2): exact for the scalar case, so the general
    // uncertainty of a 1-dim prediction equals the reward uncertainty.
    return std::abs(sample_variance(std::span<const double>(column.data(), column.size())));
  }

  Vec mean(d, 0.0);
  for (const Vec& v : member_predictions) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += v[i];
  }
  for (double& v : mean) v /= static_cast<double>(n);

  double frob_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double c = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        c += (member_predictions[m][i] - mean[i]) * (member_predictions[m][j] - mean[j]);
      }
      c /= static_cast<double>(n - 1);
      frob_sq += c * c;
    }
  }
  return std::sqrt(frob_sq);
}

double percentile_interpolated(Vec values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile_interpolated: empty input");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("percentile_interpolated: p outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace moma::wm
