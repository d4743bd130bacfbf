#include "moma/nn/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <vector>

namespace moma::nn {

FiniteDiffReport finite_diff_check(ParameterSet& ps,
                                   const std::function<double(bool)>& loss,
                                   Rng& rng, int sample, double eps) {
  ps.zero_grad();
  loss(true);
  std::vector<double> analytic(ps.grads().begin(), ps.grads().end());

  const std::size_t total = ps.size();
  std::vector<std::size_t> idx;
  if (total <= static_cast<std::size_t>(sample)) {
    idx.resize(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  } else {
    std::unordered_set<std::size_t> seen;
    while (seen.size() < static_cast<std::size_t>(sample)) {
      seen.insert(static_cast<std::size_t>(rng.uniform_int(static_cast<int>(total))));
    }
    idx.assign(seen.begin(), seen.end());
    std::sort(idx.begin(), idx.end());
  }

  FiniteDiffReport rep;
  auto vals = ps.values();
  for (std::size_t i : idx) {
    const double saved = vals[i];
    vals[i] = saved + eps;
    const double fp = loss(false);
    vals[i] = saved - eps;
    const double fm = loss(false);
    vals[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double abs_err = std::fabs(numeric - analytic[i]);
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-6});
    rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
    rep.max_rel_err = std::max(rep.max_rel_err, abs_err / denom);
    ++rep.checked;
  }
  return rep;
}

}  // namespace moma::nn
