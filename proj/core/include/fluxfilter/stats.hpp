#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>

namespace fluxfilter {

/// Empirical percentile with linear interpolation between order statistics
/// (the "linear" rule: rank = q (n - 1)). q in [0, 1].
double percentile(Eigen::VectorXd values, double q);

struct Envelope {
  double mean = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;
};

Envelope envelope(const Eigen::Ref<const Eigen::VectorXd>& samples);

/// Runs body(i) for i in [0, n) on up to `workers` threads (0 = hardware
/// concurrency). Each index is processed exactly once; the first exception
/// thrown by any index is rethrown after all threads join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

int resolve_workers(int requested);

}  // namespace fluxfilter
