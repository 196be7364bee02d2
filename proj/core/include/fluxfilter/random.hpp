#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace fluxfilter {

/// Purpose tags keep independent random streams apart for the same (seed, step, member).
enum class Stream : std::uint64_t {
  PriorWeights = 1,
  PriorState = 2,
  ProcessNoise = 3,
  WeightRedraw = 4,
  ObservationNoise = 5,
  TwinNoise = 6,
};

/// Engine seeded from (seed, purpose, step, member). Every member owns its own
/// stream, so results do not depend on the order or thread members run on.
std::mt19937_64 make_engine(std::uint64_t seed, Stream purpose, std::uint64_t step,
                            std::uint64_t member);

/// Fills `out` with independent N(mean_i, variance_i) draws. Zero variance yields the mean exactly.
void fill_gaussian(std::mt19937_64& engine, const Eigen::Ref<const Eigen::VectorXd>& mean,
                   const Eigen::Ref<const Eigen::VectorXd>& variance,
                   Eigen::Ref<Eigen::VectorXd> out);

}  // namespace fluxfilter
