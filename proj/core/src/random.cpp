#include "fluxfilter/random.hpp"

#include <cmath>

namespace fluxfilter {

std::mt19937_64 make_engine(std::uint64_t seed, Stream purpose, std::uint64_t step,
                            std::uint64_t member) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  const auto tag = static_cast<std::uint64_t>(purpose);
  std::seed_seq seq{lo(seed), hi(seed), lo(tag), lo(step), hi(step), lo(member), hi(member)};
  return std::mt19937_64(seq);
}

void fill_gaussian(std::mt19937_64& engine, const Eigen::Ref<const Eigen::VectorXd>& mean,
                   const Eigen::Ref<const Eigen::VectorXd>& variance,
                   Eigen::Ref<Eigen::VectorXd> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double z = normal(engine);
    out[i] = variance[i] > 0.0 ? mean[i] + std::sqrt(variance[i]) * z : mean[i];
  }
}

}  // namespace fluxfilter
