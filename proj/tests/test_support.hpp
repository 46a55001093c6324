#pragma once

#include <random>
#include <string>
#include <vector>

#include "hceds/tensor.hpp"

namespace hceds::testing {

inline Parameter random_param(std::string name, std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.values()) v = u(rng);
  return Parameter(std::move(name), std::move(t));
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  return random_param("", std::move(shape), rng, scale).value;
}

inline std::string data_dir() { return HCEDS_DATA_DIR; }

}  // namespace hceds::testing
