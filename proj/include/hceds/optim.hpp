#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hceds/tensor.hpp"

namespace hceds {

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step_count = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// Bias-corrected ADAM update; zeroes every gradient afterwards.
void adam_step(std::span<Parameter* const> params, AdamState& state);

/// Scales all gradients by max_norm / norm when their global L2 norm exceeds
/// max_norm. Returns the norm before clipping.
double clip_global_norm(std::span<Parameter* const> params, double max_norm);

/// Inverted-dropout mask: entries are 0 or 1/(1-rate).
Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng);

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  bool finite = true;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients with central differences on every coordinate.
///
/// loss_fn(true) must zero nothing itself: gradcheck zeroes all grads, calls
/// loss_fn(true) which is expected to run backward() (accumulating into the
/// parameters' grads), then perturbs each coordinate and calls loss_fn(false).
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradcheckReport gradcheck(const std::function<double(bool)>& loss_fn, std::span<Parameter* const> params, double eps,
                          double floor = 1e-6);

}  // namespace hceds
