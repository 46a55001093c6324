#include "hceds/optim.hpp"

#include <algorithm>
#include <cmath>

namespace hceds {

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.push_back(Tensor::zeros_like(p->value));
      state.second_moment.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    if (!m.same_shape(p.value)) throw ShapeError("adam_step: moment shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    p.zero_grad();
  }
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  if (!(max_norm > 0.0)) throw ParameterError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squared_norm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params) {
      for (auto& g : p->grad.values()) g *= s;
    }
  }
  return norm;
}

Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout_mask: rate must be in [0, 1)");
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : mask.values()) v = u(rng) < rate ? 0.0 : keep;
  return mask;
}

GradcheckReport gradcheck(const std::function<double(bool)>& loss_fn, std::span<Parameter* const> params, double eps,
                          double floor) {
  if (!(eps > 0.0) || eps > 1e-3) throw ParameterError("gradcheck: eps must be in (0, 1e-3]");
  for (Parameter* p : params) p->zero_grad();
  GradcheckReport report;
  const double base = loss_fn(true);
  if (!std::isfinite(base)) {
    report.finite = false;
    report.max_relative_error = INFINITY;
    return report;
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = loss_fn(false);
      p.value[i] = saved - eps;
      const double down = loss_fn(false);
      p.value[i] = saved;
      ++report.coordinates;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.finite = false;
        report.max_relative_error = INFINITY;
        report.worst_parameter = p.name;
        report.worst_index = i;
        return report;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = i;
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return report;
}

}  // namespace hceds
