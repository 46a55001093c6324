#include "hceds/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace hceds {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != product(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> data) {
  if (data.empty()) throw ShapeError("vector tensor must be non-empty");
  auto n = data.size();
  return Tensor({n}, std::move(data));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

Parameter make_weight(std::string name, std::size_t rows, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w({rows, fan_in});
  for (auto& v : w.values()) v = dist(rng);
  return Parameter(std::move(name), std::move(w));
}

Parameter make_bias(std::string name, std::size_t n, double fill) {
  return Parameter(std::move(name), Tensor({n}, fill));
}

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2 || W.cols() != x.size() || b.size() != W.rows()) {
    throw ShapeError("affine: W" + shape_string(W.shape()) + " x" + shape_string(x.shape()) + " b" +
                     shape_string(b.shape()));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Tensor y = b;
  Eigen::Map<const RowMat> w(W.data(), static_cast<Eigen::Index>(W.rows()), static_cast<Eigen::Index>(W.cols()));
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  yv.noalias() += w * xv;
  return y;
}

Tensor softmax(std::span<const double> x) {
  if (x.empty()) throw ShapeError("softmax: empty input");
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return Tensor::vector(std::move(out));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double multilabel_bce(std::span<const double> logits, std::span<const double> targets) {
  if (logits.size() != targets.size() || logits.empty()) {
    throw ShapeError("multilabel_bce: logits length " + std::to_string(logits.size()) + " vs targets length " +
                     std::to_string(targets.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (targets[i] != 0.0 && targets[i] != 1.0) throw ParameterError("multilabel_bce: targets must be 0 or 1");
    total += softplus(logits[i]) - targets[i] * logits[i];
  }
  return total / static_cast<double>(logits.size());
}

}  // namespace hceds
