#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "disagree/rng.hpp"

namespace disagree {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Max-subtracted softmax; strictly positive, sums to one.
Vector softmax(const Vector& logits);
Vector sigmoid(const Vector& logits);

/// Loss value together with its gradient with respect to the logits.
struct LossValue {
  double loss = 0.0;
  Vector grad;
};

/// -ln softmax(logits)[target].
LossValue cross_entropy_loss(const Vector& logits, std::size_t target);

/// Mean over labels of binary cross-entropy with y_k = [k in targets].
LossValue bce_multilabel_loss(const Vector& logits, std::span<const std::size_t> targets);

/// KL(target || softmax(logits)) with 0 ln 0 = 0. Target entries below
/// 1e-12 contribute nothing to the entropy term.
LossValue kl_divergence_loss(const Vector& logits, std::span<const double> target);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Gradients aligned with a ParamStore's parameter order.
using Gradients = std::vector<Matrix>;

/// Named dense parameters plus their adaptive-moment state.
///
/// Parameters keep their insertion order, which fixes the order of random
/// initialization, gradient reduction and serialization.
class ParamStore {
 public:
  /// Adds a zero-initialized parameter.
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);
  /// Adds a parameter drawn from uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)),
  /// with fan_in = cols and fan_out = rows.
  std::size_t add_glorot(std::string name, Eigen::Index rows, Eigen::Index cols, Rng& rng);
  std::size_t add_constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value);

  std::size_t size() const { return values_.size(); }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::string& name(std::size_t index) const { return names_.at(index); }

  Matrix& value(std::size_t index) { return values_.at(index); }
  const Matrix& value(std::size_t index) const { return values_.at(index); }
  Matrix& operator[](std::string_view name) { return values_[index_of(name)]; }
  const Matrix& operator[](std::string_view name) const { return values_[index_of(name)]; }

  std::uint64_t step() const { return step_; }
  std::size_t scalar_count() const;

  Gradients zero_gradients() const;

  /// Copies every parameter into one flat vector (column-major per parameter).
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

  /// Throws NumericError naming the first non-finite entry.
  void check_finite() const;

  /// Versioned checkpoint document. Doubles are written with round-trip
  /// precision, so from_json(to_json()) reproduces every bit. Optimizer
  /// moments are only included on request.
  nlohmann::json to_json(bool include_moments = false) const;
  static ParamStore from_json(const nlohmann::json& doc);

  friend void optimizer_step(ParamStore&, const Gradients&, const AdamConfig&);
  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  std::uint64_t step_ = 0;
};

/// Bitwise comparison of names, values, moments and step count.
bool operator==(const ParamStore& a, const ParamStore& b);

/// One bias-corrected adaptive-moment update, in place. Throws NumericError
/// (naming the parameter and coordinate) if any gradient entry is non-finite.
void optimizer_step(ParamStore& params, const Gradients& grads, const AdamConfig& config);

/// Objective returning its value and writing the analytic gradient.
using FlatObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Compares the analytic gradient with central differences at `probes`
/// randomly chosen coordinates (all coordinates when probes >= x.size()).
/// Relative error is |a - n| / max(|a|, |n|, 1e-6); returns the maximum.
double gradient_check(const FlatObjective& objective, std::span<const double> x, std::size_t probes, double h,
                      std::uint64_t seed = 0);

}  // namespace disagree
