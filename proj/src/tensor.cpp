#include "disagree/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "disagree/error.hpp"

namespace disagree {

namespace {
constexpr double kLogFloor = 1e-12;
constexpr int kCheckpointVersion = 1;
}  // namespace

Vector softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  Vector out = (logits.array() - top).exp().matrix();
  out /= out.sum();
  return out;
}

Vector sigmoid(const Vector& logits) {
  Vector out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    // branch keeps exp() from overflowing for large |z|
    if (z >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

namespace {

double log_sum_exp(const Vector& logits) {
  const double top = logits.maxCoeff();
  return top + std::log((logits.array() - top).exp().sum());
}

// ln(1 + e^z) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

LossValue cross_entropy_loss(const Vector& logits, std::size_t target) {
  if (target >= static_cast<std::size_t>(logits.size())) {
    throw ValidationError("cross-entropy target " + std::to_string(target) + " out of range for " +
                          std::to_string(logits.size()) + " logits");
  }
  LossValue out;
  out.loss = log_sum_exp(logits) - logits[static_cast<Eigen::Index>(target)];
  out.grad = softmax(logits);
  out.grad[static_cast<Eigen::Index>(target)] -= 1.0;
  return out;
}

LossValue bce_multilabel_loss(const Vector& logits, std::span<const std::size_t> targets) {
  if (targets.empty()) throw ValidationError("multi-label loss needs at least one target label");
  const auto n = logits.size();
  Vector y = Vector::Zero(n);
  for (auto t : targets) {
    if (t >= static_cast<std::size_t>(n)) throw ValidationError("multi-label target out of range");
    y[static_cast<Eigen::Index>(t)] = 1.0;
  }
  LossValue out;
  const Vector s = sigmoid(logits);
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    // -[y ln s + (1-y) ln(1-s)] = softplus(z) - y z
    total += softplus(logits[k]) - y[k] * logits[k];
  }
  out.loss = total / static_cast<double>(n);
  out.grad = (s - y) / static_cast<double>(n);
  return out;
}

LossValue kl_divergence_loss(const Vector& logits, std::span<const double> target) {
  if (target.size() != static_cast<std::size_t>(logits.size())) {
    throw ValidationError("KL target has " + std::to_string(target.size()) + " entries for " +
                          std::to_string(logits.size()) + " logits");
  }
  const double lse = log_sum_exp(logits);
  LossValue out;
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double p = target[i];
    if (p <= 0.0) continue;
    const double log_q = logits[static_cast<Eigen::Index>(i)] - lse;
    loss += p * (std::log(std::max(p, kLogFloor)) - log_q);
  }
  out.loss = loss;
  out.grad = softmax(logits);
  double mass = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    out.grad[static_cast<Eigen::Index>(i)] -= target[i];
    mass += target[i];
  }
  // d/dz of -sum p ln q is mass * q - p; targets sum to one in practice
  if (mass != 1.0) out.grad += (mass - 1.0) * softmax(logits);
  return out;
}

// ---- ParamStore ----------------------------------------------------------------

std::size_t ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  return add_constant(std::move(name), rows, cols, 0.0);
}

std::size_t ParamStore::add_constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value) {
  if (contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(Matrix::Constant(rows, cols, value));
  first_moment_.push_back(Matrix::Zero(rows, cols));
  second_moment_.push_back(Matrix::Zero(rows, cols));
  return values_.size() - 1;
}

std::size_t ParamStore::add_glorot(std::string name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const std::size_t idx = add(std::move(name), rows, cols);
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  auto& m = values_[idx];
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-a, a);
  }
  return idx;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ValidationError("unknown parameter '" + std::string(name) + "'");
}

bool ParamStore::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

Gradients ParamStore::zero_gradients() const {
  Gradients grads;
  grads.reserve(values_.size());
  for (const auto& v : values_) grads.push_back(Matrix::Zero(v.rows(), v.cols()));
  return grads;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(scalar_count());
  for (const auto& v : values_) flat.insert(flat.end(), v.data(), v.data() + v.size());
  return flat;
}

void ParamStore::assign_flat(std::span<const double> flat) {
  if (flat.size() != scalar_count()) throw ValidationError("flat parameter vector has the wrong length");
  std::size_t offset = 0;
  for (auto& v : values_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.data());
    offset += static_cast<std::size_t>(v.size());
  }
}

void ParamStore::check_finite() const {
  for (std::size_t p = 0; p < values_.size(); ++p) {
    const auto& v = values_[p];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v.data()[i])) {
        throw NumericError("non-finite value in parameter '" + names_[p] + "' at flat index " + std::to_string(i));
      }
    }
  }
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& doc, const std::string& name) {
  const auto rows = doc.at("rows").get<Eigen::Index>();
  const auto cols = doc.at("cols").get<Eigen::Index>();
  const auto data = doc.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ValidationError("checkpoint array '" + name + "' has " + std::to_string(data.size()) +
                          " entries for shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

nlohmann::json ParamStore::to_json(bool include_moments) const {
  check_finite();
  nlohmann::json doc;
  doc["format"] = "disagree-params";
  doc["version"] = kCheckpointVersion;
  doc["step"] = step_;
  doc["arrays"] = nlohmann::json::array();
  for (std::size_t p = 0; p < values_.size(); ++p) {
    nlohmann::json entry = matrix_to_json(values_[p]);
    entry["name"] = names_[p];
    if (include_moments) {
      entry["m"] = std::vector<double>(first_moment_[p].data(), first_moment_[p].data() + first_moment_[p].size());
      entry["v"] = std::vector<double>(second_moment_[p].data(), second_moment_[p].data() + second_moment_[p].size());
    }
    doc["arrays"].push_back(std::move(entry));
  }
  return doc;
}

ParamStore ParamStore::from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", "") != "disagree-params") throw ValidationError("not a parameter document");
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + doc.at("version").dump());
    }
    ParamStore store;
    for (const auto& entry : doc.at("arrays")) {
      const auto name = entry.at("name").get<std::string>();
      Matrix m = matrix_from_json(entry, name);
      const auto idx = store.add(name, m.rows(), m.cols());
      store.values_[idx] = std::move(m);
      if (entry.contains("m")) {
        const auto mm = entry.at("m").get<std::vector<double>>();
        const auto vv = entry.at("v").get<std::vector<double>>();
        if (mm.size() != static_cast<std::size_t>(store.values_[idx].size()) || vv.size() != mm.size()) {
          throw ValidationError("checkpoint moments for '" + name + "' have the wrong size");
        }
        std::copy(mm.begin(), mm.end(), store.first_moment_[idx].data());
        std::copy(vv.begin(), vv.end(), store.second_moment_[idx].data());
      }
    }
    store.step_ = doc.at("step").get<std::uint64_t>();
    store.check_finite();
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.names_ != b.names_ || a.step_ != b.step_) return false;
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  };
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    if (!same(a.values_[i], b.values_[i]) || !same(a.first_moment_[i], b.first_moment_[i]) ||
        !same(a.second_moment_[i], b.second_moment_[i])) {
      return false;
    }
  }
  return true;
}

void optimizer_step(ParamStore& params, const Gradients& grads, const AdamConfig& config) {
  if (grads.size() != params.values_.size()) throw ValidationError("gradient count does not match parameters");
  for (std::size_t p = 0; p < grads.size(); ++p) {
    const auto& g = grads[p];
    if (g.rows() != params.values_[p].rows() || g.cols() != params.values_[p].cols()) {
      throw ValidationError("gradient shape mismatch for parameter '" + params.names_[p] + "'");
    }
    if (!g.allFinite()) {
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g.data()[i])) {
          std::ostringstream msg;
          msg << "non-finite gradient for parameter '" << params.names_[p] << "' at flat index " << i
              << " (value " << g.data()[i] << ", step " << params.step_ + 1 << ")";
          throw NumericError(msg.str());
        }
      }
    }
  }
  ++params.step_;
  const double t = static_cast<double>(params.step_);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t p = 0; p < grads.size(); ++p) {
    auto m = params.first_moment_[p].array();
    auto v = params.second_moment_[p].array();
    const auto g = grads[p].array();
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.square();
    params.values_[p].array() -= config.lr * (m / c1) / ((v / c2).sqrt() + config.eps);
  }
}

// ---- gradient checking -----------------------------------------------------------

double gradient_check(const FlatObjective& objective, std::span<const double> x, std::size_t probes, double h,
                      std::uint64_t seed) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> analytic(x.size(), 0.0);
  std::vector<double> scratch(x.size(), 0.0);
  objective(point, analytic);

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (probes < coords.size()) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(probes);
  }

  double worst = 0.0;
  for (auto i : coords) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = objective(point, scratch);
    point[i] = saved - h;
    const double down = objective(point, scratch);
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace disagree
