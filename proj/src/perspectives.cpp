#include "disagree/perspectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "disagree/error.hpp"
#include "disagree/rng.hpp"

namespace disagree {

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    out += d * d;
  }
  return out;
}

std::size_t nearest(const std::vector<double>& point, const std::vector<std::vector<double>>& centroids,
                    double* distance = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(point, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (distance) *distance = best_d;
  return best;
}

ClusterResult kmeans_once(const std::vector<std::vector<double>>& points, std::size_t k, Rng& rng,
                          std::size_t max_iterations) {
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  ClusterResult res;
  res.k = k;

  // k-means++ seeding
  res.centroids.push_back(points[rng.below(n)]);
  std::vector<double> d2(n);
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest(points[i], res.centroids, &d2[i]);
      total += d2[i];
    }
    std::size_t pick = total > 0.0 ? rng.categorical(d2) : rng.below(n);
    res.centroids.push_back(points[pick]);
  }

  res.assignment.assign(n, 0);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = nearest(points[i], res.centroids);
      if (c != res.assignment[i]) {
        res.assignment[i] = c;
        changed = true;
      }
    }
    res.sizes.assign(k, 0);
    for (auto c : res.assignment) ++res.sizes[c];
    // an empty cluster takes the point farthest from its centroid
    for (std::size_t c = 0; c < k; ++c) {
      if (res.sizes[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (res.sizes[res.assignment[i]] < 2) continue;
        const double d = squared_distance(points[i], res.centroids[res.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d < 0.0) continue;
      --res.sizes[res.assignment[far]];
      res.assignment[far] = c;
      ++res.sizes[c];
      changed = true;
    }
    for (std::size_t c = 0; c < k; ++c) std::fill(res.centroids[c].begin(), res.centroids[c].end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& centroid = res.centroids[res.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) centroid[j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (res.sizes[c] == 0) continue;
      for (auto& v : res.centroids[c]) v /= static_cast<double>(res.sizes[c]);
    }
    if (!changed) break;
  }
  res.wcss = 0.0;
  for (std::size_t i = 0; i < n; ++i) res.wcss += squared_distance(points[i], res.centroids[res.assignment[i]]);
  return res;
}

// Relabels clusters so that `order[new] = old`.
void relabel(ClusterResult& res, const std::vector<std::size_t>& order) {
  std::vector<std::size_t> to_new(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) to_new[order[i]] = i;
  for (auto& a : res.assignment) a = to_new[a];
  std::vector<std::vector<double>> centroids(order.size());
  std::vector<std::size_t> sizes(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    centroids[i] = std::move(res.centroids[order[i]]);
    sizes[i] = res.sizes[order[i]];
  }
  res.centroids = std::move(centroids);
  res.sizes = std::move(sizes);
}

}  // namespace

nlohmann::json AnnotatorProfile::to_json() const {
  nlohmann::json doc{{"worker_id", worker_id},
                     {"item_count", item_count},
                     {"agreement_rate", agreement_rate},
                     {"npmi", matrix_json(npmi)}};
  doc["cluster_id"] = cluster_id ? nlohmann::json(*cluster_id) : nlohmann::json(nullptr);
  return doc;
}

Matrix npmi_from_counts(const Matrix& joint) {
  const double total = joint.sum();
  Matrix out = Matrix::Zero(joint.rows(), joint.cols());
  if (total <= 0.0) return out;
  const Vector row_sums = joint.rowwise().sum();
  const Eigen::RowVectorXd col_sums = joint.colwise().sum();
  for (Eigen::Index r = 0; r < joint.rows(); ++r) {
    for (Eigen::Index c = 0; c < joint.cols(); ++c) {
      if (row_sums(r) == 0.0 || col_sums(c) == 0.0) continue;
      const double pj = joint(r, c) / total;
      if (pj == 0.0) {
        out(r, c) = -1.0;
      } else if (pj == 1.0) {
        out(r, c) = 1.0;
      } else {
        const double pw = row_sums(r) / total;
        const double pm = col_sums(c) / total;
        out(r, c) = std::clamp(std::log(pj / (pw * pm)) / -std::log(pj), -1.0, 1.0);
      }
    }
  }
  return out;
}

namespace {

// Majority label of `item`, optionally without the vote of `worker_id`.
std::optional<std::size_t> item_majority(const Item& item, Level level, const Taxonomy& tax, const LabelPriors& priors,
                                         const std::string& worker_id, bool leave_one_out) {
  auto counts = label_counts(item, level, tax);
  if (leave_one_out) {
    for (const auto& rec : item.annotations) {
      if (rec.worker_id == worker_id) counts[tax.project(rec.level, rec.ordinal, level)] -= 1.0;
    }
    if (std::all_of(counts.begin(), counts.end(), [](double v) { return v == 0.0; })) return std::nullopt;
  }
  return argmax_with_tie_policy(counts, priors);
}

}  // namespace

Matrix worker_majority_counts(const std::string& worker_id, const Corpus& corpus, Level level,
                              const NpmiOptions& options) {
  const auto& tax = corpus.taxonomy();
  const auto& priors = corpus.priors(level);
  const auto n = static_cast<Eigen::Index>(tax.size(level));
  Matrix joint = Matrix::Zero(n, n);
  for (const auto& item : corpus.items()) {
    for (const auto& rec : item.annotations) {
      if (rec.worker_id != worker_id) continue;
      const auto maj = item_majority(item, level, tax, priors, worker_id, options.leave_one_out);
      if (!maj) continue;
      joint(static_cast<Eigen::Index>(tax.project(rec.level, rec.ordinal, level)), static_cast<Eigen::Index>(*maj)) +=
          1.0;
    }
  }
  return joint;
}

Matrix npmi_matrix(const std::string& worker_id, const Corpus& corpus, Level level, const NpmiOptions& options) {
  return npmi_from_counts(worker_majority_counts(worker_id, corpus, level, options));
}

std::vector<AnnotatorProfile> profile_workers(const Corpus& corpus, Level level, const NpmiOptions& options) {
  const auto& tax = corpus.taxonomy();
  const auto& priors = corpus.priors(level);
  const auto workers = corpus.workers();
  const auto n = static_cast<Eigen::Index>(tax.size(level));
  std::map<std::string, std::size_t> index;
  for (std::size_t w = 0; w < workers.size(); ++w) index.emplace(workers[w], w);
  std::vector<Matrix> joints(workers.size(), Matrix::Zero(n, n));
  std::vector<std::size_t> items(workers.size(), 0);
  for (const auto& item : corpus.items()) {
    std::optional<std::size_t> shared;
    if (!options.leave_one_out) shared = item_majority(item, level, tax, priors, {}, false);
    for (const auto& rec : item.annotations) {
      const auto w = index.at(rec.worker_id);
      ++items[w];
      const auto maj = options.leave_one_out ? item_majority(item, level, tax, priors, rec.worker_id, true) : shared;
      if (!maj) continue;
      joints[w](static_cast<Eigen::Index>(tax.project(rec.level, rec.ordinal, level)),
                static_cast<Eigen::Index>(*maj)) += 1.0;
    }
  }
  std::vector<AnnotatorProfile> out;
  out.reserve(workers.size());
  for (std::size_t w = 0; w < workers.size(); ++w) {
    AnnotatorProfile p;
    p.worker_id = workers[w];
    p.item_count = items[w];
    p.npmi = npmi_from_counts(joints[w]);
    const double total = joints[w].sum();
    p.agreement_rate = total > 0.0 ? joints[w].trace() / total : 0.0;
    out.push_back(std::move(p));
  }
  return out;
}

ClusterResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                     std::size_t restarts, std::size_t max_iterations) {
  if (k == 0) throw ValidationError("k-means needs k >= 1");
  if (points.size() < k) {
    throw ValidationError("k-means needs at least k = " + std::to_string(k) + " points, got " +
                          std::to_string(points.size()));
  }
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw ValidationError("k-means points differ in dimension");
  }
  restarts = std::max<std::size_t>(restarts, 1);
  ClusterResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, r));
    auto res = kmeans_once(points, k, rng, max_iterations);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  // ids in order of first appearance
  std::vector<std::size_t> order;
  std::vector<bool> seen(k, false);
  for (auto a : best.assignment) {
    if (!seen[a]) {
      seen[a] = true;
      order.push_back(a);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!seen[c]) order.push_back(c);
  }
  relabel(best, order);
  return best;
}

nlohmann::json WorkerClusters::to_json() const {
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t c = 0; c < clustering.k; ++c) {
    std::vector<std::string> members;
    for (std::size_t i = 0; i < workers.size(); ++i) {
      if (clustering.assignment[i] == c) members.push_back(workers[i]);
    }
    clusters.push_back({{"cluster_id", c},
                        {"size", clustering.sizes[c]},
                        {"mean_diagonal", mean_diagonal[c]},
                        {"workers", members},
                        {"mean_npmi", matrix_json(mean_matrices[c])}});
  }
  return nlohmann::json{{"k", clustering.k}, {"wcss", clustering.wcss}, {"clusters", clusters}};
}

WorkerClusters cluster_workers(std::vector<AnnotatorProfile>& profiles, std::size_t k, std::uint64_t seed,
                               std::size_t restarts) {
  if (profiles.size() < k) {
    throw ValidationError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(profiles.size()) +
                          " workers");
  }
  const auto rows = profiles.front().npmi.rows();
  const auto cols = profiles.front().npmi.cols();
  std::vector<std::vector<double>> points;
  points.reserve(profiles.size());
  for (const auto& p : profiles) {
    if (p.npmi.rows() != rows || p.npmi.cols() != cols) throw ValidationError("profiles differ in matrix shape");
    points.emplace_back(p.npmi.data(), p.npmi.data() + p.npmi.size());
  }

  WorkerClusters out;
  out.clustering = kmeans(points, k, seed, restarts);
  for (const auto& p : profiles) out.workers.push_back(p.worker_id);

  auto mean_matrices = std::vector<Matrix>(k, Matrix::Zero(rows, cols));
  for (std::size_t c = 0; c < k; ++c) {
    if (out.clustering.sizes[c] == 0) continue;
    mean_matrices[c] = Eigen::Map<const Matrix>(out.clustering.centroids[c].data(), rows, cols);
  }
  std::vector<double> diag(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    diag[c] = mean_matrices[c].diagonal().mean();
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return diag[a] < diag[b]; });
  relabel(out.clustering, order);
  for (std::size_t c = 0; c < k; ++c) {
    out.mean_matrices.push_back(mean_matrices[order[c]]);
    out.mean_diagonal.push_back(diag[order[c]]);
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) profiles[i].cluster_id = out.clustering.assignment[i];
  return out;
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw ValidationError("partitions differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, v] : table) index += choose2(v);
  for (const auto& [key, v] : ra) sum_a += choose2(v);
  for (const auto& [key, v] : rb) sum_b += choose2(v);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

nlohmann::json ConfusionMatrix::to_json() const {
  return nlohmann::json{
      {"level", to_int(level)}, {"counts", matrix_json(counts)}, {"row_normalized", matrix_json(row_normalized)}};
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> rows, std::span<const std::size_t> cols, Level from,
                                 Level to, const Taxonomy& taxonomy) {
  if (rows.size() != cols.size()) {
    throw ValidationError("confusion matrix needs paired sequences, got " + std::to_string(rows.size()) + " and " +
                          std::to_string(cols.size()));
  }
  const auto n = static_cast<Eigen::Index>(taxonomy.size(to));
  ConfusionMatrix out;
  out.level = to;
  out.counts = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.counts(static_cast<Eigen::Index>(taxonomy.project(from, rows[i], to)),
               static_cast<Eigen::Index>(taxonomy.project(from, cols[i], to))) += 1.0;
  }
  out.row_normalized = out.counts;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double s = out.counts.row(r).sum();
    if (s > 0.0) out.row_normalized.row(r) /= s;
  }
  return out;
}

std::map<std::string, HardMetricReport> subgroup_report(const PredictionSet& preds, const Corpus& corpus,
                                                        Level level,
                                                        const std::map<std::string, std::vector<std::string>>& subsets,
                                                        const EvalOptions& options) {
  std::map<std::string, HardMetricReport> out;
  for (const auto& [name, workers] : subsets) {
    if (workers.empty()) throw ValidationError("worker subset '" + name + "' is empty");
    std::vector<std::string> sorted = workers;
    std::sort(sorted.begin(), sorted.end());
    auto filter = [&sorted](const std::string& w) { return std::binary_search(sorted.begin(), sorted.end(), w); };
    out.emplace(name, eval_annotator_specific(preds, corpus, level, options, std::nullopt, filter));
  }
  return out;
}

void write_matrix_table(std::ostream& out, const Matrix& matrix, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels) {
  if (row_labels.size() != static_cast<std::size_t>(matrix.rows()) ||
      col_labels.size() != static_cast<std::size_t>(matrix.cols())) {
    throw ValidationError("matrix table labels do not match the matrix shape");
  }
  out << "label";
  for (const auto& c : col_labels) out << ',' << c;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    out << row_labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) out << ',' << matrix(r, c);
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace disagree
