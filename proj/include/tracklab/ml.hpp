#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tracklab/error.hpp"

namespace tracklab::ml {

inline constexpr std::size_t kFeatureDim = 5;

/// Normalized 5-bin vertical-rate histogram.
using FeatureVector = std::array<double, kFeatureDim>;

template <std::size_t D>
using Point = std::array<double, D>;

template <std::size_t D>
double squared_distance(const Point<D>& a, const Point<D>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Index of the nearest centroid; ties go to the lowest index.
template <std::size_t D>
std::size_t nearest_centroid(std::span<const Point<D>> centroids, const Point<D>& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    const double d = squared_distance(centroids[k], x);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

template <std::size_t D>
struct LloydResult {
  std::vector<Point<D>> centroids;
  std::vector<std::size_t> assignment;
  // Sum of squared distances after each assignment step, starting with the
  // assignment to the initial centroids.
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
};

/// Lloyd iterations from the given centroids. A cluster that loses all its
/// members keeps its previous centroid. Stops when no centroid moves more
/// than tol (Euclidean) or after max_iter updates.
template <std::size_t D>
LloydResult<D> lloyd(std::span<const Point<D>> points, std::vector<Point<D>> centroids, int max_iter, double tol) {
  LloydResult<D> r;
  const std::size_t k = centroids.size();
  r.assignment.resize(points.size());
  auto assign = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      r.assignment[i] = nearest_centroid<D>(centroids, points[i]);
      total += squared_distance(centroids[r.assignment[i]], points[i]);
    }
    r.objective.push_back(total);
  };
  assign();
  for (int it = 0; it < max_iter; ++it) {
    std::vector<Point<D>> sums(k, Point<D>{});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[r.assignment[i]];
      for (std::size_t d = 0; d < D; ++d) s[d] += points[i][d];
      ++counts[r.assignment[i]];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      Point<D> mean;
      for (std::size_t d = 0; d < D; ++d) mean[d] = sums[c][d] / static_cast<double>(counts[c]);
      max_shift = std::max(max_shift, squared_distance(mean, centroids[c]));
      centroids[c] = mean;
    }
    ++r.iterations;
    assign();
    if (std::sqrt(max_shift) < tol) {
      r.converged = true;
      break;
    }
  }
  r.centroids = std::move(centroids);
  return r;
}

// ---------------------------------------------------------------------------
// Kmeans bootstrap

struct KmeansModel {
  std::vector<std::string> class_names;
  std::vector<FeatureVector> centroids;

  std::size_t k() const { return centroids.size(); }
  void validate() const;
};

/// Landing, touch-and-go and takeoff starting centroids.
KmeansModel nominal_kmeans_init();

struct KmeansOptions {
  int max_iter = 100;
  double tol = 1e-6;
};

struct KmeansFit {
  KmeansModel model;
  std::vector<std::size_t> assignment;
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
};

KmeansFit kmeans_fit_traced(std::span<const FeatureVector> features, const KmeansModel& init,
                            const KmeansOptions& options = {});
KmeansModel kmeans_fit(std::span<const FeatureVector> features, const KmeansModel& init,
                       const KmeansOptions& options = {});
const std::string& kmeans_assign(const KmeansModel& model, const FeatureVector& feature);

// ---------------------------------------------------------------------------
// Linear one-vs-rest SVM

struct SvmHyperparams {
  double lambda = 1e-3;
  int epochs = 200;
  std::uint64_t seed = 0;
};

struct SvmModel {
  std::vector<std::string> class_names;
  std::vector<FeatureVector> weights;
  std::vector<double> biases;
  SvmHyperparams hyperparams;

  void validate() const;
};

/// Pegasos-style stochastic subgradient descent on the L2-regularized hinge
/// loss, one binary problem per class, step 1/(lambda t). The bias is
/// learned as the weight of a constant feature. Classes are ordered by
/// `class_order` when given (classes absent from the labels are skipped),
/// otherwise sorted.
SvmModel svm_train(std::span<const FeatureVector> features, std::span<const std::string> labels,
                   const SvmHyperparams& hp = {}, std::span<const std::string> class_order = {});
std::vector<double> svm_decision(const SvmModel& model, const FeatureVector& x);
const std::string& svm_predict(const SvmModel& model, const FeatureVector& x);

/// Mean over classes of lambda/2 |w|^2 + mean hinge loss. Equals 1 for a
/// zero model.
double svm_objective(const SvmModel& model, std::span<const FeatureVector> features,
                     std::span<const std::string> labels);

// ---------------------------------------------------------------------------
// Persistence

using Model = std::variant<KmeansModel, SvmModel>;

std::string to_json(const KmeansModel& model, double created_at);
std::string to_json(const SvmModel& model, double created_at);
Model model_from_json(std::string_view text);
const std::vector<std::string>& class_names(const Model& model);
const std::string& predict(const Model& model, const FeatureVector& x);

// ---------------------------------------------------------------------------
// Metrics

struct EvalReport {
  std::vector<std::string> class_names;
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::size_t> support;  // truth count per class
  // Set where the metric had a zero denominator and was reported as 0.
  std::vector<bool> precision_undefined;
  std::vector<bool> recall_undefined;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
};

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

EvalReport evaluate(std::span<const std::string> predicted, std::span<const std::string> truth,
                    std::span<const std::string> class_names);

std::string to_json(const EvalReport& report);
EvalReport eval_report_from_json(std::string_view text);

}  // namespace tracklab::ml
