#include "tracklab/ml.hpp"

#include <map>
#include <random>
#include <set>

#include <fmt/format.h>

namespace tracklab::ml {

void KmeansModel::validate() const {
  if (centroids.empty()) fail(ErrorCode::validation, "kmeans model has no centroids");
  if (class_names.size() != centroids.size()) {
    fail(ErrorCode::validation, fmt::format("kmeans model has {} centroids but {} class names", centroids.size(),
                                            class_names.size()));
  }
}

KmeansModel nominal_kmeans_init() {
  // The takeoff centroid puts its mass in the two climb bins, mirroring the
  // landing centroid's two descent bins.
  return KmeansModel{
      {"landing", "touch_and_go", "takeoff"},
      {FeatureVector{0.5, 0.5, 0.0, 0.0, 0.0}, FeatureVector{0.0, 0.3, 0.4, 0.3, 0.0},
       FeatureVector{0.0, 0.0, 0.0, 0.5, 0.5}},
  };
}

KmeansFit kmeans_fit_traced(std::span<const FeatureVector> features, const KmeansModel& init,
                            const KmeansOptions& options) {
  init.validate();
  if (features.size() < init.k()) {
    fail(ErrorCode::invalid_argument,
         fmt::format("kmeans needs at least {} feature vectors, got {}", init.k(), features.size()));
  }
  auto r = lloyd<kFeatureDim>(features, init.centroids, options.max_iter, options.tol);
  KmeansFit fit;
  fit.model = KmeansModel{init.class_names, std::move(r.centroids)};
  fit.assignment = std::move(r.assignment);
  fit.objective = std::move(r.objective);
  fit.iterations = r.iterations;
  fit.converged = r.converged;
  return fit;
}

KmeansModel kmeans_fit(std::span<const FeatureVector> features, const KmeansModel& init,
                       const KmeansOptions& options) {
  return kmeans_fit_traced(features, init, options).model;
}

const std::string& kmeans_assign(const KmeansModel& model, const FeatureVector& feature) {
  return model.class_names[nearest_centroid<kFeatureDim>(model.centroids, feature)];
}

// ---------------------------------------------------------------------------

void SvmModel::validate() const {
  if (class_names.size() < 2) fail(ErrorCode::validation, "svm model needs at least 2 classes");
  if (weights.size() != class_names.size() || biases.size() != class_names.size()) {
    fail(ErrorCode::validation, "svm model needs one weight vector and bias per class");
  }
}

namespace {

double dot(const FeatureVector& w, const FeatureVector& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) s += w[i] * x[i];
  return s;
}

}  // namespace

SvmModel svm_train(std::span<const FeatureVector> features, std::span<const std::string> labels,
                   const SvmHyperparams& hp, std::span<const std::string> class_order) {
  if (features.size() != labels.size()) {
    fail(ErrorCode::invalid_argument, "svm_train needs one label per feature vector");
  }
  if (!(hp.lambda > 0.0) || hp.epochs < 1) fail(ErrorCode::invalid_argument, "svm needs lambda > 0 and epochs >= 1");
  const std::set<std::string> present(labels.begin(), labels.end());
  if (present.size() < 2) fail(ErrorCode::invalid_argument, "svm training needs at least 2 classes");

  SvmModel model;
  model.hyperparams = hp;
  if (class_order.empty()) {
    model.class_names.assign(present.begin(), present.end());
  } else {
    for (const auto& c : class_order) {
      if (present.count(c)) model.class_names.push_back(c);
    }
    if (model.class_names.size() != present.size()) {
      fail(ErrorCode::invalid_argument, "training labels contain a class outside the class order");
    }
  }

  const std::size_t n = features.size();
  const double radius = 1.0 / std::sqrt(hp.lambda);
  for (std::size_t c = 0; c < model.class_names.size(); ++c) {
    FeatureVector w{};
    double b = 0.0;
    std::mt19937_64 rng(hp.seed + c);
    const auto steps = static_cast<std::uint64_t>(hp.epochs) * n;
    for (std::uint64_t t = 1; t <= steps; ++t) {
      const std::size_t i = static_cast<std::size_t>(rng() % n);
      const double y = labels[i] == model.class_names[c] ? 1.0 : -1.0;
      const double eta = 1.0 / (hp.lambda * static_cast<double>(t));
      const double margin = y * (dot(w, features[i]) + b);
      const double shrink = 1.0 - eta * hp.lambda;
      for (auto& wi : w) wi *= shrink;
      b *= shrink;
      if (margin < 1.0) {
        for (std::size_t d = 0; d < kFeatureDim; ++d) w[d] += eta * y * features[i][d];
        b += eta * y;
      }
      const double norm = std::sqrt(dot(w, w) + b * b);
      if (norm > radius) {
        const double s = radius / norm;
        for (auto& wi : w) wi *= s;
        b *= s;
      }
    }
    model.weights.push_back(w);
    model.biases.push_back(b);
  }
  return model;
}

std::vector<double> svm_decision(const SvmModel& model, const FeatureVector& x) {
  std::vector<double> out(model.class_names.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = dot(model.weights[c], x) + model.biases[c];
  return out;
}

const std::string& svm_predict(const SvmModel& model, const FeatureVector& x) {
  const auto scores = svm_decision(model, x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return model.class_names[best];
}

double svm_objective(const SvmModel& model, std::span<const FeatureVector> features,
                     std::span<const std::string> labels) {
  double total = 0.0;
  for (std::size_t c = 0; c < model.class_names.size(); ++c) {
    const auto& w = model.weights[c];
    const double b = model.biases[c];
    double hinge = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double y = labels[i] == model.class_names[c] ? 1.0 : -1.0;
      hinge += std::max(0.0, 1.0 - y * (dot(w, features[i]) + b));
    }
    total += 0.5 * model.hyperparams.lambda * (dot(w, w) + b * b) + hinge / static_cast<double>(features.size());
  }
  return total / static_cast<double>(model.class_names.size());
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& class_names(const Model& model) {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.class_names; }, model);
}

const std::string& predict(const Model& model, const FeatureVector& x) {
  if (const auto* k = std::get_if<KmeansModel>(&model)) return kmeans_assign(*k, x);
  return svm_predict(std::get<SvmModel>(model), x);
}

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

EvalReport evaluate(std::span<const std::string> predicted, std::span<const std::string> truth,
                    std::span<const std::string> class_names) {
  if (predicted.size() != truth.size()) {
    fail(ErrorCode::invalid_argument,
         fmt::format("evaluate: {} predictions for {} truth labels", predicted.size(), truth.size()));
  }
  if (truth.empty()) fail(ErrorCode::invalid_argument, "evaluate: empty input");
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < class_names.size(); ++i) index.emplace(class_names[i], i);
  auto lookup = [&](const std::string& label) {
    const auto it = index.find(label);
    if (it == index.end()) fail(ErrorCode::invalid_argument, fmt::format("evaluate: unknown class '{}'", label));
    return it->second;
  };

  const std::size_t k = class_names.size();
  EvalReport r;
  r.class_names.assign(class_names.begin(), class_names.end());
  r.total = truth.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++r.confusion[lookup(truth[i])][lookup(predicted[i])];

  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    correct += r.confusion[c][c];
    std::size_t predicted_c = 0, truth_c = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted_c += r.confusion[j][c];
      truth_c += r.confusion[c][j];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    const double p = predicted_c ? tp / static_cast<double>(predicted_c) : 0.0;
    const double rc = truth_c ? tp / static_cast<double>(truth_c) : 0.0;
    r.precision.push_back(p);
    r.recall.push_back(rc);
    r.f1.push_back(f1_score(p, rc));
    r.support.push_back(truth_c);
    r.precision_undefined.push_back(predicted_c == 0);
    r.recall_undefined.push_back(truth_c == 0);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  return r;
}

}  // namespace tracklab::ml
