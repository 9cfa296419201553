#include <json.hpp>

#include <fmt/format.h>

#include "tracklab/ml.hpp"

namespace tracklab::ml {

using nlohmann::json;

std::string to_json(const KmeansModel& model, double created_at) {
  model.validate();
  json j = {{"kind", "kmeans"},
            {"class_names", model.class_names},
            {"centroids", model.centroids},
            {"hyperparameters", json::object()},
            {"seed", nullptr},
            {"created_at", created_at}};
  return j.dump();
}

std::string to_json(const SvmModel& model, double created_at) {
  model.validate();
  json j = {{"kind", "svm"},
            {"class_names", model.class_names},
            {"weights", model.weights},
            {"biases", model.biases},
            {"hyperparameters", {{"lambda", model.hyperparams.lambda}, {"epochs", model.hyperparams.epochs}}},
            {"seed", model.hyperparams.seed},
            {"created_at", created_at}};
  return j.dump();
}

Model model_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "kmeans") {
      KmeansModel m{j.at("class_names").get<std::vector<std::string>>(),
                    j.at("centroids").get<std::vector<FeatureVector>>()};
      m.validate();
      return m;
    }
    if (kind == "svm") {
      SvmModel m;
      m.class_names = j.at("class_names").get<std::vector<std::string>>();
      m.weights = j.at("weights").get<std::vector<FeatureVector>>();
      m.biases = j.at("biases").get<std::vector<double>>();
      m.hyperparams.lambda = j.at("hyperparameters").at("lambda").get<double>();
      m.hyperparams.epochs = j.at("hyperparameters").at("epochs").get<int>();
      m.hyperparams.seed = j.at("seed").get<std::uint64_t>();
      m.validate();
      return m;
    }
    fail(ErrorCode::validation, fmt::format("unknown model kind '{}'", kind));
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, fmt::format("malformed model document: {}", e.what()));
  }
}

std::string to_json(const EvalReport& r) {
  json classes = json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    classes.push_back({{"name", r.class_names[c]},
                       {"precision", r.precision[c]},
                       {"recall", r.recall[c]},
                       {"f1", r.f1[c]},
                       {"support", r.support[c]},
                       {"precision_undefined", static_cast<bool>(r.precision_undefined[c])},
                       {"recall_undefined", static_cast<bool>(r.recall_undefined[c])}});
  }
  json j = {{"accuracy", r.accuracy}, {"total", r.total}, {"classes", classes}, {"confusion", r.confusion}};
  return j.dump();
}

EvalReport eval_report_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.total = j.at("total").get<std::size_t>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& c : j.at("classes")) {
      r.class_names.push_back(c.at("name").get<std::string>());
      r.precision.push_back(c.at("precision").get<double>());
      r.recall.push_back(c.at("recall").get<double>());
      r.f1.push_back(c.at("f1").get<double>());
      r.support.push_back(c.at("support").get<std::size_t>());
      r.precision_undefined.push_back(c.at("precision_undefined").get<bool>());
      r.recall_undefined.push_back(c.at("recall_undefined").get<bool>());
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, fmt::format("malformed evaluation report: {}", e.what()));
  }
}

}  // namespace tracklab::ml
