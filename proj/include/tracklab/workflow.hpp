#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracklab/config.hpp"
#include "tracklab/ingest.hpp"
#include "tracklab/ml.hpp"
#include "tracklab/pipeline.hpp"
#include "tracklab/store.hpp"
#include "tracklab/synth.hpp"

namespace tracklab::workflow {

/// 1 - (single + batch_ops) / total, clamped at 0.
double effort_reduction(std::size_t single_annotations, std::size_t batch_ops, std::size_t total);
/// Fraction as an integer percentage, rounded half away from zero.
long to_percent(double fraction);

// ---------------------------------------------------------------------------
// Per-project exclusive lock

class WorkflowLock {
 public:
  /// Throws conflict when another run holds the project's lock.
  explicit WorkflowLock(std::string project);
  ~WorkflowLock();
  WorkflowLock(const WorkflowLock&) = delete;
  WorkflowLock& operator=(const WorkflowLock&) = delete;

 private:
  std::string project_;
};

// ---------------------------------------------------------------------------

struct IngestSummary {
  std::size_t rows = 0;
  std::size_t rejected_rows = 0;
  std::size_t tracks = 0;  // stored after filtering
  std::vector<ingest::RowError> errors;
};

/// Parses a position file, applies the project's filter and stores tracks.
IngestSummary ingest_tracks(store::Store& store, std::string_view project, std::string_view bytes,
                            const ingest::TrackFormatDescriptor& desc);

struct Settings {
  pipeline::PipelineConfig pipeline;
  config::MlConfig ml;
};

struct PipelineSummary {
  std::size_t tracks = 0;
  std::size_t segments = 0;
  std::vector<pipeline::Runway> runways;
  std::vector<std::size_t> set_sizes;  // index 0 is set 1
};

/// Detects runways, replaces the project's segments and splits them into
/// ml.n_sets sets numbered from 1.
PipelineSummary run_pipeline(store::Store& store, std::string_view project, const Settings& settings);
std::vector<pipeline::Runway> stored_runways(const store::Store& store, std::string_view project);

/// Fits a model on the segments of the given sets. Kmeans starts from the
/// nominal centroids and ignores labels; the SVM trains on current human
/// labels only. Versions count up per algorithm (kmeans from v0, svm from
/// v1). Returns the model reference "name:version".
std::string train_model(store::Store& store, std::string_view project, std::string_view algorithm,
                        const std::vector<int>& sets, const Settings& settings);
ml::Model load_model(const store::Store& store, std::string_view project, std::string_view model_ref);
std::vector<int> model_training_sets(const store::Store& store, std::string_view project, std::string_view model_ref);
std::vector<std::string> list_models(const store::Store& store, std::string_view project);

/// Writes one unverified annotation per segment of the set and opens the
/// verification cycle for that set.
std::size_t infer(store::Store& store, std::string_view project, std::string_view model_ref, int set_id);

/// Kmeans fit on the set followed by inference on it.
std::string bootstrap_cycle(store::Store& store, std::string_view project, int set_id, const Settings& settings);

/// Supplies true labels for subjects, standing in for a human reviewer.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual AnnotatorRecord annotator() const = 0;
  virtual std::string true_label(const store::TrackMeta& subject) const = 0;
};

/// Looks labels up in generator truth: the truth segment of the parent track
/// with the greatest time overlap.
class OracleVerifier : public Verifier {
 public:
  explicit OracleVerifier(std::vector<synth::TruthSegment> truth, std::string name = "oracle");
  AnnotatorRecord annotator() const override;
  std::string true_label(const store::TrackMeta& subject) const override;

 private:
  std::map<std::string, std::vector<synth::TruthSegment>> truth_;
  std::string name_;
};

struct VerifyCounts {
  std::size_t misclassified = 0;
  std::size_t batch_ops = 0;
};

/// Single annotations for wrong pre-labels, then one batch per populated
/// (runway, class) pair over the remaining model labels.
VerifyCounts verify_cycle(store::Store& store, std::string_view project, int set_id, const Verifier& verifier);

/// Model predictions against human labels on a set the model never saw.
ml::EvalReport evaluate_on(store::Store& store, std::string_view project, std::string_view model_ref,
                           int validation_set);
std::optional<ml::EvalReport> stored_metrics(const store::Store& store, std::string_view project,
                                             std::string_view model_ref);
/// A model's pre-labels on a set, against the human labels that replaced
/// them.
ml::EvalReport evaluate_prelabels(const store::Store& store, std::string_view project, std::string_view model_ref,
                                  int set_id);

struct CycleRecord {
  int cycle = 0;
  int set_id = 0;
  std::string model_ref;
};
std::vector<CycleRecord> list_cycles(const store::Store& store, std::string_view project);

struct EffortRow {
  int cycle = 0;
  int set_id = 0;
  std::string model_ref;
  std::size_t num_tracks = 0;
  std::size_t misclassified = 0;
  std::size_t annotation_effort = 0;
  double effort_reduction = 0.0;
};

/// Effort per verification cycle, from the annotations in the store: single
/// human annotations count one each, each batch counts one. Cycles on the
/// validation set are left out.
std::vector<EffortRow> effort_report(const store::Store& store, std::string_view project, int validation_set);

inline constexpr std::string_view kEffortCsvHeader =
    "cycle,num_tracks,misclassified,annotation_effort,effort_reduction_pct";
std::string effort_csv(const std::vector<EffortRow>& rows);
/// {"cycles": [...]} with both the fraction and the rounded percentage.
std::string effort_json(const std::vector<EffortRow>& rows);

}  // namespace tracklab::workflow
