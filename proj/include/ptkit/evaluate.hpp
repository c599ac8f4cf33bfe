#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ptkit/config.hpp"
#include "ptkit/metrics.hpp"
#include "ptkit/protocol.hpp"

namespace ptkit {

/// Result of one evaluation. `to_json()` is deterministic: it has no timestamp.
struct MetricReport {
  Task task = Task::kSegmentation;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();

  std::string to_json() const;
};

/// The cloud the inference regions live on (after pre transforms) and the regions.
struct InferencePlan {
  PointCloud sub_cloud;
  std::vector<SphereRegion> regions;
};

/// Throws ValidationError when a pre transform moves the cloud to another frame,
/// since predictions could not be projected back to the raw points.
InferencePlan plan_inference(const RunConfig& config, const PointCloud& full_cloud);

/// Votes over `runs`, aggregates the regions, projects onto `full_cloud` and scores
/// against its labels. Every run must predict every region of plan_inference().
MetricReport run_evaluate_segmentation(const RunConfig& config, const PointCloud& full_cloud,
                                       const std::vector<PredictionSet>& runs, int workers = 1);

MetricReport run_evaluate_detection(const RunConfig& config, const std::vector<DetectionRecord>& records);

/// JSON array of {"predictions": [...], "ground_truth": [...]} with boxes
/// {"min": [x,y,z], "max": [x,y,z], "class": c, "score": s}.
std::vector<DetectionRecord> detection_records_from_json(const nlohmann::json& j);
nlohmann::json detection_records_to_json(const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> read_detection_records(const std::filesystem::path& path);

/// `truth` maps source coordinates into the target frame.
struct RegistrationPair {
  Positions source;
  Positions target;
  Matrix source_features;
  Matrix target_features;
  RigidTransform truth;
};

struct PairOutcome {
  bool estimated = false;  ///< false when RANSAC found no model
  RegistrationError error;
  bool success = false;
  Index inliers = 0;
};

SuccessCriterion registration_criterion(const RegistrationConfig& config);

/// Pair p runs RANSAC with seed derive_seed(config.seed, {p}).
MetricReport run_register(const RunConfig& config, const std::vector<RegistrationPair>& pairs, int workers = 1,
                          std::vector<PairOutcome>* outcomes = nullptr);

/// Appends {"timestamp", "config_hash", "seed", "task", "metrics"} as one line.
void log_metrics(const MetricReport& report, const std::filesystem::path& path);

}  // namespace ptkit
