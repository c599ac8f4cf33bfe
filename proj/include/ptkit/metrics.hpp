#pragma once

#include <span>
#include <string>
#include <vector>

#include "ptkit/core.hpp"

namespace ptkit {

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(Index num_classes);

  Index num_classes() const { return num_classes_; }
  std::int64_t at(Index gt, Index pred) const { return counts_[static_cast<std::size_t>(gt * num_classes_ + pred)]; }
  std::int64_t& at(Index gt, Index pred) { return counts_[static_cast<std::size_t>(gt * num_classes_ + pred)]; }
  std::int64_t total() const;

  /// Adds one count per point whose ground truth is not ignored.
  void update(std::span<const Label> pred, std::span<const Label> gt);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  Index num_classes_;
  std::vector<std::int64_t> counts_;
};

struct SegmentationScores {
  double overall_accuracy = 0.0;
  /// NaN for classes absent from both ground truth and prediction.
  std::vector<double> per_class_iou;
  double miou = 0.0;
};

/// OA, per-class IoU and their mean over classes present in gt or prediction.
SegmentationScores segmentation_scores(const ConfusionMatrix& cm);

/// Intersection over union of two axis-aligned boxes; 0 when the union is empty.
double box_iou_3d(const AxisAlignedBox& a, const AxisAlignedBox& b);

struct DetectionRecord {
  std::vector<AxisAlignedBox> predictions;  ///< scores required
  std::vector<AxisAlignedBox> ground_truth;
};

struct DetectionScores {
  double iou_threshold = 0.0;
  std::vector<Label> classes;     ///< classes with at least one ground-truth box
  std::vector<double> per_class;  ///< AP, aligned with `classes`
  double map = 0.0;
};

/// Average precision from a ranked list of hit flags (all-point interpolation).
double average_precision(std::span<const char> ranked_hits, Index num_ground_truth);

/// mAP per threshold. A prediction only counts for its own class, so a box with
/// the wrong class never matches.
std::vector<DetectionScores> evaluate_detection(const std::vector<DetectionRecord>& records,
                                                std::span<const double> iou_thresholds);

struct RegistrationError {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
};

RegistrationError registration_error(const RigidTransform& estimate, const RigidTransform& truth);

struct SuccessCriterion {
  std::string name;
  double rotation_deg;
  double translation_m;
};

/// 15 deg / 0.3 m.
inline const SuccessCriterion kThreeDMatchCriterion{"3dmatch", 15.0, 0.3};
/// 2 deg / 0.6 m.
inline const SuccessCriterion kKittiCriterion{"kitti", 2.0, 0.6};

/// Looks up "3dmatch" or "kitti"; throws ParameterError otherwise.
SuccessCriterion success_preset(const std::string& name);

bool is_success(const RegistrationError& err, double rot_thresh_deg, double trans_thresh_m);
double success_rate(std::span<const RegistrationError> errors, double rot_thresh_deg, double trans_thresh_m);
double success_rate(std::span<const RegistrationError> errors, const SuccessCriterion& criterion);

}  // namespace ptkit
