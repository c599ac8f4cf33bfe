#include "ptkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

namespace ptkit {

ConfusionMatrix::ConfusionMatrix(Index num_classes) : num_classes_(num_classes) {
  if (num_classes < 1) throw ParameterError("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(num_classes * num_classes), 0);
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

void ConfusionMatrix::update(std::span<const Label> pred, std::span<const Label> gt) {
  if (pred.size() != gt.size()) throw ParameterError("prediction and ground truth lengths differ");
  // Validate everything first so a bad label leaves the matrix untouched.
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel) continue;
    if (gt[i] < 0 || gt[i] >= num_classes_)
      throw ParameterError("ground-truth label " + std::to_string(gt[i]) + " out of range");
    if (pred[i] < 0 || pred[i] >= num_classes_)
      throw ParameterError("predicted label " + std::to_string(pred[i]) + " out of range");
  }
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i] != kIgnoreLabel) ++at(gt[i], pred[i]);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ParameterError("confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix cm(static_cast<Index>(rows.size()));
  for (std::size_t g = 0; g < rows.size(); ++g) {
    if (rows[g].size() != rows.size()) throw ParameterError("confusion matrix must be square");
    for (std::size_t p = 0; p < rows.size(); ++p) {
      if (rows[g][p] < 0) throw ParameterError("confusion counts must be nonnegative");
      cm.at(static_cast<Index>(g), static_cast<Index>(p)) = rows[g][p];
    }
  }
  return cm;
}

SegmentationScores segmentation_scores(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw ParameterError("segmentation_scores on an empty confusion matrix");
  const Index c = cm.num_classes();
  SegmentationScores out;
  std::int64_t trace = 0;
  double iou_sum = 0.0;
  Index present = 0;
  out.per_class_iou.resize(static_cast<std::size_t>(c));
  for (Index k = 0; k < c; ++k) {
    std::int64_t row = 0, col = 0;
    for (Index j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const std::int64_t tp = cm.at(k, k);
    trace += tp;
    const std::int64_t uni = row + col - tp;
    if (uni == 0) {
      out.per_class_iou[static_cast<std::size_t>(k)] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    out.per_class_iou[static_cast<std::size_t>(k)] = iou;
    iou_sum += iou;
    ++present;
  }
  out.overall_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  out.miou = iou_sum / static_cast<double>(present);
  return out;
}

double box_iou_3d(const AxisAlignedBox& a, const AxisAlignedBox& b) {
  const Vec3 lo = a.min_corner.cwiseMax(b.min_corner);
  const Vec3 hi = a.max_corner.cwiseMin(b.max_corner);
  const double inter = (hi - lo).cwiseMax(0.0).prod();
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double average_precision(std::span<const char> ranked_hits, Index num_ground_truth) {
  if (num_ground_truth <= 0) throw ParameterError("average_precision needs ground truth");
  const std::size_t n = ranked_hits.size();
  std::vector<double> precision(n), recall(n);
  Index tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_hits[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_ground_truth);
  }
  // Make precision non-increasing from the right, then integrate over recall steps.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

std::vector<DetectionScores> evaluate_detection(const std::vector<DetectionRecord>& records,
                                                std::span<const double> iou_thresholds) {
  std::map<Label, Index> gt_per_class;
  for (const auto& rec : records) {
    for (const auto& g : rec.ground_truth) ++gt_per_class[g.class_id];
    for (const auto& p : rec.predictions)
      if (!p.score) throw ParameterError("every predicted box needs a score");
  }
  if (gt_per_class.empty()) throw ParameterError("evaluate_detection needs at least one ground-truth box");

  struct Ranked {
    double score;
    std::size_t scene;
    std::size_t box;
  };
  std::vector<DetectionScores> out;
  for (double threshold : iou_thresholds) {
    DetectionScores scores;
    scores.iou_threshold = threshold;
    double sum = 0.0;
    for (const auto& [cls, num_gt] : gt_per_class) {
      std::vector<Ranked> ranked;
      for (std::size_t s = 0; s < records.size(); ++s)
        for (std::size_t b = 0; b < records[s].predictions.size(); ++b)
          if (records[s].predictions[b].class_id == cls) ranked.push_back({*records[s].predictions[b].score, s, b});
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const Ranked& x, const Ranked& y) { return x.score > y.score; });

      std::vector<std::vector<char>> used(records.size());
      for (std::size_t s = 0; s < records.size(); ++s) used[s].assign(records[s].ground_truth.size(), 0);
      std::vector<char> hits;
      hits.reserve(ranked.size());
      for (const Ranked& r : ranked) {
        const AxisAlignedBox& pred = records[r.scene].predictions[r.box];
        const auto& gts = records[r.scene].ground_truth;
        std::ptrdiff_t best = -1;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (gts[g].class_id != cls || used[r.scene][g]) continue;
          const double iou = box_iou_3d(pred, gts[g]);
          if (iou > best_iou) {
            best_iou = iou;
            best = static_cast<std::ptrdiff_t>(g);
          }
        }
        const bool hit = best >= 0 && best_iou >= threshold;
        if (hit) used[r.scene][static_cast<std::size_t>(best)] = 1;
        hits.push_back(hit ? 1 : 0);
      }
      const double ap = average_precision(hits, num_gt);
      scores.classes.push_back(cls);
      scores.per_class.push_back(ap);
      sum += ap;
    }
    scores.map = sum / static_cast<double>(gt_per_class.size());
    out.push_back(std::move(scores));
  }
  return out;
}

RegistrationError registration_error(const RigidTransform& estimate, const RigidTransform& truth) {
  RegistrationError err;
  err.translation_m = (estimate.translation() - truth.translation()).norm();
  // atan2 of the skew and symmetric parts stays accurate near 0 and 180 degrees.
  const Mat3 d = estimate.rotation() * truth.rotation().transpose();
  const Vec3 skew(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  err.rotation_deg = std::atan2(0.5 * skew.norm(), 0.5 * (d.trace() - 1.0)) * 180.0 / std::numbers::pi;
  return err;
}

SuccessCriterion success_preset(const std::string& name) {
  if (name == kThreeDMatchCriterion.name) return kThreeDMatchCriterion;
  if (name == kKittiCriterion.name) return kKittiCriterion;
  throw ParameterError("unknown success preset '" + name + "' (expected 3dmatch or kitti)");
}

bool is_success(const RegistrationError& err, double rot_thresh_deg, double trans_thresh_m) {
  return err.rotation_deg < rot_thresh_deg && err.translation_m < trans_thresh_m;
}

double success_rate(std::span<const RegistrationError> errors, double rot_thresh_deg, double trans_thresh_m) {
  if (errors.empty()) throw ParameterError("success_rate of an empty list");
  if (!(rot_thresh_deg > 0.0) || !(trans_thresh_m > 0.0)) throw ParameterError("thresholds must be positive");
  const auto passed = std::count_if(errors.begin(), errors.end(), [&](const RegistrationError& e) {
    return is_success(e, rot_thresh_deg, trans_thresh_m);
  });
  return static_cast<double>(passed) / static_cast<double>(errors.size());
}

double success_rate(std::span<const RegistrationError> errors, const SuccessCriterion& criterion) {
  return success_rate(errors, criterion.rotation_deg, criterion.translation_m);
}

}  // namespace ptkit
