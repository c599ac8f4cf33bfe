#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "ptkit/metrics.hpp"

using namespace ptkit;

namespace {

AxisAlignedBox cube(double x, double y, double z, double side, Label cls, std::optional<double> score = {}) {
  return {Vec3(x, y, z), Vec3(x + side, y + side, z + side), cls, score};
}

}  // namespace

TEST_CASE("confusion matrix counts and skips ignored ground truth") {
  ConfusionMatrix cm(3);
  cm.update(std::vector<Label>{0, 1, 2, 2}, std::vector<Label>{0, 2, -1, 2});
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(2, 1) == 1);
  CHECK(cm.at(2, 2) == 1);
  CHECK(cm.total() == 3);
  CHECK_THROWS_AS(cm.update(std::vector<Label>{3}, std::vector<Label>{0}), ParameterError);
  CHECK_THROWS_AS(cm.update(std::vector<Label>{0, 1}, std::vector<Label>{0}), ParameterError);
  const ConfusionMatrix before = cm;
  CHECK_THROWS(cm.update(std::vector<Label>{0, 0}, std::vector<Label>{0, 7}));
  CHECK(cm == before);
  ConfusionMatrix other(3);
  other.at(1, 1) = 4;
  cm += other;
  CHECK(cm.at(1, 1) == 4);
}

TEST_CASE("segmentation scores of a hand-evaluated matrix") {
  const auto cm = ConfusionMatrix::from_rows({{5, 1, 0}, {2, 3, 0}, {0, 0, 4}});
  const SegmentationScores s = segmentation_scores(cm);
  // IoU: 5/8, 3/6, 4/4.
  CHECK(std::abs(s.miou - (5.0 / 8.0 + 0.5 + 1.0) / 3.0) < 1e-12);
  CHECK(std::abs(s.miou - 0.708333333333) < 1e-9);
  CHECK(s.overall_accuracy == doctest::Approx(12.0 / 15.0));
  CHECK(s.per_class_iou[1] == 0.5);
}

TEST_CASE("classes absent from gt and prediction are excluded from the mean") {
  const auto cm = ConfusionMatrix::from_rows({{2, 0, 0}, {0, 0, 0}, {0, 0, 2}});
  const SegmentationScores s = segmentation_scores(cm);
  CHECK(std::isnan(s.per_class_iou[1]));
  CHECK(s.miou == 1.0);
}

TEST_CASE("box IoU") {
  CHECK(std::abs(box_iou_3d(cube(0, 0, 0, 1, 0), cube(0.5, 0, 0, 1, 0)) - 1.0 / 3.0) < 1e-12);
  CHECK(box_iou_3d(cube(0, 0, 0, 1, 0), cube(2, 0, 0, 1, 0)) == 0.0);
  CHECK(box_iou_3d(cube(0, 0, 0, 1, 0), cube(0, 0, 0, 1, 0)) == 1.0);
  CHECK(box_iou_3d(cube(0, 0, 0, 1, 0), cube(1, 0, 0, 1, 0)) == 0.0);
  const AxisAlignedBox flat(Vec3::Zero(), Vec3(1, 1, 0), 0);
  CHECK(box_iou_3d(flat, flat) == 0.0);
}

TEST_CASE("average precision against exhaustive PR enumeration") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 25;
    std::vector<std::pair<double, bool>> scored;
    Index hits = 0;
    for (int i = 0; i < n; ++i) {
      const bool hit = u(rng) < 0.5;
      hits += hit;
      scored.emplace_back(std::round(u(rng) * 10.0) / 10.0, hit);
    }
    const Index num_gt = hits + trial % 4;
    if (num_gt == 0) continue;
    auto ranked = scored;
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<char> flags;
    for (const auto& s : ranked) flags.push_back(s.second ? 1 : 0);
    CHECK(std::abs(average_precision(flags, num_gt) - oracle::exhaustive_ap(scored, num_gt)) < 1e-12);
  }
}

TEST_CASE("detection: perfect predictions give mAP 1 and a wrong class gives 0") {
  DetectionRecord rec;
  rec.ground_truth = {cube(0, 0, 0, 1, 0), cube(5, 5, 5, 2, 1)};
  rec.predictions = {cube(0, 0, 0, 1, 0, 0.9), cube(5, 5, 5, 2, 1, 0.8)};
  const std::vector<double> t{0.5};
  CHECK(evaluate_detection({rec}, t)[0].map == 1.0);

  DetectionRecord wrong = rec;
  wrong.predictions[1].class_id = 0;
  const auto s = evaluate_detection({wrong}, t)[0];
  REQUIRE(s.classes == std::vector<Label>{0, 1});
  CHECK(s.per_class[1] == 0.0);
  // The stray class-0 box ranks below the true class-0 hit, so class 0 keeps AP 1.
  CHECK(s.per_class[0] == 1.0);
  CHECK(s.map == 0.5);
}

TEST_CASE("detection: duplicates, misses and cross-scene ranking") {
  // Scene A: two gt boxes of class 0; a duplicate detection of the first one.
  DetectionRecord a;
  a.ground_truth = {cube(0, 0, 0, 1, 0), cube(3, 0, 0, 1, 0)};
  a.predictions = {cube(0, 0, 0, 1, 0, 0.9), cube(0.1, 0, 0, 1, 0, 0.8), cube(3.5, 0, 0, 1, 0, 0.7)};
  // Scene B: one gt box, one good and one false detection.
  DetectionRecord b;
  b.ground_truth = {cube(10, 0, 0, 1, 0)};
  b.predictions = {cube(20, 0, 0, 1, 0, 0.95), cube(10, 0, 0, 1, 0, 0.6)};
  // Ranked: 0.95 miss, 0.9 hit, 0.8 duplicate miss, 0.7 IoU 1/3 (hit at 0.25, miss at 0.5), 0.6 hit.
  const std::vector<double> t{0.25, 0.5};
  const auto s = evaluate_detection({a, b}, t);
  const std::vector<std::pair<double, bool>> at25{{0.95, false}, {0.9, true}, {0.8, false}, {0.7, true}, {0.6, true}};
  const std::vector<std::pair<double, bool>> at50{{0.95, false}, {0.9, true}, {0.8, false}, {0.7, false}, {0.6, true}};
  CHECK(std::abs(s[0].map - oracle::exhaustive_ap(at25, 3)) < 1e-12);
  CHECK(std::abs(s[1].map - oracle::exhaustive_ap(at50, 3)) < 1e-12);
  CHECK(std::abs(s[1].map - (1.0 / 3.0 * 0.5 + 1.0 / 3.0 * 0.4)) < 1e-12);
}

TEST_CASE("detection input checks") {
  DetectionRecord rec;
  rec.ground_truth = {cube(0, 0, 0, 1, 0)};
  rec.predictions = {cube(0, 0, 0, 1, 0)};
  const std::vector<double> t{0.5};
  CHECK_THROWS_AS(evaluate_detection({rec}, t), ParameterError);
  CHECK_THROWS_AS(evaluate_detection({DetectionRecord{}}, t), ParameterError);
}

TEST_CASE("registration error recovers the constructed angle") {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 180.0);
  for (int i = 0; i < 200; ++i) {
    const double deg = u(rng);
    const auto r = RigidTransform::from_axis_angle(Vec3(g(rng), g(rng), g(rng)), deg * std::numbers::pi / 180.0, Vec3(1, 2, 2));
    const RegistrationError e = registration_error(r, RigidTransform::identity());
    CHECK(std::abs(e.rotation_deg - deg) < 1e-6);
    CHECK(e.translation_m == doctest::Approx(3.0));
  }
}

TEST_CASE("success presets and strict thresholds") {
  CHECK(success_preset("3dmatch").rotation_deg == 15.0);
  CHECK(success_preset("3dmatch").translation_m == 0.3);
  CHECK(success_preset("kitti").rotation_deg == 2.0);
  CHECK(success_preset("kitti").translation_m == 0.6);
  CHECK_THROWS_AS(success_preset("eth"), ParameterError);
  const std::vector<RegistrationError> errs{{1.0, 0.1}, {15.0, 0.1}, {14.9, 0.29}, {1.9, 0.59}, {2.5, 0.1}};
  CHECK(success_rate(errs, kThreeDMatchCriterion) == doctest::Approx(0.6));
  CHECK(success_rate(errs, kKittiCriterion) == doctest::Approx(0.4));
  CHECK_THROWS_AS(success_rate(std::vector<RegistrationError>{}, kKittiCriterion), ParameterError);
}
