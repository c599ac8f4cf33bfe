#include "ptkit/evaluate.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <cstdio>
#include <fstream>

#include "ptkit/registration.hpp"

namespace ptkit {
namespace {

constexpr std::uint64_t kPreTransformStream = 0x7072652d7472616eULL;

std::string short_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

MetricReport make_report(const RunConfig& config) {
  MetricReport report;
  report.task = config.task;
  report.config_hash = config.hash();
  report.seed = config.seed;
  return report;
}

void check_runs(const InferencePlan& plan, const std::vector<PredictionSet>& runs) {
  if (runs.empty()) throw ValidationError("no prediction runs given");
  const Index classes = runs.front().num_classes;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const PredictionSet& run = runs[k];
    const std::string where = "run " + std::to_string(k);
    if (run.num_points != plan.sub_cloud.size())
      throw ValidationError(where + ": predictions are for " + std::to_string(run.num_points) +
                            " points, the evaluation cloud has " + std::to_string(plan.sub_cloud.size()));
    if (run.num_classes != classes) throw ValidationError(where + ": class count differs from run 0");
    std::vector<std::size_t> bad;
    for (std::size_t r = 0; r < plan.regions.size(); ++r)
      if (r >= run.regions.size() || run.regions[r].members != plan.regions[r].members) bad.push_back(r);
    if (run.regions.size() > plan.regions.size())
      throw ValidationError(where + ": " + std::to_string(run.regions.size()) + " region predictions for " +
                            std::to_string(plan.regions.size()) + " regions");
    if (!bad.empty()) {
      std::string list;
      for (std::size_t i = 0; i < bad.size() && i < 20; ++i) list += (i ? ", " : "") + std::to_string(bad[i]);
      if (bad.size() > 20) list += ", ... (" + std::to_string(bad.size()) + " total)";
      throw ValidationError(where + ": missing or mismatched predictions for regions " + list);
    }
  }
}

AxisAlignedBox box_from_json(const nlohmann::json& j, bool need_score, const std::string& where) {
  try {
    const auto lo = j.at("min").get<std::array<double, 3>>();
    const auto hi = j.at("max").get<std::array<double, 3>>();
    std::optional<double> score;
    if (j.contains("score")) score = j.at("score").get<double>();
    if (need_score && !score) throw ParameterError("prediction has no score");
    return AxisAlignedBox(Vec3(lo[0], lo[1], lo[2]), Vec3(hi[0], hi[1], hi[2]), j.at("class").get<Label>(), score);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

nlohmann::json box_to_json(const AxisAlignedBox& b) {
  nlohmann::json j = {{"min", {b.min_corner.x(), b.min_corner.y(), b.min_corner.z()}},
                      {"max", {b.max_corner.x(), b.max_corner.y(), b.max_corner.z()}},
                      {"class", b.class_id}};
  if (b.score) j["score"] = *b.score;
  return j;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  const std::size_t n = std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%.*s.%03dZ", static_cast<int>(n), buf, static_cast<int>(millis));
  return out;
}

}  // namespace

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = to_string(task);
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["metrics"] = metrics;
  return j.dump();
}

InferencePlan plan_inference(const RunConfig& config, const PointCloud& full_cloud) {
  const TransformPipeline& pre = config.transforms.pre;
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (!pre[i].preserves_frame())
      throw ValidationError("pre_transforms[" + std::to_string(i) + "] (" + pre[i].describe() +
                            ") changes the coordinate frame; predictions could not be projected back");
  InferencePlan plan;
  Rng rng = make_rng(config.seed, {kPreTransformStream});
  plan.sub_cloud = pre.apply(full_cloud, rng);
  plan.regions =
      inference_regions(plan.sub_cloud.positions, config.protocol.sphere_radius, config.protocol.grid_spacing);
  return plan;
}

MetricReport run_evaluate_segmentation(const RunConfig& config, const PointCloud& full_cloud,
                                       const std::vector<PredictionSet>& runs, int workers) {
  if (!full_cloud.has_labels()) throw ValidationError("segmentation evaluation needs ground-truth labels");
  const InferencePlan plan = plan_inference(config, full_cloud);
  check_runs(plan, runs);

  std::vector<Matrix> probs;
  Index uncovered = 0;
  for (const PredictionSet& run : runs) {
    AggregatedPrediction agg = aggregate_sphere_predictions(run);
    uncovered = std::max(uncovered, agg.uncovered);
    probs.push_back(std::move(agg.probs));
  }
  const Matrix voted = vote_average(probs);
  const std::vector<Label> pred =
      project_full_resolution(plan.sub_cloud.positions, voted, full_cloud.positions, workers);

  ConfusionMatrix cm(runs.front().num_classes);
  cm.update(pred, full_cloud.labels);
  const SegmentationScores scores = segmentation_scores(cm);

  MetricReport report = make_report(config);
  report.metrics["overall_accuracy"] = scores.overall_accuracy;
  report.metrics["miou"] = scores.miou;
  report.metrics["per_class_iou"] = scores.per_class_iou;
  report.metrics["points"] = full_cloud.size();
  report.metrics["evaluated_points"] = cm.total();
  report.metrics["regions"] = plan.regions.size();
  report.metrics["uncovered_points"] = uncovered;
  return report;
}

MetricReport run_evaluate_detection(const RunConfig& config, const std::vector<DetectionRecord>& records) {
  const std::vector<DetectionScores> scores = evaluate_detection(records, config.detection.iou_thresholds);
  MetricReport report = make_report(config);
  for (const DetectionScores& s : scores) {
    const std::string t = short_number(s.iou_threshold);
    report.metrics["mAP@" + t] = s.map;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < s.classes.size(); ++c) per_class[std::to_string(s.classes[c])] = s.per_class[c];
    report.metrics["AP@" + t] = per_class;
  }
  report.metrics["scenes"] = records.size();
  return report;
}

std::vector<DetectionRecord> detection_records_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("detection records must be a JSON array");
  std::vector<DetectionRecord> out;
  for (std::size_t s = 0; s < j.size(); ++s) {
    const std::string where = "scene " + std::to_string(s);
    const nlohmann::json& scene = j[s];
    if (!scene.is_object() || !scene.contains("predictions") || !scene.contains("ground_truth"))
      throw ParseError(where + ": expected an object with predictions and ground_truth");
    DetectionRecord rec;
    for (std::size_t i = 0; i < scene["predictions"].size(); ++i)
      rec.predictions.push_back(
          box_from_json(scene["predictions"][i], true, where + " prediction " + std::to_string(i)));
    for (std::size_t i = 0; i < scene["ground_truth"].size(); ++i)
      rec.ground_truth.push_back(
          box_from_json(scene["ground_truth"][i], false, where + " ground truth " + std::to_string(i)));
    out.push_back(std::move(rec));
  }
  return out;
}

nlohmann::json detection_records_to_json(const std::vector<DetectionRecord>& records) {
  nlohmann::json out = nlohmann::json::array();
  for (const DetectionRecord& rec : records) {
    nlohmann::json scene = {{"predictions", nlohmann::json::array()}, {"ground_truth", nlohmann::json::array()}};
    for (const auto& b : rec.predictions) scene["predictions"].push_back(box_to_json(b));
    for (const auto& b : rec.ground_truth) scene["ground_truth"].push_back(box_to_json(b));
    out.push_back(std::move(scene));
  }
  return out;
}

std::vector<DetectionRecord> read_detection_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return detection_records_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

SuccessCriterion registration_criterion(const RegistrationConfig& config) {
  if (config.preset != "custom") return success_preset(config.preset);
  return {"custom", config.rotation_threshold_deg.value(), config.translation_threshold_m.value()};
}

MetricReport run_register(const RunConfig& config, const std::vector<RegistrationPair>& pairs, int workers,
                          std::vector<PairOutcome>* outcomes) {
  const RegistrationConfig& rc = config.registration;
  const SuccessCriterion criterion = registration_criterion(rc);
  std::vector<PairOutcome> results;
  double rot_sum = 0.0, trans_sum = 0.0;
  Index successes = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const RegistrationPair& pair = pairs[p];
    PairOutcome outcome;
    const CorrespondenceSet corrs = match_features(pair.source_features, pair.target_features, rc.mutual, workers);
    if (corrs.size() >= 3) {
      RansacOptions opts;
      opts.iterations = rc.iterations;
      opts.inlier_distance = rc.effective_inlier_distance();
      opts.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(p)});
      opts.workers = workers;
      try {
        const RansacResult fit = ransac_rigid(pair.source, pair.target, corrs, opts);
        outcome.estimated = true;
        outcome.inliers = static_cast<Index>(fit.inliers.size());
        outcome.error = registration_error(fit.transform, pair.truth);
        outcome.success = is_success(outcome.error, criterion.rotation_deg, criterion.translation_m);
      } catch (const EstimationError&) {
        outcome.estimated = false;
      }
    }
    if (outcome.estimated) {
      rot_sum += outcome.error.rotation_deg;
      trans_sum += outcome.error.translation_m;
    }
    successes += outcome.success ? 1 : 0;
    results.push_back(outcome);
  }

  const auto estimated = static_cast<Index>(
      std::count_if(results.begin(), results.end(), [](const PairOutcome& o) { return o.estimated; }));
  MetricReport report = make_report(config);
  report.metrics["criterion"] = criterion.name;
  report.metrics["rotation_threshold_deg"] = criterion.rotation_deg;
  report.metrics["translation_threshold_m"] = criterion.translation_m;
  report.metrics["pairs"] = pairs.size();
  report.metrics["estimated"] = estimated;
  report.metrics["success_rate"] =
      pairs.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(pairs.size());
  if (estimated > 0) {
    report.metrics["mean_rotation_error_deg"] = rot_sum / static_cast<double>(estimated);
    report.metrics["mean_translation_error_m"] = trans_sum / static_cast<double>(estimated);
  } else {
    report.metrics["mean_rotation_error_deg"] = nullptr;
    report.metrics["mean_translation_error_m"] = nullptr;
  }
  if (outcomes) *outcomes = std::move(results);
  return report;
}

void log_metrics(const MetricReport& report, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["timestamp"] = utc_timestamp();
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["task"] = to_string(report.task);
  j["metrics"] = report.metrics;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open log '" + path.string() + "' for appending");
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw IoError("failed writing log '" + path.string() + "'");
}

}  // namespace ptkit
