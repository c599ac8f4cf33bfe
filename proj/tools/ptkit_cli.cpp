#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "ptkit/config.hpp"
#include "ptkit/evaluate.hpp"
#include "ptkit/io.hpp"
#include "ptkit/prefetch.hpp"
#include "ptkit/synthetic.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string log_path;
};

ptkit::RunConfig load(const GlobalOptions& g) {
  ptkit::RunConfig cfg = g.config_path.empty() ? ptkit::parse_config("{}") : ptkit::load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.pipeline.workers = *g.workers;
  cfg.validate();
  return cfg;
}

void emit(const ptkit::MetricReport& report, const GlobalOptions& g) {
  std::cout << report.to_json() << '\n';
  if (!g.log_path.empty()) ptkit::log_metrics(report, g.log_path);
}

// 12 (3x4) or 16 (4x4) whitespace-separated numbers, row-major.
ptkit::RigidTransform read_transform(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ptkit::IoError("cannot open transform '" + path + "'");
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  if (!in.eof()) throw ptkit::ParseError(path + ": expected numbers");
  if (v.size() != 12 && v.size() != 16) throw ptkit::ParseError(path + ": expected 12 or 16 numbers");
  ptkit::Mat3 r;
  ptkit::Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = v[static_cast<std::size_t>(4 * i + j)];
    t(i) = v[static_cast<std::size_t>(4 * i + 3)];
  }
  return ptkit::RigidTransform(r, t);
}

int cmd_preprocess(const GlobalOptions& g, const std::string& input, const std::string& output) {
  const ptkit::RunConfig cfg = load(g);
  const ptkit::PointCloud cloud = ptkit::read_cloud(input);
  ptkit::Rng rng = ptkit::make_rng(cfg.seed);
  const ptkit::PointCloud out = cfg.transforms.pre.apply(cloud, rng);
  ptkit::write_cloud(out, output);
  std::cout << "preprocess: " << cloud.size() << " -> " << out.size() << " points\n";
  return 0;
}

int cmd_sample(const GlobalOptions& g, const std::string& input, bool inference, const std::string& output,
               ptkit::Index classes, ptkit::Index count) {
  const ptkit::RunConfig cfg = load(g);
  const ptkit::PointCloud cloud = ptkit::read_cloud(input);
  if (inference) {
    const ptkit::InferencePlan plan = ptkit::plan_inference(cfg, cloud);
    std::cout << "inference: " << plan.regions.size() << " regions over " << plan.sub_cloud.size() << " points\n";
    if (!output.empty()) {
      if (classes < 1) throw ptkit::ParameterError("--classes is required with --output");
      ptkit::PredictionSet tmpl;
      tmpl.num_points = plan.sub_cloud.size();
      tmpl.num_classes = classes;
      for (const auto& region : plan.regions) {
        const auto m = static_cast<ptkit::Index>(region.members.size());
        tmpl.regions.push_back({region.members, ptkit::Matrix::Constant(m, classes, 1.0 / static_cast<double>(classes))});
      }
      ptkit::write_predictions(tmpl, output);
      std::cout << "wrote prediction template " << output << '\n';
    }
    return 0;
  }
  ptkit::Rng rng = ptkit::make_rng(cfg.seed);
  const ptkit::Index n = count > 0 ? count : cfg.protocol.sphere_count;
  const auto spheres = ptkit::sample_training_spheres(cloud, cfg.protocol.sphere_radius, n, rng);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : spheres)
    out.push_back({{"center", {s.center.x(), s.center.y(), s.center.z()}}, {"points", s.members.size()}});
  if (output.empty()) {
    std::cout << out.dump() << '\n';
  } else {
    std::ofstream(output) << out.dump() << '\n';
    std::cout << "wrote " << spheres.size() << " spheres to " << output << '\n';
  }
  return 0;
}

int cmd_evaluate_seg(const GlobalOptions& g, const std::string& cloud_path, const std::vector<std::string>& preds) {
  ptkit::RunConfig cfg = load(g);
  cfg.task = ptkit::Task::kSegmentation;
  const ptkit::PointCloud cloud = ptkit::read_cloud(cloud_path);
  const ptkit::Index sub_points = ptkit::plan_inference(cfg, cloud).sub_cloud.size();
  std::vector<ptkit::PredictionSet> runs;
  for (const auto& p : preds) runs.push_back(ptkit::read_predictions(p, sub_points));
  const ptkit::MetricReport report = ptkit::run_evaluate_segmentation(cfg, cloud, runs, cfg.pipeline.workers);
  if (const auto uncovered = report.metrics["uncovered_points"].get<ptkit::Index>(); uncovered > 0)
    std::cerr << "warning: " << uncovered << " subsampled points fall in no inference region and were scored "
              << "from uniform probabilities; use grid_spacing <= 1.15 x sphere_radius\n";
  emit(report, g);
  return 0;
}

int cmd_evaluate_det(const GlobalOptions& g, const std::string& records) {
  ptkit::RunConfig cfg = load(g);
  cfg.task = ptkit::Task::kDetection;
  emit(ptkit::run_evaluate_detection(cfg, ptkit::read_detection_records(records)), g);
  return 0;
}

struct RegisterArgs {
  std::string source, target, source_features, target_features, truth;
  ptkit::Index synthetic = 0;
};

int cmd_register(const GlobalOptions& g, const RegisterArgs& a) {
  ptkit::RunConfig cfg = load(g);
  cfg.task = ptkit::Task::kRegistration;
  std::vector<ptkit::RegistrationPair> pairs;
  if (a.synthetic > 0) {
    for (ptkit::Index p = 0; p < a.synthetic; ++p) {
      ptkit::Rng rng = ptkit::make_rng(cfg.seed, {0x73796e7468ULL, static_cast<std::uint64_t>(p)});
      pairs.push_back(ptkit::synthetic_registration_pair({}, rng));
    }
  } else {
    if (a.source.empty() || a.target.empty() || a.source_features.empty() || a.target_features.empty() ||
        a.truth.empty())
      throw ptkit::ParameterError("register needs --source, --target, --source-features, --target-features and "
                                  "--truth, or --synthetic N");
    ptkit::RegistrationPair pair;
    pair.source = ptkit::read_cloud(a.source).positions;
    pair.target = ptkit::read_cloud(a.target).positions;
    pair.source_features = ptkit::read_features(std::filesystem::path(a.source_features));
    pair.target_features = ptkit::read_features(std::filesystem::path(a.target_features));
    pair.truth = read_transform(a.truth);
    pairs.push_back(std::move(pair));
  }
  emit(ptkit::run_register(cfg, pairs, cfg.pipeline.workers), g);
  return 0;
}

int cmd_bench(const GlobalOptions& g, const std::string& cloud_path, ptkit::Index synthetic_points,
              ptkit::Index epoch) {
  const ptkit::RunConfig cfg = load(g);
  ptkit::PointCloud cloud;
  if (!cloud_path.empty()) {
    cloud = ptkit::read_cloud(cloud_path);
  } else {
    ptkit::Rng rng = ptkit::make_rng(cfg.seed, {0x7363656e65ULL});
    ptkit::SceneOptions opts;
    opts.points = synthetic_points;
    cloud = ptkit::synthetic_scene(opts, rng);
  }
  const ptkit::BatchPreparer preparer(cfg, cloud);
  const auto capacity = static_cast<std::size_t>(cfg.pipeline.effective_capacity());
  std::uint64_t digest = 0;
  ptkit::Index batches = 0, points = 0;
  const auto start = std::chrono::steady_clock::now();
  ptkit::for_each_batch(preparer, epoch, cfg.pipeline.workers, capacity, [&](ptkit::PreparedBatch&& b) {
    digest = ptkit::mix64(digest ^ ptkit::batch_digest(b));
    points += b.batch.points.size();
    ++batches;
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::ordered_json j;
  j["workers"] = cfg.pipeline.workers;
  j["queue_capacity"] = capacity;
  j["cloud_points"] = cloud.size();
  j["batches"] = batches;
  j["batch_points"] = points;
  j["seconds"] = secs;
  j["kpoints_per_second"] = secs > 0 ? static_cast<double>(points) / secs / 1000.0 : 0.0;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(digest));
  j["epoch_digest"] = hex;
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ptkit: point-cloud data engine and evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "YAML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log", g.log_path, "Append a JSON-lines metric record to this file");

  std::string input, output;
  auto* pre = app.add_subcommand("preprocess", "Apply pre_transforms to a cloud");
  pre->add_option("input", input, "Input cloud (.ply or TP3C)")->required()->check(CLI::ExistingFile);
  pre->add_option("output", output, "Output cloud")->required();

  bool inference = false;
  ptkit::Index classes = 0, count = 0;
  auto* sample = app.add_subcommand("sample", "Draw training spheres or list inference regions");
  sample->add_option("input", input, "Input cloud")->required()->check(CLI::ExistingFile);
  sample->add_flag("--inference", inference, "Inference grid instead of training spheres");
  sample->add_option("--output,-o", output, "Sphere JSON, or TP3P prediction template with --inference");
  sample->add_option("--classes", classes, "Class count for the prediction template");
  sample->add_option("--count", count, "Training spheres to draw (default: protocol.sphere_count)");

  std::string cloud_path;
  std::vector<std::string> preds;
  auto* seg = app.add_subcommand("evaluate-seg", "Score region predictions against a labeled cloud");
  seg->add_option("cloud", cloud_path, "Labeled full-resolution cloud")->required()->check(CLI::ExistingFile);
  seg->add_option("predictions", preds, "TP3P files, one per voting run")->required()->check(CLI::ExistingFile);

  std::string records;
  auto* det = app.add_subcommand("evaluate-det", "mAP of box predictions");
  det->add_option("records", records, "JSON detection records")->required()->check(CLI::ExistingFile);

  RegisterArgs reg;
  auto* regc = app.add_subcommand("register", "Feature matching + RANSAC on cloud pairs");
  regc->add_option("--source", reg.source, "Source cloud");
  regc->add_option("--target", reg.target, "Target cloud");
  regc->add_option("--source-features", reg.source_features, "TP3F descriptors of the source");
  regc->add_option("--target-features", reg.target_features, "TP3F descriptors of the target");
  regc->add_option("--truth", reg.truth, "Ground-truth source-to-target transform (3x4 or 4x4 text)");
  regc->add_option("--synthetic", reg.synthetic, "Run N synthetic pairs instead");

  ptkit::Index synthetic_points = 1000000, epoch = 0;
  auto* bench = app.add_subcommand("bench", "Time one epoch of batch preparation");
  bench->add_option("--cloud", cloud_path, "Labeled cloud (default: synthetic scene)");
  bench->add_option("--points", synthetic_points, "Synthetic scene size");
  bench->add_option("--epoch", epoch, "Epoch number");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) return cmd_preprocess(g, input, output);
    if (*sample) return cmd_sample(g, input, inference, output, classes, count);
    if (*seg) return cmd_evaluate_seg(g, cloud_path, preds);
    if (*det) return cmd_evaluate_det(g, records);
    if (*regc) return cmd_register(g, reg);
    if (*bench) return cmd_bench(g, cloud_path, synthetic_points, epoch);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
