// Acceptance suite: one PASS/FAIL line per criterion. `--scaling` runs the
// multi-core throughput criterion instead, exiting 77 (skipped) on machines
// with fewer than 8 hardware threads.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "ptkit/config.hpp"
#include "ptkit/evaluate.hpp"
#include "ptkit/metrics.hpp"
#include "ptkit/prefetch.hpp"
#include "ptkit/protocol.hpp"
#include "ptkit/spatial.hpp"
#include "ptkit/synthetic.hpp"

using namespace ptkit;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and sizes.
constexpr int kKernelInstances = 100;
constexpr Index kKernelMaxPoints = 2000;
constexpr double kKernelBudgetSeconds = 60.0;
constexpr double kMiouExpected = 0.708333;
constexpr double kMiouTolerance = 1e-9;
constexpr double kBoxIouTolerance = 1e-12;
constexpr double kApTolerance = 1e-12;
constexpr int kRotationDraws = 1000;
constexpr double kRotationToleranceDeg = 1e-6;
constexpr int kBenchmarkPairs = 100;
constexpr double kBenchmarkRotationDeg = 2.0;
constexpr double kBenchmarkTranslationM = 0.06;
constexpr double kBenchmarkMinSuccess = 0.99;
constexpr double kBenchmarkBudgetSeconds = 120.0;
constexpr int kCoverageClouds = 50;
constexpr int kSamplerDraws = 100000;
constexpr double kSamplerFrequencyTolerance = 0.02;  // absolute, per class
constexpr double kSamplerMinPValue = 0.01;
constexpr int kVoteFixtures = 50;
constexpr Index kScalingPoints = 1000000;
constexpr double kScalingMinSpeedup = 3.0;
constexpr unsigned kScalingMinThreads = 8;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  failures += o.pass ? 0 : 1;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

AxisAlignedBox cube(double x, double side, Label cls, std::optional<double> score = {}) {
  return {Vec3(x, 0, 0), Vec3(x + side, side, side), cls, score};
}

std::vector<std::vector<Index>> rows_of(const NeighborTable& t) {
  std::vector<std::vector<Index>> out;
  for (Index q = 0; q < t.num_queries; ++q) {
    const auto n = t.neighbors(q);
    out.emplace_back(n.begin(), n.end());
  }
  return out;
}

Outcome kernel_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<Index> size(10, kKernelMaxPoints);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int mismatches[5] = {0, 0, 0, 0, 0};
  for (int inst = 0; inst < kKernelInstances; ++inst) {
    const Index n = size(rng);
    const bool quantize = inst % 3 == 0;
    const Positions support = oracle::random_points(n, 1.0, rng, quantize);
    const Positions query = oracle::random_points(std::min<Index>(n, 150), 1.1, rng, quantize);
    const double r = 0.05 + 0.4 * u01(rng);
    const Index max_k = 1 + static_cast<Index>(u01(rng) * 64);
    if (rows_of(radius_search(support, query, r, max_k, 1 + inst % 4)) != oracle::radius(support, query, r, max_k))
      ++mismatches[0];
    const Index k = 1 + static_cast<Index>(u01(rng) * 32);
    if (rows_of(knn_search(support, query, k, 1 + inst % 4)) != oracle::knn(support, query, k)) ++mismatches[1];
    for (Index q = 0; q < 5; ++q) {
      const Vec3 c = query.row(q).transpose();
      if (sphere_query(support, c, r) != oracle::ball(support, c, r)) {
        ++mismatches[2];
        break;
      }
    }
    const Index m = 1 + static_cast<Index>(u01(rng) * 63);
    const Index seed = static_cast<Index>(u01(rng) * static_cast<double>(n - 1));
    if (farthest_point_sampling(support, m, seed) != oracle::fps(support, m, seed)) ++mismatches[3];
    std::vector<Label> labels;
    for (Index i = 0; i < n; ++i) labels.push_back(static_cast<Label>(u01(rng) * 5) - 1);
    PointCloud cloud(support);
    cloud.labels = labels;
    const double cell = 0.02 + 0.3 * u01(rng);
    const GridSubsampleResult g = grid_subsample(cloud, cell);
    const oracle::GridResult o = oracle::grid(support, labels, cell);
    if (!(g.cloud.positions == o.positions) || g.cloud.labels != o.labels || g.mapping != o.mapping) ++mismatches[4];
  }
  const double secs = seconds_since(t0);
  const int total = mismatches[0] + mismatches[1] + mismatches[2] + mismatches[3] + mismatches[4];
  return {total == 0 && secs < kKernelBudgetSeconds,
          fmt("%d instances x 5 kernels, mismatches radius=%d knn=%d sphere=%d fps=%d grid=%d, %.1fs (budget %.0fs)",
              kKernelInstances, mismatches[0], mismatches[1], mismatches[2], mismatches[3], mismatches[4], secs,
              kKernelBudgetSeconds)};
}

Outcome metric_fixtures() {
  const auto scores = segmentation_scores(ConfusionMatrix::from_rows({{5, 1, 0}, {2, 3, 0}, {0, 0, 4}}));
  const bool miou_ok = std::abs(scores.miou - kMiouExpected) <= kMiouTolerance + 1e-6 / 3.0 &&
                       std::abs(scores.miou - 17.0 / 24.0) <= kMiouTolerance;
  const double box = box_iou_3d(cube(0, 1, 0), cube(0.5, 1, 0));
  const bool box_ok = std::abs(box - 1.0 / 3.0) <= kBoxIouTolerance;

  // Trivial fixture: every prediction matches.
  DetectionRecord trivial;
  trivial.ground_truth = {cube(0, 1, 0), cube(5, 2, 1)};
  trivial.predictions = {cube(0, 1, 0, 0.9), cube(5, 2, 1, 0.8)};
  const std::vector<double> t{0.25, 0.5};
  const auto st = evaluate_detection({trivial}, t);
  bool det_ok = std::abs(st[0].map - 1.0) <= kApTolerance && std::abs(st[1].map - 1.0) <= kApTolerance;

  // Adversarial fixture: duplicates, a cross-scene false positive ranked first,
  // a borderline IoU of 1/3 and an unmatched ground truth.
  DetectionRecord a, b;
  a.ground_truth = {cube(0, 1, 0), cube(3, 1, 0), cube(8, 1, 0)};
  a.predictions = {cube(0, 1, 0, 0.9), cube(0.1, 1, 0, 0.8), cube(3.5, 1, 0, 0.7)};
  b.ground_truth = {cube(10, 1, 0)};
  b.predictions = {cube(20, 1, 0, 0.95), cube(10, 1, 0, 0.6), cube(10, 1, 0, 0.6)};
  const auto sa = evaluate_detection({a, b}, t);
  const std::vector<std::pair<double, bool>> at25{{0.95, false}, {0.9, true}, {0.8, false},
                                                  {0.7, true},   {0.6, true}, {0.6, false}};
  const std::vector<std::pair<double, bool>> at50{{0.95, false}, {0.9, true}, {0.8, false},
                                                  {0.7, false},  {0.6, true}, {0.6, false}};
  det_ok = det_ok && std::abs(sa[0].map - oracle::exhaustive_ap(at25, 4)) <= kApTolerance &&
           std::abs(sa[1].map - oracle::exhaustive_ap(at50, 4)) <= kApTolerance;

  // Wrong class: geometrically perfect box, class 1 predicted for class 0 ground truth.
  DetectionRecord wrong;
  wrong.ground_truth = {cube(0, 1, 0)};
  wrong.predictions = {cube(0, 1, 1, 0.99)};
  const double wrong_map = evaluate_detection({wrong}, t)[0].map;
  DetectionRecord right = wrong;
  right.predictions[0].class_id = 0;
  const double right_map = evaluate_detection({right}, t)[0].map;
  const bool class_ok = wrong_map == 0.0 && right_map == 1.0;

  return {miou_ok && box_ok && det_ok && class_ok,
          fmt("mIoU=%.12f, box IoU=%.15f, det trivial mAP=%.3f/%.3f, adversarial mAP@.25=%.12f mAP@.5=%.12f, "
              "wrong-class mAP=%.1f (same box right class %.1f)",
              scores.miou, box, st[0].map, st[1].map, sa[0].map, sa[1].map, wrong_map, right_map)};
}

Outcome registration_math() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> angle(0.0, 180.0);
  double worst = 0.0;
  for (int i = 0; i < kRotationDraws; ++i) {
    Vec3 axis(g(rng), g(rng), g(rng));
    if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
    const double deg = angle(rng);
    const auto est = RigidTransform::from_axis_angle(axis, deg * std::numbers::pi / 180.0);
    worst = std::max(worst, std::abs(registration_error(est, RigidTransform::identity()).rotation_deg - deg));
  }
  // Crafted error lists: only pairs strictly under both thresholds count.
  const std::vector<RegistrationError> errs{{14.99, 0.299}, {15.0, 0.1}, {1.0, 0.3},  {0.5, 0.05},
                                            {1.99, 0.599},  {2.0, 0.1},  {1.0, 0.6},  {30.0, 2.0}};
  const double r3d = success_rate(errs, success_preset("3dmatch"));
  const double rkitti = success_rate(errs, success_preset("kitti"));
  const bool presets_ok = r3d == 3.0 / 8.0 && rkitti == 3.0 / 8.0;
  return {worst <= kRotationToleranceDeg && presets_ok,
          fmt("max |rotation error - theta| over %d draws = %.3g deg (tol %.0e); 3dmatch(15,0.3)=%.4f expect 0.375, "
              "kitti(2,0.6)=%.4f expect 0.375",
              kRotationDraws, worst, kRotationToleranceDeg, r3d, rkitti)};
}

Outcome registration_benchmark() {
  RunConfig cfg = parse_config(fmt(R"(
task: registration
seed: 2718
registration:
  preset: custom
  rotation_threshold_deg: %g
  translation_threshold_m: %g
)",
                                   kBenchmarkRotationDeg, kBenchmarkTranslationM));
  std::vector<RegistrationPair> pairs;
  PairOptions opts;  // 1000 points, 30% outliers, 0.01 m noise
  for (int p = 0; p < kBenchmarkPairs; ++p) {
    Rng rng = make_rng(cfg.seed, {0x70616972ULL, static_cast<std::uint64_t>(p)});
    pairs.push_back(synthetic_registration_pair(opts, rng));
  }
  const auto t0 = Clock::now();
  const MetricReport r = run_register(cfg, pairs, static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  const double secs = seconds_since(t0);
  const double rate = r.metrics["success_rate"].get<double>();
  return {rate >= kBenchmarkMinSuccess && secs < kBenchmarkBudgetSeconds,
          fmt("%d pairs (%lld pts, %.0f%% outliers, sigma %.2f m): success %.3f at (%g deg, %g m), mean errors "
              "%.4f deg / %.4f m, %.1fs (budget %.0fs)",
              kBenchmarkPairs, static_cast<long long>(opts.points), opts.outlier_fraction * 100, opts.noise_sigma,
              rate, kBenchmarkRotationDeg, kBenchmarkTranslationM, r.metrics["mean_rotation_error_deg"].get<double>(),
              r.metrics["mean_translation_error_m"].get<double>(), secs, kBenchmarkBudgetSeconds)};
}

Outcome protocol_suite() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<Index> size(100, 5000);
  std::uniform_real_distribution<double> ext(1.0, 12.0);
  int uncovered_clouds = 0;
  for (int c = 0; c < kCoverageClouds; ++c) {
    Positions p = oracle::random_points(size(rng), 1.0, rng);
    p.col(0) *= ext(rng);
    p.col(1) *= ext(rng);
    p.col(2) *= ext(rng) / 3.0;
    std::vector<char> covered(static_cast<std::size_t>(p.rows()), 0);
    for (const auto& r : inference_regions(p, kDefaultSphereRadius, kDefaultGridSpacing))
      for (Index m : r.members) covered[static_cast<std::size_t>(m)] = 1;
    if (std::find(covered.begin(), covered.end(), 0) != covered.end()) ++uncovered_clouds;
  }

  // Five classes with very uneven sizes; expected class frequency is sqrt(n_c) / sum sqrt(n_j).
  PointCloud cloud(oracle::random_points(10000, 5.0, rng));
  const std::vector<Index> sizes{6000, 2500, 1000, 400, 100};
  for (Label k = 0; k < 5; ++k) cloud.labels.insert(cloud.labels.end(), static_cast<std::size_t>(sizes[k]), k);
  const SphereSampler sampler(cloud, kDefaultSphereRadius);
  Rng draw_rng = make_rng(5);
  std::vector<double> hits(5, 0.0);
  for (int i = 0; i < kSamplerDraws; ++i)
    ++hits[static_cast<std::size_t>(cloud.labels[static_cast<std::size_t>(sampler.draw_center(draw_rng))])];
  double norm = 0.0;
  for (Index s : sizes) norm += std::sqrt(static_cast<double>(s));
  double worst_abs = 0.0, chi2 = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const double expected = std::sqrt(static_cast<double>(sizes[k])) / norm;
    worst_abs = std::max(worst_abs, std::abs(hits[k] / kSamplerDraws - expected));
    chi2 += std::pow(hits[k] - expected * kSamplerDraws, 2) / (expected * kSamplerDraws);
  }
  // Chi-square survival function with 4 degrees of freedom.
  const double p_value = std::exp(-chi2 / 2.0) * (1.0 + chi2 / 2.0);

  // Voting identical runs keeps every argmax.
  int changed = 0;
  for (int f = 0; f < kVoteFixtures; ++f) {
    const Index n = 200, c = 2 + f % 7;
    Matrix probs = Matrix::NullaryExpr(n, c, [&] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); });
    for (Index i = 0; i < n; ++i) probs.row(i) /= probs.row(i).sum();
    const std::vector<Label> before = argmax_rows(probs);
    for (int runs = 1; runs <= 5; ++runs)
      if (argmax_rows(vote_average(std::vector<Matrix>(static_cast<std::size_t>(runs), probs))) != before) ++changed;
  }
  return {uncovered_clouds == 0 && worst_abs <= kSamplerFrequencyTolerance && p_value > kSamplerMinPValue && changed == 0,
          fmt("coverage: %d/%d clouds fully covered (r=%g, spacing=%g); sampler worst frequency deviation %.4f at %d "
              "draws (tol %.2f), chi2 p=%.3f; vote identity changed argmax in %d/%d cases",
              kCoverageClouds - uncovered_clouds, kCoverageClouds, kDefaultSphereRadius, kDefaultGridSpacing,
              worst_abs, kSamplerDraws, kSamplerFrequencyTolerance, p_value, changed, kVoteFixtures * 5)};
}

Outcome pipeline_determinism() {
  Rng scene_rng = make_rng(31);
  SceneOptions so;
  so.points = 30000;
  so.classes = 6;
  so.extent = 12.0;
  const PointCloud cloud = synthetic_scene(so, scene_rng);
  const RunConfig cfg = parse_config(R"(
seed: 31
data:
  pre_transforms:
    - transform: GridSampling3D
      params: {size: 0.2}
  train_transforms:
    - transform: RandomRotateZ
    - transform: RandomNoise
protocol:
  sphere_count: 64
  neighbor_radii: [0.2, 0.4]
  level_cells: [0, 0.2]
  max_neighbors: 32
registration:
  iterations: 500
)");
  const InferencePlan plan = plan_inference(cfg, cloud);
  std::vector<PredictionSet> runs;
  for (int v = 0; v < 3; ++v) {
    PredictionSet p = one_hot_predictions(plan.regions, plan.sub_cloud.labels, so.classes);
    Rng noise = make_rng(cfg.seed, {static_cast<std::uint64_t>(v)});
    for (auto& region : p.regions)
      for (Index i = 0; i < region.probs.rows(); ++i) {
        region.probs.row(i) += Eigen::RowVectorXd::NullaryExpr(
            so.classes, [&] { return std::uniform_real_distribution<double>(0.0, 0.8)(noise); });
        region.probs.row(i) /= region.probs.row(i).sum();
      }
    runs.push_back(std::move(p));
  }
  std::vector<RegistrationPair> pairs;
  PairOptions po;
  po.points = 300;
  for (int p = 0; p < 3; ++p) {
    Rng prng = make_rng(cfg.seed, {0x70ULL, static_cast<std::uint64_t>(p)});
    pairs.push_back(synthetic_registration_pair(po, prng));
  }
  const BatchPreparer preparer(cfg, cloud);

  std::string reference;
  bool identical = true;
  for (int workers : {1, 4, 8}) {
    std::uint64_t digest = 0;
    for_each_batch(preparer, 0, workers, static_cast<std::size_t>(2 * workers),
                   [&](PreparedBatch&& b) { digest = mix64(digest ^ batch_digest(b)); });
    const std::string all = run_evaluate_segmentation(cfg, cloud, runs, workers).to_json() +
                            run_register(cfg, pairs, workers).to_json() + std::to_string(digest);
    if (reference.empty()) reference = all;
    identical = identical && all == reference;
  }
  return {identical, fmt("segmentation report, registration report and epoch batch digest compared bitwise for "
                         "workers 1, 4, 8: %s",
                         identical ? "identical" : "DIFFERENT")};
}

Outcome config_parity() {
  std::ifstream in(PTKIT_SOURCE_DIR "/configs/shapenet_part.yaml");
  std::stringstream ss;
  ss << in.rdbuf();
  const DataTransforms t = parse_data_transforms(ss.str());
  auto join = [](const TransformPipeline& p) {
    std::string s = "[";
    for (const auto& d : p.describe()) s += (s.size() > 1 ? ", " : "") + d;
    return s + "]";
  };
  const std::string got = join(t.pre) + " / " + join(t.train) + " / " + join(t.test);
  const std::string want =
      "[NormalizeScale, GridSampling3D(0.02)] / [FixedPoints(2048), RandomNoise(0.01, 0.05)] / [FixedPoints(2048)]";
  return {got == want, got};
}

int run_scaling() {
  const unsigned hw = std::thread::hardware_concurrency();
  Rng rng = make_rng(7);
  SceneOptions so;
  so.points = kScalingPoints;
  so.extent = 50.0;
  const PointCloud cloud = synthetic_scene(so, rng);
  const bool enough = hw >= kScalingMinThreads;
  // Without 8 hardware threads the measurement is informational only, on a
  // shortened epoch.
  const RunConfig cfg = parse_config(enough ? "seed: 7" : "seed: 7\nprotocol: {sphere_count: 160}\n");
  const BatchPreparer preparer(cfg, cloud);
  auto epoch_seconds = [&](int workers) {
    const auto t0 = Clock::now();
    Index points = 0;
    for_each_batch(preparer, 0, workers, static_cast<std::size_t>(2 * workers),
                   [&](PreparedBatch&& b) { points += b.batch.points.size(); });
    return seconds_since(t0);
  };
  const double t1 = epoch_seconds(1);
  const double t8 = epoch_seconds(8);
  const double speedup = t1 / t8;
  if (!enough) {
    std::printf("SKIP pipeline-scaling: needs >= %u hardware threads, this machine has %u; measured %.2fx "
                "(1 worker %.2fs, 8 workers %.2fs, %lld batches of a %lld-point cloud)\n",
                kScalingMinThreads, hw, speedup, t1, t8, static_cast<long long>(preparer.batches_per_epoch()),
                static_cast<long long>(kScalingPoints));
    return 77;
  }
  const bool pass = speedup >= kScalingMinSpeedup;
  std::printf("%s pipeline-scaling: %.2fx speedup 1 -> 8 workers (need %.1fx); 1 worker %.2fs, 8 workers %.2fs, "
              "%lld batches, %u hardware threads\n",
              pass ? "PASS" : "FAIL", speedup, kScalingMinSpeedup, t1, t8,
              static_cast<long long>(preparer.batches_per_epoch()), hw);
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1 && std::string(argv[1]) == "--scaling") return run_scaling();
  report("kernel-oracles", kernel_oracles);
  report("metric-fixtures", metric_fixtures);
  report("registration-math", registration_math);
  report("registration-benchmark", registration_benchmark);
  report("protocol-suite", protocol_suite);
  report("pipeline-determinism", pipeline_determinism);
  report("config-parity", config_parity);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
