#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ptkit/config.hpp"

using namespace ptkit;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "no error";
}

}  // namespace

TEST_CASE("the shapenet part data block parses into the expected pipelines") {
  const std::string text = read_file(PTKIT_SOURCE_DIR "/configs/shapenet_part.yaml");
  const DataTransforms t = parse_data_transforms(text);
  CHECK(t.pre.describe() == std::vector<std::string>{"NormalizeScale", "GridSampling3D(0.02)"});
  CHECK(t.train.describe() == std::vector<std::string>{"FixedPoints(2048)", "RandomNoise(0.01, 0.05)"});
  CHECK(t.test.describe() == std::vector<std::string>{"FixedPoints(2048)"});
  const RunConfig cfg = parse_config(text);
  CHECK(cfg.task == Task::kSegmentation);
  CHECK(cfg.transforms.train.describe() == t.train.describe());
}

TEST_CASE("defaults and overrides") {
  const RunConfig d = parse_config("{}");
  CHECK(d.protocol.sphere_radius == 2.0);
  CHECK(d.protocol.sphere_count == 3000);
  CHECK(d.protocol.grid_spacing == 2.0);
  CHECK(d.registration.effective_inlier_distance() == 0.05);
  CHECK(d.pipeline.effective_capacity() == 2);

  const RunConfig c = parse_config(R"(
task: registration
seed: 99
protocol:
  neighbor_radii: [[0.1], [0.2]]
  level_cells: [0, 0.05]
registration:
  preset: custom
  rotation_threshold_deg: 2
  translation_threshold_m: 0.06
pipeline:
  workers: 4
)");
  CHECK(c.task == Task::kRegistration);
  CHECK(c.seed == 99);
  CHECK(c.protocol.neighbor_radii == std::vector<double>{0.1, 0.2});
  CHECK(c.protocol.level_cells == std::vector<double>{0.0, 0.05});
  CHECK(c.pipeline.effective_capacity() == 8);
}

TEST_CASE("config errors are specific") {
  CHECK(parse_error("task: clustering") == "unknown task 'clustering'");
  CHECK(parse_error("protocol: {sphere_radius: -1}") == "protocol.sphere_radius must be positive");
  CHECK(parse_error("protocol: {radius: 1}") == "protocol: unknown key 'radius'");
  CHECK(parse_error("protocol: {sphere_count: many}") == "protocol.sphere_count: invalid value 'many'");
  CHECK(parse_error("protocol: {neighbor_radii: [0.1, 0.2], level_cells: [0]}") ==
        "protocol.level_cells must have one entry per neighbor radius");
  CHECK(parse_error("registration: {preset: eth}") == "registration.preset must be 3dmatch, kitti or custom");
  CHECK(parse_error("registration: {preset: custom}").find("needs rotation_threshold_deg") != std::string::npos);
  CHECK(parse_error("data:\n  train_transforms:\n    - transform: Nope") ==
        "data.train_transforms[0] (Nope): unknown transform 'Nope'");
  CHECK(parse_error("- 1\n- 2") == "configuration must be a map");
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), IoError);
}

TEST_CASE("config hash is stable and ignores worker settings") {
  const std::string base = "seed: 3\nprotocol: {sphere_count: 100}\n";
  const RunConfig a = parse_config(base);
  const RunConfig b = parse_config(base + "pipeline: {workers: 8, queue_capacity: 3}\n");
  const RunConfig c = parse_config("seed: 4\nprotocol: {sphere_count: 100}\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
  CHECK(parse_config(base).hash() == a.hash());
  // Equivalent spellings of the same value hash the same.
  CHECK(parse_config("seed: 3\nprotocol: {sphere_count: 100, sphere_radius: 2.000}\n").canonical() == a.canonical());
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("every shipped config loads") {
  int loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(PTKIT_SOURCE_DIR "/configs")) {
    if (entry.path().extension() != ".yaml") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++loaded;
  }
  CHECK(loaded >= 4);
  CHECK(load_config(PTKIT_SOURCE_DIR "/configs/registration_kitti.yaml").registration.effective_inlier_distance() ==
        doctest::Approx(0.6));
}
