#include "ptkit/config.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "yaml_util.hpp"

namespace ptkit {
namespace {

template <typename T>
T read_scalar(const YAML::Node& parent, const char* key, const std::string& where, T fallback) {
  const YAML::Node node = parent[key];
  if (!node || node.IsNull()) return fallback;
  if (!node.IsScalar()) throw ParseError(where + "." + key + ": expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(where + "." + key + ": invalid value '" + node.Scalar() + "'");
  }
}

template <typename T>
std::optional<T> read_optional(const YAML::Node& parent, const char* key, const std::string& where) {
  const YAML::Node node = parent[key];
  if (!node || node.IsNull()) return std::nullopt;
  return read_scalar<T>(parent, key, where, T{});
}

std::vector<double> read_list(const YAML::Node& parent, const char* key, const std::string& where,
                              std::vector<double> fallback) {
  const YAML::Node node = parent[key];
  if (!node || node.IsNull()) return fallback;
  std::vector<double> out;
  auto push = [&](const YAML::Node& v) {
    try {
      out.push_back(v.as<double>());
    } catch (const YAML::Exception&) {
      throw ParseError(where + "." + key + ": expected numbers");
    }
  };
  if (node.IsScalar()) {
    push(node);
  } else if (node.IsSequence()) {
    // Accept both [0.2, 0.4] and the nested [[0.2], [0.4]] form.
    for (const auto& item : node) {
      if (item.IsSequence()) {
        if (item.size() != 1) throw ParseError(where + "." + key + ": nested entries must hold one value");
        push(item[0]);
      } else {
        push(item);
      }
    }
  } else {
    throw ParseError(where + "." + key + ": expected a list");
  }
  return out;
}

void reject_unknown(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> known) {
  if (!node || !node.IsMap()) return;
  for (const auto& kv : node) {
    const std::string key = kv.first.Scalar();
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

YAML::Node child(const YAML::Node& root, const char* key) {
  YAML::Node n;
  if (root.IsMap() && root[key]) n.reset(root[key]);
  if (n && !n.IsNull() && !n.IsMap()) throw ParseError(std::string(key) + ": expected a map");
  return n;
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::kSegmentation: return "segmentation";
    case Task::kDetection: return "detection";
    case Task::kRegistration: return "registration";
  }
  return "unknown";
}

Task task_from_string(const std::string& name) {
  if (name == "segmentation") return Task::kSegmentation;
  if (name == "detection") return Task::kDetection;
  if (name == "registration") return Task::kRegistration;
  throw ParseError("unknown task '" + name + "'");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig parse_config(std::string_view yaml_text, const TransformRegistry& registry) {
  const YAML::Node root = detail::load_yaml(yaml_text);
  if (!root.IsMap()) throw ParseError("configuration must be a map");
  RunConfig cfg;

  const YAML::Node data = child(root, "data");
  std::string task = read_scalar<std::string>(root, "task", "", "");
  if (task.empty() && data) task = read_scalar<std::string>(data, "task", "data", "");
  cfg.task = task_from_string(task.empty() ? "segmentation" : task);
  cfg.seed = read_scalar<std::uint64_t>(root, "seed", "", 0);
  if (data) {
    cfg.transforms.pre = detail::pipeline_from_yaml(data["pre_transforms"], registry, "data.pre_transforms");
    cfg.transforms.train = detail::pipeline_from_yaml(data["train_transforms"], registry, "data.train_transforms");
    cfg.transforms.test = detail::pipeline_from_yaml(data["test_transforms"], registry, "data.test_transforms");
  }

  if (const YAML::Node p = child(root, "protocol")) {
    reject_unknown(p, "protocol", {"sphere_radius", "sphere_count", "grid_spacing", "voting_runs", "batch_size",
                                   "neighbor_radii", "level_cells", "max_neighbors"});
    ProtocolConfig& pc = cfg.protocol;
    pc.sphere_radius = read_scalar<double>(p, "sphere_radius", "protocol", pc.sphere_radius);
    pc.sphere_count = read_scalar<Index>(p, "sphere_count", "protocol", pc.sphere_count);
    pc.grid_spacing = read_scalar<double>(p, "grid_spacing", "protocol", pc.grid_spacing);
    pc.voting_runs = read_scalar<Index>(p, "voting_runs", "protocol", pc.voting_runs);
    pc.batch_size = read_scalar<Index>(p, "batch_size", "protocol", pc.batch_size);
    pc.neighbor_radii = read_list(p, "neighbor_radii", "protocol", pc.neighbor_radii);
    pc.level_cells = read_list(p, "level_cells", "protocol", std::vector<double>(pc.neighbor_radii.size(), 0.0));
    pc.max_neighbors = read_scalar<Index>(p, "max_neighbors", "protocol", pc.max_neighbors);
  } else {
    cfg.protocol.level_cells.assign(cfg.protocol.neighbor_radii.size(), 0.0);
  }

  if (const YAML::Node d = child(root, "detection")) {
    reject_unknown(d, "detection", {"iou_thresholds"});
    cfg.detection.iou_thresholds = read_list(d, "iou_thresholds", "detection", cfg.detection.iou_thresholds);
  }

  if (const YAML::Node r = child(root, "registration")) {
    reject_unknown(r, "registration", {"iterations", "voxel_size", "inlier_distance", "mutual", "preset",
                                       "rotation_threshold_deg", "translation_threshold_m"});
    RegistrationConfig& rc = cfg.registration;
    rc.iterations = read_scalar<Index>(r, "iterations", "registration", rc.iterations);
    rc.voxel_size = read_scalar<double>(r, "voxel_size", "registration", rc.voxel_size);
    rc.inlier_distance = read_optional<double>(r, "inlier_distance", "registration");
    rc.mutual = read_scalar<bool>(r, "mutual", "registration", rc.mutual);
    rc.preset = read_scalar<std::string>(r, "preset", "registration", rc.preset);
    rc.rotation_threshold_deg = read_optional<double>(r, "rotation_threshold_deg", "registration");
    rc.translation_threshold_m = read_optional<double>(r, "translation_threshold_m", "registration");
  }

  if (const YAML::Node pl = child(root, "pipeline")) {
    reject_unknown(pl, "pipeline", {"workers", "queue_capacity"});
    cfg.pipeline.workers = read_scalar<int>(pl, "workers", "pipeline", cfg.pipeline.workers);
    cfg.pipeline.queue_capacity = read_scalar<Index>(pl, "queue_capacity", "pipeline", cfg.pipeline.queue_capacity);
  }

  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ParseError(msg); };
  const ProtocolConfig& p = protocol;
  if (!(p.sphere_radius > 0.0)) fail("protocol.sphere_radius must be positive");
  if (p.sphere_count < 1) fail("protocol.sphere_count must be at least 1");
  if (!(p.grid_spacing > 0.0)) fail("protocol.grid_spacing must be positive");
  if (p.voting_runs < 1) fail("protocol.voting_runs must be at least 1");
  if (p.batch_size < 1) fail("protocol.batch_size must be at least 1");
  if (p.max_neighbors < 1) fail("protocol.max_neighbors must be at least 1");
  if (p.level_cells.size() != p.neighbor_radii.size())
    fail("protocol.level_cells must have one entry per neighbor radius");
  for (double r : p.neighbor_radii)
    if (!(r > 0.0)) fail("protocol.neighbor_radii must be positive");
  for (double c : p.level_cells)
    if (!(c >= 0.0)) fail("protocol.level_cells must be nonnegative");
  for (double t : detection.iou_thresholds)
    if (!(t >= 0.0 && t <= 1.0)) fail("detection.iou_thresholds must lie in [0, 1]");
  const RegistrationConfig& r = registration;
  if (r.iterations < 1) fail("registration.iterations must be at least 1");
  if (!(r.voxel_size > 0.0)) fail("registration.voxel_size must be positive");
  if (!(r.effective_inlier_distance() > 0.0)) fail("registration.inlier_distance must be positive");
  if (r.preset != "3dmatch" && r.preset != "kitti" && r.preset != "custom")
    fail("registration.preset must be 3dmatch, kitti or custom");
  if (r.preset == "custom" && (!r.rotation_threshold_deg || !r.translation_threshold_m))
    fail("registration.preset custom needs rotation_threshold_deg and translation_threshold_m");
  if (pipeline.workers < 1) fail("pipeline.workers must be at least 1");
  if (pipeline.queue_capacity < 0) fail("pipeline.queue_capacity must be nonnegative");
}

std::string RunConfig::canonical() const {
  nlohmann::ordered_json j;
  j["task"] = to_string(task);
  j["seed"] = seed;
  j["data"]["pre_transforms"] = transforms.pre.describe();
  j["data"]["train_transforms"] = transforms.train.describe();
  j["data"]["test_transforms"] = transforms.test.describe();
  j["protocol"] = {{"sphere_radius", protocol.sphere_radius}, {"sphere_count", protocol.sphere_count},
                   {"grid_spacing", protocol.grid_spacing},   {"voting_runs", protocol.voting_runs},
                   {"batch_size", protocol.batch_size},       {"neighbor_radii", protocol.neighbor_radii},
                   {"level_cells", protocol.level_cells},     {"max_neighbors", protocol.max_neighbors}};
  j["detection"] = {{"iou_thresholds", detection.iou_thresholds}};
  j["registration"] = {{"iterations", registration.iterations},
                       {"voxel_size", registration.voxel_size},
                       {"inlier_distance", registration.effective_inlier_distance()},
                       {"mutual", registration.mutual},
                       {"preset", registration.preset}};
  if (registration.rotation_threshold_deg) j["registration"]["rotation_threshold_deg"] = *registration.rotation_threshold_deg;
  if (registration.translation_threshold_m)
    j["registration"]["translation_threshold_m"] = *registration.translation_threshold_m;
  // Worker count and queue depth do not change results and stay out of the hash.
  return j.dump();
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

RunConfig load_config(const std::filesystem::path& path, const TransformRegistry& registry) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), registry);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace ptkit
