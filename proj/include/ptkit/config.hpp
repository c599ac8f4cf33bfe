#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptkit/core.hpp"
#include "ptkit/protocol.hpp"
#include "ptkit/transforms.hpp"

namespace ptkit {

enum class Task { kSegmentation, kDetection, kRegistration };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

/// Sampling and batching protocol (the `protocol:` block).
struct ProtocolConfig {
  double sphere_radius = kDefaultSphereRadius;
  Index sphere_count = kDefaultSphereCount;
  double grid_spacing = kDefaultGridSpacing;
  Index voting_runs = 1;
  Index batch_size = 8;
  /// Neighbor radius per level; level l > 0 is first grid-subsampled at level_cells[l].
  std::vector<double> neighbor_radii{0.1};
  std::vector<double> level_cells{0.0};
  Index max_neighbors = 64;
};

struct DetectionConfig {
  std::vector<double> iou_thresholds{0.25, 0.5};
};

struct RegistrationConfig {
  Index iterations = 10000;
  double voxel_size = 0.025;
  /// Defaults to 2 x voxel_size when not given.
  std::optional<double> inlier_distance;
  bool mutual = false;
  std::string preset = "3dmatch";
  std::optional<double> rotation_threshold_deg;
  std::optional<double> translation_threshold_m;

  double effective_inlier_distance() const { return inlier_distance.value_or(2.0 * voxel_size); }
};

struct PipelineConfig {
  int workers = 1;
  /// 0 means 2 x workers.
  Index queue_capacity = 0;

  Index effective_capacity() const { return queue_capacity > 0 ? queue_capacity : 2 * std::max(1, workers); }
};

struct RunConfig {
  Task task = Task::kSegmentation;
  std::uint64_t seed = 0;
  DataTransforms transforms;
  ProtocolConfig protocol;
  DetectionConfig detection;
  RegistrationConfig registration;
  PipelineConfig pipeline;

  /// Stable text form of every parsed value; equal configs give equal text.
  std::string canonical() const;
  /// 16 hex digits of the FNV-1a hash of canonical().
  std::string hash() const;
  /// Throws ParseError when values are out of range.
  void validate() const;
};

RunConfig parse_config(std::string_view yaml_text,
                       const TransformRegistry& registry = TransformRegistry::builtin());
RunConfig load_config(const std::filesystem::path& path,
                      const TransformRegistry& registry = TransformRegistry::builtin());

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace ptkit
