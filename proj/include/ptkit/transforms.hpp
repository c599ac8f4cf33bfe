#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ptkit/core.hpp"
#include "ptkit/random.hpp"

namespace ptkit {

/// Centers positions at their centroid and scales them into the unit ball.
PointCloud normalize_scale(const PointCloud& cloud);

/// Row indices for drawing exactly `n` of `size` points: a prefix of a random
/// permutation when size >= n, otherwise concatenated permutations (every point
/// appears at least once).
std::vector<Index> fixed_point_indices(Index size, Index n, Rng& rng);
PointCloud fixed_points(const PointCloud& cloud, Index n, Rng& rng);

/// Per-coordinate Gaussian(0, sigma) jitter clamped to [-clip, clip].
PointCloud random_noise(const PointCloud& cloud, double sigma, double clip, Rng& rng);

/// Rotation by `angle_rad` about +z.
PointCloud rotate_z(const PointCloud& cloud, double angle_rad);
/// Rotation about +z by an angle drawn uniformly from [0, 2*pi).
PointCloud random_rotate_z(const PointCloud& cloud, Rng& rng);
double draw_rotation_angle(Rng& rng);

class Transform {
 public:
  virtual ~Transform() = default;
  virtual std::string name() const = 0;
  /// Name plus parameters, e.g. "FixedPoints(2048)".
  virtual std::string describe() const = 0;
  virtual PointCloud apply(const PointCloud& cloud, Rng& rng) const = 0;
  /// False when output positions live in a different frame than the input.
  virtual bool preserves_frame() const { return true; }
};

using TransformPtr = std::shared_ptr<const Transform>;

class NormalizeScale final : public Transform {
 public:
  std::string name() const override { return "NormalizeScale"; }
  std::string describe() const override { return "NormalizeScale"; }
  PointCloud apply(const PointCloud& cloud, Rng&) const override { return normalize_scale(cloud); }
  bool preserves_frame() const override { return false; }
};

class GridSampling3D final : public Transform {
 public:
  explicit GridSampling3D(double size);
  double size() const { return size_; }
  std::string name() const override { return "GridSampling3D"; }
  std::string describe() const override;
  PointCloud apply(const PointCloud& cloud, Rng&) const override;

 private:
  double size_;
};

class FixedPoints final : public Transform {
 public:
  explicit FixedPoints(Index num);
  Index num() const { return num_; }
  std::string name() const override { return "FixedPoints"; }
  std::string describe() const override;
  PointCloud apply(const PointCloud& cloud, Rng& rng) const override { return fixed_points(cloud, num_, rng); }

 private:
  Index num_;
};

class RandomNoise final : public Transform {
 public:
  RandomNoise(double sigma, double clip);
  double sigma() const { return sigma_; }
  double clip() const { return clip_; }
  std::string name() const override { return "RandomNoise"; }
  std::string describe() const override;
  PointCloud apply(const PointCloud& cloud, Rng& rng) const override {
    return random_noise(cloud, sigma_, clip_, rng);
  }

 private:
  double sigma_;
  double clip_;
};

class RandomRotateZ final : public Transform {
 public:
  std::string name() const override { return "RandomRotateZ"; }
  std::string describe() const override { return "RandomRotateZ"; }
  PointCloud apply(const PointCloud& cloud, Rng& rng) const override { return random_rotate_z(cloud, rng); }
  bool preserves_frame() const override { return false; }
};

/// Ordered, immutable list of transforms.
class TransformPipeline {
 public:
  TransformPipeline() = default;
  explicit TransformPipeline(std::vector<TransformPtr> steps) : steps_(std::move(steps)) {}

  PointCloud apply(const PointCloud& cloud, Rng& rng) const;
  std::vector<std::string> describe() const;

  bool empty() const { return steps_.empty(); }
  std::size_t size() const { return steps_.size(); }
  const Transform& operator[](std::size_t i) const { return *steps_[i]; }
  bool preserves_frame() const;

 private:
  std::vector<TransformPtr> steps_;
};

/// Parameters of one configuration entry: `params:` map and/or `lparams:` list.
struct TransformParams {
  std::map<std::string, double> named;
  std::vector<double> positional;
};

using TransformFactory = std::function<TransformPtr(const TransformParams&)>;

class TransformRegistry {
 public:
  /// NormalizeScale, GridSampling3D, FixedPoints, RandomNoise, RandomRotateZ.
  static const TransformRegistry& builtin();

  void add(const std::string& name, TransformFactory factory);
  bool contains(const std::string& name) const { return factories_.count(name) != 0; }
  /// Throws ParseError for unknown names or bad parameters.
  TransformPtr make(const std::string& name, const TransformParams& params) const;

 private:
  std::map<std::string, TransformFactory> factories_;
};

/// Parses a YAML list of `- transform: Name` entries.
TransformPipeline parse_pipeline(std::string_view yaml_text,
                                 const TransformRegistry& registry = TransformRegistry::builtin());

struct DataTransforms {
  TransformPipeline pre;
  TransformPipeline train;
  TransformPipeline test;
};

/// Reads `pre_transforms`, `train_transforms` and `test_transforms` from the
/// `data:` block (or from the top level when there is no `data:` key).
DataTransforms parse_data_transforms(std::string_view yaml_text,
                                     const TransformRegistry& registry = TransformRegistry::builtin());

}  // namespace ptkit
