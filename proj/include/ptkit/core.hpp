#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ptkit/errors.hpp"

namespace ptkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Label = std::int32_t;
using Index = std::int64_t;

/// Label value excluded from every metric and vote.
inline constexpr Label kIgnoreLabel = -1;

/// Points with optional per-point features, labels and class probabilities.
///
/// Optional arrays are "absent" when empty (zero columns for matrices, zero
/// length for labels). When present they have exactly `size()` rows.
struct PointCloud {
  Positions positions;
  Matrix features;
  std::vector<Label> labels;
  Matrix prob;

  PointCloud() = default;
  explicit PointCloud(Positions pos) : positions(std::move(pos)) {}

  Index size() const { return positions.rows(); }
  bool empty() const { return positions.rows() == 0; }
  bool has_features() const { return features.cols() > 0; }
  bool has_labels() const { return !labels.empty(); }
  bool has_prob() const { return prob.cols() > 0; }
  Index feature_dim() const { return features.cols(); }

  /// Throws ParameterError when a container invariant is violated.
  void validate() const;

  /// Gathers rows `indices` (repeats allowed) from every per-point array.
  PointCloud subset(std::span<const Index> indices) const;

  friend bool operator==(const PointCloud& a, const PointCloud& b);
};

/// Proper rigid motion x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  /// Throws ParameterError unless `rotation` is orthonormal with det +1 (1e-9).
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  /// Rotation by `angle_rad` about `axis` (normalized internally), then translation.
  static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad,
                                        const Vec3& translation = Vec3::Zero());

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  /// 4x4 homogeneous matrix.
  Eigen::Matrix4d matrix() const;

  static bool is_rotation(const Mat3& r, double tol = 1e-9);

 private:
  struct Unchecked {};
  RigidTransform(const Mat3& r, const Vec3& t, Unchecked) : rotation_(r), translation_(t) {}
  friend RigidTransform compose(const RigidTransform&, const RigidTransform&);
  friend RigidTransform inverse(const RigidTransform&);

  Mat3 rotation_;
  Vec3 translation_;
};

/// positions' = R * positions + t; other arrays carried through.
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);
Positions apply_transform(const RigidTransform& t, const Positions& positions);

/// Applies `b` first, then `a`.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

struct AxisAlignedBox {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();
  Label class_id = 0;
  std::optional<double> score;

  AxisAlignedBox() = default;
  AxisAlignedBox(const Vec3& lo, const Vec3& hi, Label cls, std::optional<double> s = std::nullopt);

  double volume() const;
};

}  // namespace ptkit
