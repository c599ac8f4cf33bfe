#include "ptkit/core.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <string>

namespace ptkit {

void PointCloud::validate() const {
  const Index n = size();
  if (!positions.allFinite()) throw ParameterError("positions contain NaN or Inf");
  if (has_features() && features.rows() != n)
    throw ParameterError("features have " + std::to_string(features.rows()) + " rows, expected " +
                         std::to_string(n));
  if (has_labels() && static_cast<Index>(labels.size()) != n)
    throw ParameterError("labels have " + std::to_string(labels.size()) + " entries, expected " +
                         std::to_string(n));
  if (has_prob()) {
    if (prob.rows() != n)
      throw ParameterError("prob has " + std::to_string(prob.rows()) + " rows, expected " +
                           std::to_string(n));
    for (Index i = 0; i < n; ++i) {
      if ((prob.row(i).array() < 0.0).any() || std::abs(prob.row(i).sum() - 1.0) > 1e-6)
        throw ParameterError("prob row " + std::to_string(i) + " is not a distribution");
    }
  }
}

PointCloud PointCloud::subset(std::span<const Index> indices) const {
  const auto m = static_cast<Index>(indices.size());
  PointCloud out;
  out.positions.resize(m, 3);
  if (has_features()) out.features.resize(m, features.cols());
  if (has_prob()) out.prob.resize(m, prob.cols());
  if (has_labels()) out.labels.resize(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) {
    const Index i = indices[static_cast<std::size_t>(k)];
    if (i < 0 || i >= size()) throw ParameterError("subset index " + std::to_string(i) + " out of range");
    out.positions.row(k) = positions.row(i);
    if (has_features()) out.features.row(k) = features.row(i);
    if (has_prob()) out.prob.row(k) = prob.row(i);
    if (has_labels()) out.labels[static_cast<std::size_t>(k)] = labels[static_cast<std::size_t>(i)];
  }
  return out;
}

bool operator==(const PointCloud& a, const PointCloud& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.positions, b.positions) && same(a.features, b.features) && a.labels == b.labels &&
         same(a.prob, b.prob);
}

bool RigidTransform::is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  const Mat3 gram = r.transpose() * r;
  if (((gram - Mat3::Identity()).array().abs() > tol).any()) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_)) throw ParameterError("matrix is not a proper rotation");
  if (!translation_.allFinite()) throw ParameterError("translation is not finite");
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle_rad,
                                               const Vec3& translation) {
  if (axis.norm() == 0.0) throw ParameterError("rotation axis must be nonzero");
  const Mat3 r = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
  return {r, translation};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Positions apply_transform(const RigidTransform& t, const Positions& positions) {
  Positions out = positions * t.rotation().transpose();
  out.rowwise() += t.translation().transpose();
  return out;
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out = cloud;
  out.positions = apply_transform(t, cloud.positions);
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_,
          RigidTransform::Unchecked{}};
}

RigidTransform inverse(const RigidTransform& t) {
  const Mat3 rt = t.rotation_.transpose();
  return {rt, -(rt * t.translation_), RigidTransform::Unchecked{}};
}

AxisAlignedBox::AxisAlignedBox(const Vec3& lo, const Vec3& hi, Label cls, std::optional<double> s)
    : min_corner(lo), max_corner(hi), class_id(cls), score(s) {
  if ((lo.array() > hi.array()).any()) throw ParameterError("box min_corner exceeds max_corner");
  if (s && (*s < 0.0 || *s > 1.0)) throw ParameterError("box score outside [0, 1]");
}

double AxisAlignedBox::volume() const { return (max_corner - min_corner).prod(); }

}  // namespace ptkit
