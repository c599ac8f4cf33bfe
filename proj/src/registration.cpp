#include "ptkit/registration.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <mutex>
#include <string>

#include "ptkit/parallel.hpp"
#include "ptkit/random.hpp"

namespace ptkit {
namespace {

// Index of the row of `pool` nearest to row `r` of `rows` (ties to the lower index).
Index nearest_row(const Matrix& rows, Index r, const Matrix& pool) {
  Index best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < pool.rows(); ++j) {
    double d2 = 0.0;
    for (Index c = 0; c < rows.cols(); ++c) {
      const double diff = rows(r, c) - pool(j, c);
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  return best;
}

std::vector<Index> nearest_rows(const Matrix& rows, const Matrix& pool, int workers) {
  std::vector<Index> out(static_cast<std::size_t>(rows.rows()));
  parallel_for(rows.rows(), workers, [&](Index begin, Index end) {
    for (Index r = begin; r < end; ++r) out[static_cast<std::size_t>(r)] = nearest_row(rows, r, pool);
  });
  return out;
}

}  // namespace

CorrespondenceSet match_features(const Matrix& feat_a, const Matrix& feat_b, bool mutual, int workers) {
  if (feat_a.rows() == 0 || feat_b.rows() == 0) throw ParameterError("match_features needs nonempty inputs");
  if (feat_a.cols() != feat_b.cols())
    throw ParameterError("feature dimensions differ: " + std::to_string(feat_a.cols()) + " vs " +
                         std::to_string(feat_b.cols()));
  const std::vector<Index> a_to_b = nearest_rows(feat_a, feat_b, workers);
  std::vector<Index> b_to_a;
  if (mutual) b_to_a = nearest_rows(feat_b, feat_a, workers);

  CorrespondenceSet out;
  for (Index i = 0; i < feat_a.rows(); ++i) {
    const Index j = a_to_b[static_cast<std::size_t>(i)];
    if (mutual && b_to_a[static_cast<std::size_t>(j)] != i) continue;
    out.pairs.push_back({i, j});
  }
  return out;
}

RigidTransform fit_rigid(const Positions& a, const Positions& b, std::span<const double> weights) {
  const Index k = a.rows();
  if (b.rows() != k) throw ParameterError("fit_rigid needs the same number of points on both sides");
  if (k < 3) throw ParameterError("fit_rigid needs at least 3 point pairs");
  if (!weights.empty() && static_cast<Index>(weights.size()) != k)
    throw ParameterError("fit_rigid needs one weight per pair");

  Eigen::VectorXd w = weights.empty() ? Eigen::VectorXd::Ones(k)
                                      : Eigen::Map<const Eigen::VectorXd>(weights.data(), k).eval();
  if ((w.array() < 0.0).any()) throw ParameterError("fit_rigid weights must be nonnegative");
  const double total = w.sum();
  if (!(total > 0.0)) throw EstimationError("fit_rigid: weights sum to zero");

  const Eigen::RowVector3d ca = (w.transpose() * a) / total;
  const Eigen::RowVector3d cb = (w.transpose() * b) / total;
  const Positions a0 = a.rowwise() - ca;
  const Positions b0 = b.rowwise() - cb;
  const Mat3 cov = a0.transpose() * w.asDiagonal() * b0;

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s[0] > 0.0) || s[1] <= 1e-10 * s[0])
    throw EstimationError("fit_rigid: degenerate configuration (collinear or coincident points)");

  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = v * d * u.transpose();
  const Vec3 t = cb.transpose() - r * ca.transpose();
  return {r, t};
}

RansacResult ransac_rigid(const Positions& cloud_a, const Positions& cloud_b, const CorrespondenceSet& corrs,
                          const RansacOptions& options) {
  const auto k = static_cast<Index>(corrs.size());
  if (k < 3) throw ParameterError("ransac_rigid needs at least 3 correspondences");
  if (options.iterations < 1) throw ParameterError("ransac_rigid needs at least one iteration");
  if (!(options.inlier_distance > 0.0)) throw ParameterError("inlier distance must be positive");
  if (!corrs.weights.empty() && static_cast<Index>(corrs.weights.size()) != k)
    throw ParameterError("correspondence weights must match the pair count");

  Positions src(k, 3), dst(k, 3);
  for (Index i = 0; i < k; ++i) {
    const Correspondence& c = corrs.pairs[static_cast<std::size_t>(i)];
    if (c.source < 0 || c.source >= cloud_a.rows() || c.target < 0 || c.target >= cloud_b.rows())
      throw ParameterError("correspondence " + std::to_string(i) + " indexes outside the clouds");
    src.row(i) = cloud_a.row(c.source);
    dst.row(i) = cloud_b.row(c.target);
  }
  const double thresh2 = options.inlier_distance * options.inlier_distance;
  auto count_inliers = [&](const RigidTransform& model) {
    const Mat3& r = model.rotation();
    const Vec3& t = model.translation();
    Index n = 0;
    for (Index i = 0; i < k; ++i) {
      const Vec3 diff = r * src.row(i).transpose() + t - dst.row(i).transpose();
      n += diff.squaredNorm() <= thresh2 ? 1 : 0;
    }
    return n;
  };

  struct Best {
    Index inliers = -1;
    Index iteration = -1;
    RigidTransform model;
  };
  // Winner: most inliers, then earliest iteration; independent of chunking.
  auto better = [](const Best& x, const Best& y) {
    return x.inliers > y.inliers || (x.inliers == y.inliers && x.iteration >= 0 && x.iteration < y.iteration);
  };
  Best winner;
  std::mutex winner_mutex;
  parallel_for(options.iterations, options.workers, [&](Index begin, Index end) {
    Best best;
    Positions sa(3, 3), sb(3, 3);
    for (Index it = begin; it < end; ++it) {
      Rng rng = make_rng(options.seed, {static_cast<std::uint64_t>(it)});
      std::uniform_int_distribution<Index> pick(0, k - 1);
      Index s0 = pick(rng), s1, s2;
      do s1 = pick(rng);
      while (s1 == s0);
      do s2 = pick(rng);
      while (s2 == s0 || s2 == s1);
      for (int r = 0; r < 3; ++r) {
        const Index s = r == 0 ? s0 : (r == 1 ? s1 : s2);
        sa.row(r) = src.row(s);
        sb.row(r) = dst.row(s);
      }
      RigidTransform model;
      try {
        model = fit_rigid(sa, sb);
      } catch (const EstimationError&) {
        continue;
      }
      const Index n = count_inliers(model);
      if (n > best.inliers) best = {n, it, model};
    }
    const std::lock_guard lock(winner_mutex);
    if (better(best, winner)) winner = best;
  });

  if (winner.inliers < 3)
    throw EstimationError("ransac_rigid: no hypothesis reached 3 inliers in " + std::to_string(options.iterations) +
                          " iterations");

  RansacResult result;
  result.best_iteration = winner.iteration;
  Positions in_a(winner.inliers, 3), in_b(winner.inliers, 3);
  std::vector<double> in_w;
  {
    const Mat3& r = winner.model.rotation();
    const Vec3& t = winner.model.translation();
    for (Index i = 0; i < k; ++i) {
      const Vec3 diff = r * src.row(i).transpose() + t - dst.row(i).transpose();
      if (diff.squaredNorm() > thresh2) continue;
      const auto row = static_cast<Index>(result.inliers.size());
      in_a.row(row) = src.row(i);
      in_b.row(row) = dst.row(i);
      if (!corrs.weights.empty()) in_w.push_back(corrs.weights[static_cast<std::size_t>(i)]);
      result.inliers.push_back(i);
    }
  }
  try {
    result.transform = fit_rigid(in_a, in_b, in_w);
  } catch (const EstimationError&) {
    result.transform = winner.model;
  }
  return result;
}

}  // namespace ptkit
