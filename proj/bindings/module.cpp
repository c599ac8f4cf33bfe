#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "ptkit/collate.hpp"
#include "ptkit/errors.hpp"
#include "ptkit/evaluate.hpp"
#include "ptkit/metrics.hpp"
#include "ptkit/protocol.hpp"
#include "ptkit/registration.hpp"
#include "ptkit/spatial.hpp"

namespace py = pybind11;
using namespace ptkit;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style>;

std::string shape_of(const py::array& a) {
  std::string s = "(";
  for (py::ssize_t d = 0; d < a.ndim(); ++d) s += (d ? ", " : "") + std::to_string(a.shape(d));
  return s + (a.ndim() == 1 ? ",)" : ")");
}

void require_float64(const py::array& a, const char* name) {
  if (!py::isinstance<py::array_t<double>>(a))
    throw py::type_error(std::string(name) + ": expected a float64 array, got dtype " +
                         py::str(a.dtype()).cast<std::string>());
}

Positions to_positions(const py::array& a, const char* name) {
  require_float64(a, name);
  if (a.ndim() != 2 || a.shape(1) != 3)
    throw py::value_error(std::string(name) + ": expected shape (N, 3), got " + shape_of(a));
  const auto c = DoubleArray::ensure(a);
  return Eigen::Map<const Positions>(c.data(), c.shape(0), 3);
}

Matrix to_matrix(const py::array& a, const char* name) {
  require_float64(a, name);
  if (a.ndim() != 2) throw py::value_error(std::string(name) + ": expected a 2-d array, got " + shape_of(a));
  const auto c = DoubleArray::ensure(a);
  return Eigen::Map<const Matrix>(c.data(), c.shape(0), c.shape(1));
}

Vec3 to_vec3(const py::array& a, const char* name) {
  require_float64(a, name);
  if (a.ndim() != 1 || a.shape(0) != 3)
    throw py::value_error(std::string(name) + ": expected shape (3,), got " + shape_of(a));
  const auto c = DoubleArray::ensure(a);
  return {c.data()[0], c.data()[1], c.data()[2]};
}

std::vector<Label> to_labels(const py::array& a, const char* name) {
  if (a.dtype().kind() != 'i' && a.dtype().kind() != 'u')
    throw py::type_error(std::string(name) + ": expected an integer array, got dtype " +
                         py::str(a.dtype()).cast<std::string>());
  if (a.ndim() != 1) throw py::value_error(std::string(name) + ": expected a 1-d array, got " + shape_of(a));
  const auto c = py::array_t<Label, py::array::c_style | py::array::forcecast>::ensure(a);
  return {c.data(), c.data() + c.shape(0)};
}

std::vector<Index> to_indices(const py::array& a, const char* name) {
  const std::vector<Label> l = to_labels(a, name);
  return {l.begin(), l.end()};
}

/// Hands a vector's buffer to numpy without copying.
template <typename T>
py::array_t<T> adopt(std::vector<T>&& v, std::vector<py::ssize_t> shape) {
  auto* owner = new std::vector<T>(std::move(v));
  py::capsule free_when_done(owner, [](void* p) { delete static_cast<std::vector<T>*>(p); });
  return py::array_t<T>(shape, owner->data(), free_when_done);
}

py::array_t<double> adopt(Matrix&& m) {
  auto* owner = new Matrix(std::move(m));
  py::capsule free_when_done(owner, [](void* p) { delete static_cast<Matrix*>(p); });
  return py::array_t<double>({owner->rows(), owner->cols()}, owner->data(), free_when_done);
}

py::array_t<double> adopt(Positions&& m) {
  auto* owner = new Positions(std::move(m));
  py::capsule free_when_done(owner, [](void* p) { delete static_cast<Positions*>(p); });
  return py::array_t<double>({owner->rows(), Index{3}}, owner->data(), free_when_done);
}

py::tuple neighbor_result(NeighborTable&& t) {
  const Index q = t.num_queries, w = t.width;
  return py::make_tuple(adopt(std::move(t.indices), {q, w}), adopt(std::move(t.counts), {q}));
}

PointCloud cloud_from(const py::array& positions, const py::object& features, const py::object& labels) {
  PointCloud c(to_positions(positions, "positions"));
  if (!features.is_none()) c.features = to_matrix(features.cast<py::array>(), "features");
  if (!labels.is_none()) c.labels = to_labels(labels.cast<py::array>(), "labels");
  c.validate();
  return c;
}

std::vector<PointCloud> clouds_from(const py::list& items) {
  std::vector<PointCloud> clouds;
  for (const py::handle item : items) {
    const py::dict d = item.cast<py::dict>();
    if (!d.contains("positions")) throw py::value_error("each cloud needs a 'positions' entry");
    clouds.push_back(cloud_from(d["positions"].cast<py::array>(),
                                d.contains("features") ? d["features"].cast<py::object>() : py::none(),
                                d.contains("labels") ? d["labels"].cast<py::object>() : py::none()));
  }
  return clouds;
}

py::dict cloud_dict(PointCloud&& c) {
  py::dict d;
  const Index n = c.size();
  d["positions"] = adopt(std::move(c.positions));
  if (c.has_features()) d["features"] = adopt(std::move(c.features));
  if (c.has_labels()) d["labels"] = adopt(std::move(c.labels), {n});
  if (c.has_prob()) d["prob"] = adopt(std::move(c.prob));
  return d;
}

RigidTransform to_transform(const py::array& a, const char* name) {
  const Matrix m = to_matrix(a, name);
  if (m.rows() != 4 || m.cols() != 4) throw py::value_error(std::string(name) + ": expected shape (4, 4)");
  return RigidTransform(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

}  // namespace

PYBIND11_MODULE(_ptkit, m) {
  m.doc() = "Native point-cloud kernels, collation, protocol aggregation and metrics.";

  py::register_local_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_local_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);
  py::register_local_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_local_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def(
      "radius_search",
      [](const py::array& support, const py::array& query, double radius, Index max_k, int workers) {
        const Positions s = to_positions(support, "support"), q = to_positions(query, "query");
        NeighborTable t;
        {
          py::gil_scoped_release release;
          t = radius_search(s, q, radius, max_k, workers);
        }
        return neighbor_result(std::move(t));
      },
      py::arg("support"), py::arg("query"), py::arg("radius"), py::arg("max_k"), py::arg("workers") = 1,
      "Returns (indices, counts); unused slots of `indices` hold len(support).");

  m.def(
      "knn_search",
      [](const py::array& support, const py::array& query, Index k, int workers) {
        const Positions s = to_positions(support, "support"), q = to_positions(query, "query");
        NeighborTable t;
        {
          py::gil_scoped_release release;
          t = knn_search(s, q, k, workers);
        }
        return neighbor_result(std::move(t));
      },
      py::arg("support"), py::arg("query"), py::arg("k"), py::arg("workers") = 1);

  m.def(
      "farthest_point_sampling",
      [](const py::array& points, Index count, Index seed_index) {
        const Positions p = to_positions(points, "points");
        std::vector<Index> out;
        {
          py::gil_scoped_release release;
          out = farthest_point_sampling(p, count, seed_index);
        }
        const auto n = static_cast<py::ssize_t>(out.size());
        return adopt(std::move(out), {n});
      },
      py::arg("points"), py::arg("count"), py::arg("seed_index") = 0);

  m.def(
      "sphere_query",
      [](const py::array& points, const py::array& center, double radius) {
        const Positions p = to_positions(points, "points");
        const Vec3 c = to_vec3(center, "center");
        std::vector<Index> out;
        {
          py::gil_scoped_release release;
          out = sphere_query(p, c, radius);
        }
        const auto n = static_cast<py::ssize_t>(out.size());
        return adopt(std::move(out), {n});
      },
      py::arg("points"), py::arg("center"), py::arg("radius"));

  m.def(
      "grid_subsample",
      [](const py::array& positions, double cell_size, const py::object& features, const py::object& labels) {
        PointCloud c = cloud_from(positions, features, labels);
        GridSubsampleResult r;
        {
          py::gil_scoped_release release;
          r = grid_subsample(c, cell_size);
        }
        const auto n = static_cast<py::ssize_t>(r.mapping.size());
        py::dict d = cloud_dict(std::move(r.cloud));
        d["mapping"] = adopt(std::move(r.mapping), {n});
        return d;
      },
      py::arg("positions"), py::arg("cell_size"), py::arg("features") = py::none(), py::arg("labels") = py::none());

  m.def(
      "knn_interpolate",
      [](const py::array& source, const py::array& features, const py::array& targets, Index k, int workers) {
        const Positions s = to_positions(source, "source"), t = to_positions(targets, "targets");
        const Matrix f = to_matrix(features, "features");
        Matrix out;
        {
          py::gil_scoped_release release;
          out = knn_interpolate(s, f, t, k, workers);
        }
        return adopt(std::move(out));
      },
      py::arg("source"), py::arg("features"), py::arg("targets"), py::arg("k"), py::arg("workers") = 1);

  m.def(
      "collate_partial_dense",
      [](const py::list& items) {
        const std::vector<PointCloud> clouds = clouds_from(items);
        PartialDenseBatch b;
        {
          py::gil_scoped_release release;
          b = collate_partial_dense(clouds);
        }
        const auto rows = static_cast<py::ssize_t>(b.batch.size());
        const auto n_off = static_cast<py::ssize_t>(b.offsets.size());
        py::dict d = cloud_dict(std::move(b.points));
        d["batch"] = adopt(std::move(b.batch), {rows});
        d["offsets"] = adopt(std::move(b.offsets), {n_off});
        return d;
      },
      py::arg("clouds"), "Each cloud is a dict with 'positions' and optional 'features' and 'labels'.");

  m.def(
      "collate_dense",
      [](const py::list& items, Index num_points, std::uint64_t seed) {
        const std::vector<PointCloud> clouds = clouds_from(items);
        DenseBatch b;
        {
          py::gil_scoped_release release;
          Rng rng = make_rng(seed);
          b = collate_dense(clouds, num_points, rng);
        }
        py::dict d;
        const Index bs = b.batch_size, n = b.num_points, ch = b.channels;
        d["data"] = adopt(std::move(b.data), {bs, n, ch});
        if (!b.labels.empty()) d["labels"] = adopt(std::move(b.labels), {bs, n});
        return d;
      },
      py::arg("clouds"), py::arg("num_points"), py::arg("seed") = 0);

  m.def(
      "collate_sparse",
      [](const py::list& items, double cell_size) {
        const std::vector<PointCloud> clouds = clouds_from(items);
        SparseBatch b;
        {
          py::gil_scoped_release release;
          b = collate_sparse(clouds, cell_size);
        }
        const auto rows = static_cast<py::ssize_t>(b.batch.size());
        std::vector<std::int64_t> coords;
        coords.reserve(b.coords.size() * 3);
        for (const VoxelCoord& c : b.coords) coords.insert(coords.end(), c.begin(), c.end());
        py::dict d;
        d["coords"] = adopt(std::move(coords), {rows, 3});
        d["batch"] = adopt(std::move(b.batch), {rows});
        d["features"] = adopt(std::move(b.features));
        if (!b.labels.empty()) d["labels"] = adopt(std::move(b.labels), {rows});
        return d;
      },
      py::arg("clouds"), py::arg("cell_size"));

  m.def(
      "class_balanced_weights",
      [](const py::array& labels, Index num_classes) {
        std::vector<double> w = class_balanced_weights(to_labels(labels, "labels"), num_classes);
        const auto n = static_cast<py::ssize_t>(w.size());
        return adopt(std::move(w), {n});
      },
      py::arg("labels"), py::arg("num_classes"));

  m.def(
      "inference_regions",
      [](const py::array& positions, double radius, double spacing) {
        const Positions p = to_positions(positions, "positions");
        std::vector<SphereRegion> regions;
        {
          py::gil_scoped_release release;
          regions = inference_regions(p, radius, spacing);
        }
        py::list out;
        for (SphereRegion& r : regions) {
          const auto n = static_cast<py::ssize_t>(r.members.size());
          out.append(py::make_tuple(py::array_t<double>(3, r.center.data()), adopt(std::move(r.members), {n})));
        }
        return out;
      },
      py::arg("positions"), py::arg("radius") = kDefaultSphereRadius, py::arg("spacing") = kDefaultGridSpacing,
      "Returns a list of (center, members).");

  m.def(
      "aggregate_sphere_predictions",
      [](Index num_points, Index num_classes, const py::list& regions) {
        PredictionSet preds;
        preds.num_points = num_points;
        preds.num_classes = num_classes;
        for (const py::handle item : regions) {
          const py::tuple t = item.cast<py::tuple>();
          if (t.size() != 2) throw py::value_error("each region must be a (members, probs) pair");
          preds.regions.push_back(
              {to_indices(t[0].cast<py::array>(), "members"), to_matrix(t[1].cast<py::array>(), "probs")});
        }
        AggregatedPrediction agg;
        {
          py::gil_scoped_release release;
          agg = aggregate_sphere_predictions(preds);
        }
        std::vector<bool> covered(agg.covered.begin(), agg.covered.end());
        const auto n = static_cast<py::ssize_t>(covered.size());
        py::array_t<bool> cov(n);
        for (py::ssize_t i = 0; i < n; ++i) cov.mutable_data()[i] = covered[static_cast<std::size_t>(i)];
        return py::make_tuple(adopt(std::move(agg.probs)), cov);
      },
      py::arg("num_points"), py::arg("num_classes"), py::arg("regions"),
      "Returns (probs, covered) from a list of (members, probs) region predictions.");

  m.def(
      "vote_average",
      [](const py::list& runs) {
        std::vector<Matrix> mats;
        for (const py::handle r : runs) mats.push_back(to_matrix(r.cast<py::array>(), "run"));
        return adopt(vote_average(mats));
      },
      py::arg("runs"));

  m.def(
      "argmax_rows",
      [](const py::array& probs) {
        std::vector<Label> out = argmax_rows(to_matrix(probs, "probs"));
        const auto n = static_cast<py::ssize_t>(out.size());
        return adopt(std::move(out), {n});
      },
      py::arg("probs"));

  m.def(
      "confusion_matrix",
      [](const py::array& pred, const py::array& gt, Index num_classes) {
        const std::vector<Label> p = to_labels(pred, "pred"), g = to_labels(gt, "gt");
        ConfusionMatrix cm(num_classes);
        cm.update(p, g);
        std::vector<std::int64_t> counts;
        for (Index r = 0; r < num_classes; ++r)
          for (Index c = 0; c < num_classes; ++c) counts.push_back(cm.at(r, c));
        return adopt(std::move(counts), {num_classes, num_classes});
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes"));

  m.def(
      "segmentation_scores",
      [](const py::array& cm) {
        if (cm.ndim() != 2 || cm.shape(0) != cm.shape(1))
          throw py::value_error("cm: expected a square 2-d array, got " + shape_of(cm));
        const auto c = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>::ensure(cm);
        ConfusionMatrix m(c.shape(0));
        for (Index r = 0; r < c.shape(0); ++r)
          for (Index k = 0; k < c.shape(0); ++k) m.at(r, k) = c.at(r, k);
        SegmentationScores s = segmentation_scores(m);
        py::dict d;
        d["overall_accuracy"] = s.overall_accuracy;
        d["miou"] = s.miou;
        const auto n = static_cast<py::ssize_t>(s.per_class_iou.size());
        d["per_class_iou"] = adopt(std::move(s.per_class_iou), {n});
        return d;
      },
      py::arg("cm"));

  m.def(
      "box_iou_3d",
      [](const py::array& min_a, const py::array& max_a, const py::array& min_b, const py::array& max_b) {
        AxisAlignedBox a, b;
        a.min_corner = to_vec3(min_a, "min_a");
        a.max_corner = to_vec3(max_a, "max_a");
        b.min_corner = to_vec3(min_b, "min_b");
        b.max_corner = to_vec3(max_b, "max_b");
        return box_iou_3d(a, b);
      },
      py::arg("min_a"), py::arg("max_a"), py::arg("min_b"), py::arg("max_b"));

  m.def(
      "_evaluate_detection_json",
      [](const std::string& records, const std::vector<double>& thresholds) {
        const std::vector<DetectionRecord> recs = detection_records_from_json(nlohmann::json::parse(records));
        py::dict out;
        for (const DetectionScores& s : evaluate_detection(recs, thresholds)) {
          py::dict per_class;
          for (std::size_t k = 0; k < s.classes.size(); ++k) per_class[py::int_(s.classes[k])] = s.per_class[k];
          out[py::float_(s.iou_threshold)] = py::make_tuple(s.map, per_class);
        }
        return out;
      },
      py::arg("records"), py::arg("thresholds"));

  m.def(
      "registration_error",
      [](const py::array& estimate, const py::array& truth) {
        const RegistrationError e =
            registration_error(to_transform(estimate, "estimate"), to_transform(truth, "truth"));
        return py::make_tuple(e.rotation_deg, e.translation_m);
      },
      py::arg("estimate"), py::arg("truth"), "Returns (rotation error in degrees, translation error in meters).");

  m.def(
      "success_rate",
      [](const py::array& rotation_deg, const py::array& translation_m, double rot_thresh, double trans_thresh) {
        require_float64(rotation_deg, "rotation_deg");
        require_float64(translation_m, "translation_m");
        const auto r = DoubleArray::ensure(rotation_deg), t = DoubleArray::ensure(translation_m);
        if (r.ndim() != 1 || t.ndim() != 1 || r.shape(0) != t.shape(0))
          throw py::value_error("rotation_deg and translation_m must be 1-d arrays of equal length");
        std::vector<RegistrationError> errs;
        for (py::ssize_t i = 0; i < r.shape(0); ++i) errs.push_back({r.at(i), t.at(i)});
        return success_rate(errs, rot_thresh, trans_thresh);
      },
      py::arg("rotation_deg"), py::arg("translation_m"), py::arg("rotation_threshold_deg"),
      py::arg("translation_threshold_m"));

  m.def(
      "match_features",
      [](const py::array& feat_a, const py::array& feat_b, bool mutual, int workers) {
        const Matrix a = to_matrix(feat_a, "feat_a"), b = to_matrix(feat_b, "feat_b");
        CorrespondenceSet c;
        {
          py::gil_scoped_release release;
          c = match_features(a, b, mutual, workers);
        }
        std::vector<Index> flat;
        for (const Correspondence& p : c.pairs) flat.insert(flat.end(), {p.source, p.target});
        const auto n = static_cast<py::ssize_t>(c.pairs.size());
        return adopt(std::move(flat), {n, 2});
      },
      py::arg("feat_a"), py::arg("feat_b"), py::arg("mutual") = false, py::arg("workers") = 1,
      "Returns an (M, 2) array of (source row, target row) pairs.");

  m.def(
      "ransac_rigid",
      [](const py::array& cloud_a, const py::array& cloud_b, const py::array& pairs, Index iterations,
         double inlier_distance, std::uint64_t seed, int workers) {
        const Positions a = to_positions(cloud_a, "cloud_a"), b = to_positions(cloud_b, "cloud_b");
        if (pairs.ndim() != 2 || pairs.shape(1) != 2)
          throw py::value_error("pairs: expected shape (M, 2), got " + shape_of(pairs));
        const auto p = py::array_t<Index, py::array::c_style | py::array::forcecast>::ensure(pairs);
        CorrespondenceSet corrs;
        for (py::ssize_t i = 0; i < p.shape(0); ++i) corrs.pairs.push_back({p.at(i, 0), p.at(i, 1)});
        RansacResult r;
        {
          py::gil_scoped_release release;
          r = ransac_rigid(a, b, corrs, {iterations, inlier_distance, seed, workers});
        }
        const auto n = static_cast<py::ssize_t>(r.inliers.size());
        Eigen::Matrix4d t = r.transform.matrix();
        return py::make_tuple(py::array_t<double>({4, 4}, {4 * sizeof(double), sizeof(double)},
                                                  Eigen::Matrix<double, 4, 4, Eigen::RowMajor>(t).data()),
                              adopt(std::move(r.inliers), {n}));
      },
      py::arg("cloud_a"), py::arg("cloud_b"), py::arg("pairs"), py::arg("iterations") = 10000,
      py::arg("inlier_distance") = 0.05, py::arg("seed") = 0, py::arg("workers") = 1,
      "Returns (4x4 transform taking cloud_a onto cloud_b, inlier positions in `pairs`).");
}
