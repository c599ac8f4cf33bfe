#include "ptkit/transforms.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

#include "ptkit/spatial.hpp"
#include "yaml_util.hpp"

namespace ptkit {
namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

PointCloud normalize_scale(const PointCloud& cloud) {
  if (cloud.empty()) throw ParameterError("normalize_scale requires a nonempty cloud");
  PointCloud out = cloud;
  const Eigen::RowVector3d centroid = cloud.positions.colwise().mean();
  out.positions.rowwise() -= centroid;
  const double max_norm = out.positions.rowwise().norm().maxCoeff();
  if (max_norm > 0.0) out.positions /= max_norm;
  return out;
}

std::vector<Index> fixed_point_indices(Index size, Index n, Rng& rng) {
  if (size <= 0) throw ParameterError("fixed_points requires a nonempty cloud");
  if (n < 1) throw ParameterError("fixed_points requires n >= 1");
  std::vector<Index> perm(static_cast<std::size_t>(size));
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<Index>(out.size()) < n) {
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto take = std::min<std::size_t>(perm.size(), static_cast<std::size_t>(n) - out.size());
    out.insert(out.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

PointCloud fixed_points(const PointCloud& cloud, Index n, Rng& rng) {
  const auto idx = fixed_point_indices(cloud.size(), n, rng);
  return cloud.subset(idx);
}

PointCloud random_noise(const PointCloud& cloud, double sigma, double clip, Rng& rng) {
  if (!(sigma >= 0.0) || !(clip >= 0.0)) throw ParameterError("sigma and clip must be nonnegative");
  PointCloud out = cloud;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Index i = 0; i < out.size(); ++i)
    for (int c = 0; c < 3; ++c) out.positions(i, c) += std::clamp(gauss(rng), -clip, clip);
  return out;
}

PointCloud rotate_z(const PointCloud& cloud, double angle_rad) {
  return apply_transform(RigidTransform::from_axis_angle(Vec3::UnitZ(), angle_rad), cloud);
}

double draw_rotation_angle(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
}

PointCloud random_rotate_z(const PointCloud& cloud, Rng& rng) {
  return rotate_z(cloud, draw_rotation_angle(rng));
}

GridSampling3D::GridSampling3D(double size) : size_(size) {
  if (!(size > 0.0)) throw ParameterError("GridSampling3D size must be positive");
}

std::string GridSampling3D::describe() const { return "GridSampling3D(" + shortest(size_) + ")"; }

PointCloud GridSampling3D::apply(const PointCloud& cloud, Rng&) const {
  return grid_subsample(cloud, size_).cloud;
}

FixedPoints::FixedPoints(Index num) : num_(num) {
  if (num < 1) throw ParameterError("FixedPoints count must be at least 1");
}

std::string FixedPoints::describe() const { return "FixedPoints(" + std::to_string(num_) + ")"; }

RandomNoise::RandomNoise(double sigma, double clip) : sigma_(sigma), clip_(clip) {
  if (!(sigma >= 0.0) || !(clip >= 0.0)) throw ParameterError("RandomNoise sigma and clip must be nonnegative");
}

std::string RandomNoise::describe() const {
  return "RandomNoise(" + shortest(sigma_) + ", " + shortest(clip_) + ")";
}

PointCloud TransformPipeline::apply(const PointCloud& cloud, Rng& rng) const {
  PointCloud out = cloud;
  for (const auto& step : steps_) out = step->apply(out, rng);
  return out;
}

std::vector<std::string> TransformPipeline::describe() const {
  std::vector<std::string> out;
  for (const auto& step : steps_) out.push_back(step->describe());
  return out;
}

bool TransformPipeline::preserves_frame() const {
  return std::all_of(steps_.begin(), steps_.end(), [](const auto& s) { return s->preserves_frame(); });
}

// ---------------------------------------------------------------------------
// Registry

namespace {

// Resolves parameter `key` from `params:` or position `pos` in `lparams:`.
class ParamReader {
 public:
  ParamReader(const std::string& transform, const TransformParams& p) : name_(transform), p_(p) {}

  double get(const std::string& key, std::size_t pos, std::optional<double> fallback = std::nullopt) {
    used_.push_back(key);
    if (auto it = p_.named.find(key); it != p_.named.end()) return it->second;
    if (pos < p_.positional.size()) {
      positional_used_ = std::max(positional_used_, pos + 1);
      return p_.positional[pos];
    }
    if (fallback) return *fallback;
    throw ParseError(name_ + ": missing parameter '" + key + "'");
  }

  void finish() const {
    for (const auto& [key, value] : p_.named)
      if (std::find(used_.begin(), used_.end(), key) == used_.end())
        throw ParseError(name_ + ": unknown parameter '" + key + "'");
    if (p_.positional.size() > positional_used_)
      throw ParseError(name_ + ": expected at most " + std::to_string(positional_used_) +
                       " positional parameters, got " + std::to_string(p_.positional.size()));
  }

 private:
  std::string name_;
  const TransformParams& p_;
  std::vector<std::string> used_;
  std::size_t positional_used_ = 0;
};

Index as_count(const std::string& name, double v) {
  if (v != std::floor(v) || v < 1 || v > 9.0e15) throw ParseError(name + ": point count must be a positive integer");
  return static_cast<Index>(v);
}

template <typename Fn>
TransformPtr checked(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const ParameterError& e) {
    throw ParseError(name + ": " + e.what());
  }
}

TransformRegistry make_builtin() {
  TransformRegistry r;
  r.add("NormalizeScale", [](const TransformParams& p) -> TransformPtr {
    ParamReader(std::string("NormalizeScale"), p).finish();
    return std::make_shared<NormalizeScale>();
  });
  r.add("GridSampling3D", [](const TransformParams& p) -> TransformPtr {
    ParamReader read("GridSampling3D", p);
    const double size = read.get("size", 0);
    read.finish();
    return checked("GridSampling3D", [&] { return std::make_shared<GridSampling3D>(size); });
  });
  r.add("FixedPoints", [](const TransformParams& p) -> TransformPtr {
    ParamReader read("FixedPoints", p);
    const Index num = as_count("FixedPoints", read.get("num", 0));
    read.finish();
    return std::make_shared<FixedPoints>(num);
  });
  r.add("RandomNoise", [](const TransformParams& p) -> TransformPtr {
    ParamReader read("RandomNoise", p);
    const double sigma = read.get("sigma", 0, 0.01);
    const double clip = read.get("clip", 1, 0.05);
    read.finish();
    return checked("RandomNoise", [&] { return std::make_shared<RandomNoise>(sigma, clip); });
  });
  r.add("RandomRotateZ", [](const TransformParams& p) -> TransformPtr {
    ParamReader(std::string("RandomRotateZ"), p).finish();
    return std::make_shared<RandomRotateZ>();
  });
  return r;
}

}  // namespace

const TransformRegistry& TransformRegistry::builtin() {
  static const TransformRegistry registry = make_builtin();
  return registry;
}

void TransformRegistry::add(const std::string& name, TransformFactory factory) {
  factories_[name] = std::move(factory);
}

TransformPtr TransformRegistry::make(const std::string& name, const TransformParams& params) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw ParseError("unknown transform '" + name + "'");
  return it->second(params);
}

// ---------------------------------------------------------------------------
// YAML

namespace detail {

YAML::Node load_yaml(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("malformed configuration: ") + e.what());
  }
}

namespace {

double scalar_number(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) throw ParseError(where + ": expected a number");
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw ParseError(where + ": '" + node.Scalar() + "' is not a number");
  }
}

}  // namespace

TransformPipeline pipeline_from_yaml(const YAML::Node& list, const TransformRegistry& registry,
                                     const std::string& where) {
  if (!list || list.IsNull()) return {};
  if (!list.IsSequence()) throw ParseError(where + ": expected a list of transforms");
  std::vector<TransformPtr> steps;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const YAML::Node entry = list[i];
    std::string label = where + "[" + std::to_string(i) + "]";
    if (!entry.IsMap() || !entry["transform"] || !entry["transform"].IsScalar())
      throw ParseError(label + ": entry needs a 'transform' name");
    const std::string name = entry["transform"].Scalar();
    label += " (" + name + ")";
    TransformParams params;
    for (const auto& kv : entry) {
      const std::string key = kv.first.Scalar();
      if (key == "transform") continue;
      if (key == "params") {
        if (kv.second.IsNull()) continue;
        if (!kv.second.IsMap()) throw ParseError(label + ": 'params' must be a map");
        for (const auto& p : kv.second)
          params.named[p.first.Scalar()] = scalar_number(p.second, label + " param '" + p.first.Scalar() + "'");
      } else if (key == "lparams") {
        if (!kv.second.IsSequence()) throw ParseError(label + ": 'lparams' must be a list");
        for (const auto& v : kv.second) params.positional.push_back(scalar_number(v, label + " lparams"));
      } else {
        throw ParseError(label + ": unexpected key '" + key + "'");
      }
    }
    if (!registry.contains(name)) throw ParseError(label + ": unknown transform '" + name + "'");
    try {
      steps.push_back(registry.make(name, params));
    } catch (const ParseError& e) {
      throw ParseError(label + ": " + e.what());
    }
  }
  return TransformPipeline(std::move(steps));
}

}  // namespace detail

TransformPipeline parse_pipeline(std::string_view yaml_text, const TransformRegistry& registry) {
  return detail::pipeline_from_yaml(detail::load_yaml(yaml_text), registry, "transforms");
}

DataTransforms parse_data_transforms(std::string_view yaml_text, const TransformRegistry& registry) {
  const YAML::Node doc = detail::load_yaml(yaml_text);
  YAML::Node root;
  root.reset(doc.IsMap() && doc["data"] ? doc["data"] : doc);
  if (root.IsNull()) return {};
  if (!root.IsMap()) throw ParseError("data: expected a map");
  DataTransforms out;
  out.pre = detail::pipeline_from_yaml(root["pre_transforms"], registry, "pre_transforms");
  out.train = detail::pipeline_from_yaml(root["train_transforms"], registry, "train_transforms");
  out.test = detail::pipeline_from_yaml(root["test_transforms"], registry, "test_transforms");
  return out;
}

}  // namespace ptkit
