#include "ptkit/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ptkit {
namespace {

// Little-endian binary reader that tracks its byte offset for error messages.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void expect_magic(const char (&magic)[5]) {
    char got[4];
    read_bytes(got, 4, "magic");
    if (std::memcmp(got, magic, 4) != 0)
      throw IoError(std::string("bad magic, expected \"") + magic + "\"", 0);
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read_bytes(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  std::int64_t i64(const char* what) {
    const std::uint64_t lo = u32(what);
    const std::uint64_t hi = u32(what);
    return static_cast<std::int64_t>(lo | hi << 32);
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::uint64_t offset() const { return offset_; }

 private:
  void read_bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw IoError(std::string("truncated payload while reading ") + what, offset_ + static_cast<std::uint64_t>(in_.gcount()));
    offset_ += n;
  }

  std::istream& in_;
  std::uint64_t offset_ = 0;
};

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void magic(const char (&m)[5]) { out_.write(m, 4); }
  void u32(std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8 & 0xff),
                       static_cast<char>(v >> 16 & 0xff), static_cast<char>(v >> 24 & 0xff)};
    out_.write(b, 4);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) {
    const auto u = static_cast<std::uint64_t>(v);
    u32(static_cast<std::uint32_t>(u & 0xffffffffu));
    u32(static_cast<std::uint32_t>(u >> 32));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

 private:
  std::ostream& out_;
};

std::uint32_t checked_u32(Index v, const char* what) {
  if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
    throw IoError(std::string(what) + " does not fit the file format");
  return static_cast<std::uint32_t>(v);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

bool is_integer_type(const std::string& t) {
  return t == "char" || t == "uchar" || t == "short" || t == "ushort" || t == "int" || t == "uint" ||
         t == "int8" || t == "uint8" || t == "int16" || t == "uint16" || t == "int32" || t == "uint32";
}

bool is_known_type(const std::string& t) {
  return is_integer_type(t) || t == "float" || t == "double" || t == "float32" || t == "float64";
}

}  // namespace

// ---------------------------------------------------------------------------
// PLY

PointCloud read_ply(std::istream& in) {
  std::uint64_t offset = 0;
  std::string line;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw IoError("not a PLY file (missing 'ply' signature)", 0);
  Index vertex_count = -1;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::string> props;
  std::vector<std::string> prop_types;
  bool format_ok = false;
  for (;;) {
    const std::uint64_t line_start = offset;
    if (!next_line()) throw IoError("PLY header ends before 'end_header'", offset);
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "end_header") break;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "format") {
      std::string kind, version;
      ss >> kind >> version;
      if (kind != "ascii") throw IoError("only ASCII PLY is supported, got format '" + kind + "'", line_start);
      format_ok = true;
    } else if (word == "element") {
      std::string name;
      long long count = -1;
      ss >> name >> count;
      if (!ss || count < 0) throw IoError("malformed element line", line_start);
      in_vertex = name == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw IoError("duplicate vertex element", line_start);
        if (vertex_count < 0 && !props.empty()) throw IoError("vertex element must come first", line_start);
        seen_vertex = true;
        vertex_count = count;
      } else if (!seen_vertex) {
        throw IoError("vertex element must come first", line_start);
      }
    } else if (word == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      ss >> type;
      if (type == "list") throw IoError("list properties are not supported on vertices", line_start);
      ss >> name;
      if (!ss || !is_known_type(type)) throw IoError("malformed property line", line_start);
      props.push_back(name);
      prop_types.push_back(type);
    } else {
      throw IoError("unexpected header keyword '" + word + "'", line_start);
    }
  }
  if (!format_ok) throw IoError("PLY header has no format line", offset);
  if (vertex_count < 0) vertex_count = 0;

  int ix = -1, iy = -1, iz = -1, ilabel = -1;
  std::vector<int> feature_cols;
  for (int p = 0; p < static_cast<int>(props.size()); ++p) {
    const std::string& name = props[static_cast<std::size_t>(p)];
    if (name == "x") ix = p;
    else if (name == "y") iy = p;
    else if (name == "z") iz = p;
    else if (name == "label" && is_integer_type(prop_types[static_cast<std::size_t>(p)])) ilabel = p;
    else feature_cols.push_back(p);
  }
  if (vertex_count > 0 && (ix < 0 || iy < 0 || iz < 0)) throw IoError("PLY vertices need x, y and z", offset);

  PointCloud cloud;
  cloud.positions.resize(vertex_count, 3);
  if (!feature_cols.empty()) cloud.features.resize(vertex_count, static_cast<Index>(feature_cols.size()));
  if (ilabel >= 0) cloud.labels.resize(static_cast<std::size_t>(vertex_count));
  std::vector<double> values(props.size());
  for (Index v = 0; v < vertex_count; ++v) {
    const std::uint64_t line_start = offset;
    if (!next_line()) throw IoError("truncated PLY payload: expected " + std::to_string(vertex_count) +
                                        " vertices, got " + std::to_string(v), line_start);
    std::istringstream ss(line);
    for (std::size_t p = 0; p < props.size(); ++p)
      if (!(ss >> values[p])) throw IoError("malformed vertex " + std::to_string(v), line_start);
    cloud.positions.row(v) << values[static_cast<std::size_t>(ix)], values[static_cast<std::size_t>(iy)],
        values[static_cast<std::size_t>(iz)];
    for (std::size_t f = 0; f < feature_cols.size(); ++f)
      cloud.features(v, static_cast<Index>(f)) = values[static_cast<std::size_t>(feature_cols[f])];
    if (ilabel >= 0) cloud.labels[static_cast<std::size_t>(v)] = static_cast<Label>(values[static_cast<std::size_t>(ilabel)]);
  }
  if (!cloud.positions.allFinite()) throw IoError("PLY positions contain NaN or Inf");
  return cloud;
}

void write_ply(const PointCloud& cloud, std::ostream& out) {
  cloud.validate();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  for (Index f = 0; f < cloud.feature_dim(); ++f) out << "property double f" << f << "\n";
  if (cloud.has_labels()) out << "property int label\n";
  out << "end_header\n";
  out.precision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    out << cloud.positions(i, 0) << ' ' << cloud.positions(i, 1) << ' ' << cloud.positions(i, 2);
    for (Index f = 0; f < cloud.feature_dim(); ++f) out << ' ' << cloud.features(i, f);
    if (cloud.has_labels()) out << ' ' << cloud.labels[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// TP3C

PointCloud read_tp3c(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic("TP3C");
  const Index n = r.u32("point count");
  const Index f = r.u32("feature count");
  PointCloud cloud;
  cloud.positions.resize(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) cloud.positions(i, c) = r.f32("positions");
  if (f > 0) {
    cloud.features.resize(n, f);
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < f; ++c) cloud.features(i, c) = r.f32("features");
  }
  cloud.labels.resize(static_cast<std::size_t>(n));
  bool any_label = false;
  for (auto& l : cloud.labels) {
    l = r.i32("labels");
    any_label = any_label || l != kIgnoreLabel;
  }
  if (!any_label) cloud.labels.clear();
  if (!cloud.positions.allFinite()) throw IoError("TP3C positions contain NaN or Inf");
  return cloud;
}

void write_tp3c(const PointCloud& cloud, std::ostream& out) {
  cloud.validate();
  BinaryWriter w(out);
  w.magic("TP3C");
  w.u32(checked_u32(cloud.size(), "point count"));
  w.u32(checked_u32(cloud.feature_dim(), "feature count"));
  for (Index i = 0; i < cloud.size(); ++i)
    for (int c = 0; c < 3; ++c) w.f32(cloud.positions(i, c));
  for (Index i = 0; i < cloud.size(); ++i)
    for (Index c = 0; c < cloud.feature_dim(); ++c) w.f32(cloud.features(i, c));
  for (Index i = 0; i < cloud.size(); ++i)
    w.i32(cloud.has_labels() ? cloud.labels[static_cast<std::size_t>(i)] : kIgnoreLabel);
}

namespace {
CloudFormat resolve(const std::filesystem::path& path, CloudFormat format) {
  if (format != CloudFormat::kAuto) return format;
  return path.extension() == ".ply" ? CloudFormat::kPlyAscii : CloudFormat::kBinary;
}
}  // namespace

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in = open_in(path);
  try {
    return resolve(path, format) == CloudFormat::kPlyAscii ? read_ply(in) : read_tp3c(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out = open_out(path);
  if (resolve(path, format) == CloudFormat::kPlyAscii) write_ply(cloud, out);
  else write_tp3c(cloud, out);
  finish(out, path);
}

// ---------------------------------------------------------------------------
// TP3F

Matrix read_features(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic("TP3F");
  const Index n = r.u32("row count");
  const Index d = r.u32("dimension");
  Matrix out(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < d; ++c) out(i, c) = r.f32("feature rows");
  return out;
}

void write_features(const Matrix& features, std::ostream& out) {
  BinaryWriter w(out);
  w.magic("TP3F");
  w.u32(checked_u32(features.rows(), "row count"));
  w.u32(checked_u32(features.cols(), "dimension"));
  for (Index i = 0; i < features.rows(); ++i)
    for (Index c = 0; c < features.cols(); ++c) w.f32(features(i, c));
}

Matrix read_features(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return read_features(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_features(const Matrix& features, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  write_features(features, out);
  finish(out, path);
}

// ---------------------------------------------------------------------------
// TP3P

PredictionSet read_predictions(std::istream& in, Index num_points) {
  BinaryReader r(in);
  r.expect_magic("TP3P");
  const std::uint32_t count = r.u32("region count");
  PredictionSet preds;
  preds.num_points = num_points;
  preds.regions.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint64_t region_start = r.offset();
    const Index members = r.u32("member count");
    const Index classes = r.u32("class count");
    if (classes == 0) throw IoError("region " + std::to_string(k) + " declares zero classes", region_start);
    if (preds.num_classes == 0) preds.num_classes = classes;
    if (classes != preds.num_classes)
      throw IoError("region " + std::to_string(k) + " has " + std::to_string(classes) + " classes, expected " +
                        std::to_string(preds.num_classes), region_start);
    RegionPrediction region;
    region.members.resize(static_cast<std::size_t>(members));
    for (auto& m : region.members) {
      m = r.i64("member indices");
      if (m < 0 || (num_points > 0 && m >= num_points))
        throw IoError("member index " + std::to_string(m) + " out of range", r.offset() - 8);
    }
    region.probs.resize(members, classes);
    for (Index i = 0; i < members; ++i)
      for (Index c = 0; c < classes; ++c) region.probs(i, c) = r.f32("probability rows");
    preds.regions.push_back(std::move(region));
  }
  return preds;
}

void write_predictions(const PredictionSet& preds, std::ostream& out) {
  BinaryWriter w(out);
  w.magic("TP3P");
  w.u32(checked_u32(static_cast<Index>(preds.regions.size()), "region count"));
  for (const auto& region : preds.regions) {
    if (region.probs.rows() != static_cast<Index>(region.members.size()))
      throw ParameterError("region probabilities must have one row per member");
    w.u32(checked_u32(static_cast<Index>(region.members.size()), "member count"));
    w.u32(checked_u32(preds.num_classes, "class count"));
    for (Index m : region.members) w.i64(m);
    for (Index i = 0; i < region.probs.rows(); ++i)
      for (Index c = 0; c < preds.num_classes; ++c) w.f32(region.probs(i, c));
  }
}

PredictionSet read_predictions(const std::filesystem::path& path, Index num_points) {
  std::ifstream in = open_in(path);
  try {
    return read_predictions(in, num_points);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_predictions(const PredictionSet& preds, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  write_predictions(preds, out);
  finish(out, path);
}

}  // namespace ptkit
