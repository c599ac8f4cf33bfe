#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ptkit/io.hpp"

using namespace ptkit;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const IoError& e) {
    return e.what();
  }
  return "no error";
}

// Values exactly representable in 32-bit floats.
PointCloud f32_cloud(Index n, Index f, bool labels) {
  PointCloud c(Positions::Random(n, 3).cast<float>().cast<double>());
  if (f > 0) c.features = Matrix::Random(n, f).cast<float>().cast<double>();
  if (labels)
    for (Index i = 0; i < n; ++i) c.labels.push_back(static_cast<Label>(i % 4) - 1);
  return c;
}

}  // namespace

TEST_CASE("hand-written ASCII PLY") {
  std::istringstream in(
      "ply\n"
      "format ascii 1.0\n"
      "comment three points\n"
      "element vertex 3\n"
      "property float x\n"
      "property float y\n"
      "property float z\n"
      "property uchar red\n"
      "property int label\n"
      "element face 0\n"
      "property list uchar int vertex_indices\n"
      "end_header\n"
      "0 0 0 255 1\n"
      "1.5 -2 3.25 0 2\n"
      "-0.125 4 1e-3 17 -1\n");
  const PointCloud c = read_ply(in);
  REQUIRE(c.size() == 3);
  CHECK(c.positions(1, 0) == 1.5);
  CHECK(c.positions(1, 2) == 3.25);
  CHECK(c.positions(2, 2) == 0.001);
  CHECK(c.features.cols() == 1);
  CHECK(c.features(0, 0) == 255.0);
  CHECK(c.labels == std::vector<Label>{1, 2, -1});
}

TEST_CASE("PLY round trip, empty clouds and errors") {
  const PointCloud c = f32_cloud(20, 2, true);
  std::stringstream ss;
  write_ply(c, ss);
  const PointCloud back = read_ply(ss);
  CHECK((back.positions - c.positions).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((back.features - c.features).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(back.labels == c.labels);

  std::istringstream empty("ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nend_header\n");
  CHECK(read_ply(empty).empty());

  std::istringstream binary("ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n");
  CHECK(error_of([&] { read_ply(binary); }).find("at byte offset 4") != std::string::npos);
  std::istringstream truncated(
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n");
  const std::string msg = error_of([&] { read_ply(truncated); });
  CHECK(msg.find("truncated") != std::string::npos);
  CHECK(msg.find("byte offset 106") != std::string::npos);
  std::istringstream garbage("PK\x03\x04");
  CHECK(error_of([&] { read_ply(garbage); }).find("byte offset 0") != std::string::npos);
}

TEST_CASE("TP3C round trip is bitwise") {
  for (bool labels : {true, false}) {
    const PointCloud c = f32_cloud(33, labels ? 3 : 0, labels);
    std::stringstream ss;
    write_tp3c(c, ss);
    CHECK(ss.str().size() == 12 + 33 * 3 * 4 + 33 * (labels ? 3 : 0) * 4 + 33 * 4);
    CHECK(read_tp3c(ss) == c);
  }
}

TEST_CASE("TP3C layout and truncation offsets") {
  PointCloud c(Positions::Zero(1, 3));
  c.positions(0, 0) = 1.0;
  c.labels = {5};
  std::stringstream ss;
  write_tp3c(c, ss);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "TP3C");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(bytes.substr(12, 4) == std::string("\x00\x00\x80\x3f", 4));
  CHECK(static_cast<unsigned char>(bytes[24]) == 5);

  std::istringstream cut(bytes.substr(0, 18));
  CHECK(error_of([&] { read_tp3c(cut); }).find("byte offset 18") != std::string::npos);
  std::istringstream wrong("TP3X" + bytes.substr(4));
  CHECK(error_of([&] { read_tp3c(wrong); }).find("bad magic") != std::string::npos);
}

TEST_CASE("file dispatch by extension") {
  const auto dir = std::filesystem::temp_directory_path() / "ptkit_io_test";
  std::filesystem::create_directories(dir);
  const PointCloud c = f32_cloud(10, 1, true);
  write_cloud(c, dir / "a.ply");
  write_cloud(c, dir / "a.bin");
  CHECK(read_cloud(dir / "a.bin") == c);
  CHECK((read_cloud(dir / "a.ply").positions - c.positions).norm() < 1e-6);
  std::ifstream ply(dir / "a.ply");
  std::string first;
  std::getline(ply, first);
  CHECK(first == "ply");
  CHECK_THROWS_AS(read_cloud(dir / "missing.bin"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("TP3F features and TP3P predictions round trip") {
  const Matrix f = Matrix::Random(7, 4).cast<float>().cast<double>();
  std::stringstream fs;
  write_features(f, fs);
  CHECK(read_features(fs) == f);

  PredictionSet p;
  p.num_points = 5;
  p.num_classes = 2;
  Matrix a(2, 2);
  a << 0.25, 0.75, 1.0, 0.0;
  p.regions = {{{0, 4}, a}, {{}, Matrix(0, 2)}};
  std::stringstream ps;
  write_predictions(p, ps);
  const PredictionSet back = read_predictions(ps, 5);
  REQUIRE(back.regions.size() == 2);
  CHECK(back.num_classes == 2);
  CHECK(back.regions[0].members == std::vector<Index>{0, 4});
  CHECK(back.regions[0].probs == a);
  CHECK(back.regions[1].members.empty());

  std::stringstream again;
  write_predictions(p, again);
  CHECK_THROWS_AS(read_predictions(again, 4), IoError);
}
