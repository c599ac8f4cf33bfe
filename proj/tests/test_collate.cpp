#include <doctest.h>

#include "ptkit/collate.hpp"
#include "ptkit/transforms.hpp"

using namespace ptkit;

namespace {

PointCloud labeled(Index n, Index f, Label base) {
  PointCloud c(Positions::Random(n, 3));
  if (f > 0) c.features = Matrix::Random(n, f);
  for (Index i = 0; i < n; ++i) c.labels.push_back(base + static_cast<Label>(i % 2));
  return c;
}

}  // namespace

TEST_CASE("dense collation resamples each instance to the same size") {
  const std::vector<PointCloud> clouds{labeled(5, 2, 0), labeled(40, 2, 10)};
  Rng rng(1), replay(1);
  const DenseBatch b = collate_dense(clouds, 16, rng);
  CHECK(b.batch_size == 2);
  CHECK(b.num_points == 16);
  CHECK(b.channels == 5);
  CHECK(b.data.size() == 2 * 16 * 5);
  CHECK(b.labels.size() == 32);
  // Same stream, same draws: instance by instance through fixed_points.
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    const PointCloud expect = fixed_points(clouds[k], 16, replay);
    for (Index n = 0; n < 16; ++n) {
      for (int c = 0; c < 3; ++c) CHECK(b.at(static_cast<Index>(k), n, c) == expect.positions(n, c));
      for (int c = 0; c < 2; ++c) CHECK(b.at(static_cast<Index>(k), n, 3 + c) == expect.features(n, c));
      CHECK(b.labels[k * 16 + static_cast<std::size_t>(n)] == expect.labels[static_cast<std::size_t>(n)]);
    }
  }
  CHECK_THROWS_AS(collate_dense({}, 4, rng), ParameterError);
  CHECK_THROWS_AS(collate_dense({labeled(3, 1, 0), labeled(3, 2, 0)}, 4, rng), ParameterError);
}

TEST_CASE("partial dense collation concatenates with a batch vector") {
  const std::vector<PointCloud> clouds{labeled(3, 1, 0), labeled(0, 1, 0), labeled(4, 1, 5)};
  const PartialDenseBatch b = collate_partial_dense(clouds);
  CHECK(b.batch_size() == 3);
  CHECK(b.offsets == std::vector<Index>{0, 3, 3, 7});
  CHECK(b.batch == std::vector<Index>{0, 0, 0, 2, 2, 2, 2});
  CHECK(b.points.size() == 7);
  CHECK(b.slice(2) == clouds[2]);
  CHECK(b.slice(1).empty());
  CHECK_THROWS_AS(b.slice(3), ParameterError);
}

TEST_CASE("sparse collation pools voxels per instance in sorted order") {
  PointCloud a;
  a.positions.resize(4, 3);
  a.positions << 1.5, 0.2, 0.2, 0.1, 0.1, 0.1, 0.2, 0.3, 0.4, -0.5, 0.0, 0.0;
  a.features = Matrix(4, 1);
  a.features << 1.0, 2.0, 4.0, 8.0;
  a.labels = {3, 1, 1, 2};
  PointCloud b;
  b.positions.resize(1, 3);
  b.positions << 0.1, 0.1, 0.1;
  b.features = Matrix::Constant(1, 1, 7.0);
  b.labels = {0};
  const SparseBatch s = collate_sparse({a, b}, 1.0);
  REQUIRE(s.coords.size() == 4);
  CHECK(s.coords[0] == VoxelCoord{-1, 0, 0});
  CHECK(s.coords[1] == VoxelCoord{0, 0, 0});
  CHECK(s.coords[2] == VoxelCoord{1, 0, 0});
  CHECK(s.coords[3] == VoxelCoord{0, 0, 0});
  CHECK(s.batch == std::vector<Index>{0, 0, 0, 1});
  CHECK(s.features(1, 0) == 3.0);
  CHECK(s.features(3, 0) == 7.0);
  CHECK(s.labels == std::vector<Label>{2, 1, 3, 0});
  CHECK_THROWS_AS(collate_sparse({a}, 0.0), ParameterError);
}
