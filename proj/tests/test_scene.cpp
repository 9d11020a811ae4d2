// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "cra/rng.hpp"
#include "cra/scene.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

cra::CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  cra::CMatrix m(rows, cols);
  cra::PortableRng rng(seed);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return m;
}

cra::SensingMatrix random_sensing(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  cra::SensingMatrix H;
  H.entries = random_matrix(rows, cols, seed);
  H.row_index.resize(static_cast<std::size_t>(rows));
  for (std::size_t r = 0; r < H.row_index.size(); ++r) H.row_index[r] = {71.0 + static_cast<double>(r), 0, 0};
  return H;
}

}  // namespace

TEST_CASE("default roi lattice has 140000 voxels", "[scene]") {
  cra::RoIGrid roi = cra::build_roi({});
  REQUIRE(roi.nx == 100);
  REQUIRE(roi.ny == 14);
  REQUIRE(roi.nz == 100);
  REQUIRE(roi.voxel_count() == 140000);
}

TEST_CASE("desk roi lattice has 17500 voxels", "[scene]") {
  cra::RoIGrid roi = cra::build_roi({{350.0, 1000.0, 0.0}, {300.0, 210.0, 300.0}, {6.0, 30.0, 6.0}});
  REQUIRE(roi.nx == 50);
  REQUIRE(roi.ny == 7);
  REQUIRE(roi.nz == 50);
  REQUIRE(roi.voxel_count() == 17500);

  REQUIRE(roi.voxel_center(0, 0, 0) == cra::Vec3{203.0, 910.0, -147.0});
  REQUIRE(roi.voxel_center(25, 3, 25) == cra::Vec3{353.0, 1000.0, 3.0});
}

TEST_CASE("indivisible extents are rejected with a suggestion", "[scene]") {
  cra::RoiSpec spec;
  spec.extent = {10.0, 30.0, 30.0};
  spec.voxel = {3.0, 30.0, 30.0};
  REQUIRE_THROWS_WITH(cra::build_roi(spec), ContainsSubstring("nearest divisible extent") &&
                                                ContainsSubstring("9.000000"));
  spec.voxel = {0.0, 30.0, 30.0};
  REQUIRE_THROWS_AS(cra::build_roi(spec), std::invalid_argument);
}

TEST_CASE("voxel ordering is x fastest, then z, then y", "[scene]") {
  cra::RoIGrid roi = cra::build_roi({{0.0, 0.0, 0.0}, {12.0, 9.0, 20.0}, {4.0, 3.0, 5.0}});
  REQUIRE(roi.nx == 3);
  REQUIRE(roi.ny == 3);
  REQUIRE(roi.nz == 4);
  REQUIRE(roi.index(1, 0, 0) == 1);
  REQUIRE(roi.index(0, 0, 1) == roi.nx);
  REQUIRE(roi.index(0, 1, 0) == roi.nx * roi.nz);

  // Linear index and (ix, iy, iz) address the same centers.
  std::set<std::size_t> seen;
  for (std::size_t iy = 0; iy < roi.ny; ++iy)
    for (std::size_t iz = 0; iz < roi.nz; ++iz)
      for (std::size_t ix = 0; ix < roi.nx; ++ix) {
        std::size_t linear = roi.index(ix, iy, iz);
        REQUIRE(linear < roi.voxel_count());
        REQUIRE(seen.insert(linear).second);
        REQUIRE(roi.voxel_center(linear) == roi.voxel_center(ix, iy, iz));
      }
  REQUIRE(seen.size() == roi.voxel_count());
}

TEST_CASE("point targets mark exactly their voxels", "[scene]") {
  cra::RoIGrid roi = cra::build_roi({{350.0, 1000.0, 0.0}, {300.0, 210.0, 300.0}, {6.0, 30.0, 6.0}});

  cra::TargetSpec spec;
  spec.shape = cra::TargetSpec::Shape::PointSet;
  spec.points = {{353.0, 1000.0, 3.0}};
  spec.reflectivity = {0.5, -0.5};
  cra::ReflectivityVolume vol = cra::rasterize_target(spec, roi);

  std::size_t hit = roi.index(25, 3, 25);
  for (std::size_t v = 0; v < roi.voxel_count(); ++v) {
    if (v == hit)
      REQUIRE(vol.values(static_cast<Eigen::Index>(v)) == cra::Complex{0.5, -0.5});
    else
      REQUIRE(vol.values(static_cast<Eigen::Index>(v)) == cra::Complex{0.0, 0.0});
  }

  spec.points.clear();
  REQUIRE(cra::rasterize_target(spec, roi).values.norm() == 0.0);

  spec.points = {{350.0, 2000.0, 0.0}};
  REQUIRE_THROWS_WITH(cra::rasterize_target(spec, roi), ContainsSubstring("outside the RoI"));
}

TEST_CASE("an axis-aligned box rasterizes to the expected voxel count", "[scene]") {
  cra::RoIGrid roi = cra::build_roi({{350.0, 1000.0, 0.0}, {300.0, 210.0, 300.0}, {6.0, 30.0, 6.0}});
  cra::TargetSpec spec;
  spec.shape = cra::TargetSpec::Shape::Box;
  spec.rotation_deg = 0.0;
  spec.box_size = {60.0, 30.0, 60.0};

  cra::ReflectivityVolume vol = cra::rasterize_target(spec, roi);
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < vol.values.size(); ++i)
    if (vol.values(i) != cra::Complex{0.0, 0.0}) ++count;
  // 10 x 10 centers in the footprint, one 30 mm voxel plane in depth.
  REQUIRE(count == 100);
}

TEST_CASE("t-shape raster matches an independently coded membership test", "[scene]") {
  cra::RoIGrid roi = cra::build_roi({});  // default 600 mm square RoI fits the rotated T
  cra::TargetSpec spec;                   // default T, 45 degree rotation, one voxel deep

  cra::ReflectivityVolume vol = cra::rasterize_target(spec, roi);

  // Plane whose center is nearest the target center; the 14-plane default
  // RoI puts the center exactly between two planes, and ties resolve to the
  // +y side.
  std::size_t best_iy = 0;
  double best = 1e300;
  for (std::size_t iy = 0; iy < roi.ny; ++iy) {
    double d = std::abs(roi.voxel_center(0, iy, 0).y - roi.center.y);
    if (d <= best) {
      best = d;
      best_iy = iy;
    }
  }

  const double a = spec.rotation_deg * cra::kPi / 180.0;
  std::size_t marked = 0;
  for (std::size_t iy = 0; iy < roi.ny; ++iy)
    for (std::size_t iz = 0; iz < roi.nz; ++iz)
      for (std::size_t ix = 0; ix < roi.nx; ++ix) {
        cra::Vec3 p = roi.voxel_center(ix, iy, iz) - roi.center;
        double lx = std::cos(a) * p.x + std::sin(a) * p.z;
        double lz = -std::sin(a) * p.x + std::cos(a) * p.z;
        bool in_bar = std::abs(lx) <= 100.0 && std::abs(lz) <= 25.0;
        bool in_stem = std::abs(lx) <= 25.0 && std::abs(lz + 100.0) <= 75.0;
        bool expected = iy == best_iy && (in_bar || in_stem);
        bool got = vol.values(static_cast<Eigen::Index>(roi.index(ix, iy, iz))) != cra::Complex{0.0, 0.0};
        REQUIRE(got == expected);
        if (got) ++marked;
      }
  REQUIRE(marked > 100);
}

TEST_CASE("t-shape depth selects voxel planes", "[scene]") {
  cra::RoIGrid roi = cra::build_roi({{350.0, 1000.0, 0.0}, {300.0, 210.0, 300.0}, {6.0, 30.0, 6.0}});
  cra::TargetSpec spec;
  spec.bar_length = 150.0, spec.bar_width = 48.0;
  spec.stem_length = 102.0, spec.stem_width = 48.0;

  auto occupied_planes = [&](const cra::ReflectivityVolume& vol) {
    std::set<std::size_t> planes;
    for (std::size_t iy = 0; iy < roi.ny; ++iy)
      for (std::size_t iz = 0; iz < roi.nz; ++iz)
        for (std::size_t ix = 0; ix < roi.nx; ++ix)
          if (vol.values(static_cast<Eigen::Index>(roi.index(ix, iy, iz))) != cra::Complex{0.0, 0.0})
            planes.insert(iy);
    return planes;
  };

  REQUIRE(occupied_planes(cra::rasterize_target(spec, roi)) == std::set<std::size_t>{3});

  // A 60 mm window around the center plane includes the neighbors whose
  // centers sit exactly on the +-30 mm boundary.
  spec.depth = 60.0;
  REQUIRE(occupied_planes(cra::rasterize_target(spec, roi)) == std::set<std::size_t>{2, 3, 4});

  spec.depth = 0.0;
  spec.offset = {250.0, 0.0, 0.0};
  REQUIRE_THROWS_WITH(cra::rasterize_target(spec, roi), ContainsSubstring("outside the RoI"));
}

TEST_CASE("noiseless synthesis is the exact forward product", "[scene]") {
  cra::SensingMatrix H = random_sensing(6, 4, 21);
  cra::ReflectivityVolume u;
  u.roi = cra::build_roi({{0.0, 0.0, 0.0}, {4.0, 1.0, 1.0}, {1.0, 1.0, 1.0}});
  u.values = random_matrix(4, 1, 22).col(0);

  cra::MeasurementVector g = cra::synthesize_measurements(H, u, std::numeric_limits<double>::infinity(), 9);
  Eigen::VectorXcd expected = H.entries * u.values;
  REQUIRE((g.values - expected).norm() == 0.0);
  REQUIRE(g.row_index.size() == 6);
  REQUIRE(std::isinf(g.snr_db));

  u.values.setZero();
  cra::MeasurementVector dark = cra::synthesize_measurements(H, u, 30.0, 9);
  REQUIRE(dark.values.norm() == 0.0);  // zero signal leaves nothing to scale noise against

  cra::ReflectivityVolume wrong;
  wrong.values = Eigen::VectorXcd::Zero(5);
  REQUIRE_THROWS_WITH(cra::synthesize_measurements(H, wrong, 30.0, 9), ContainsSubstring("columns"));
}

TEST_CASE("noisy synthesis hits the requested snr on average", "[scene]") {
  cra::SensingMatrix H = random_sensing(20, 10, 31);
  cra::ReflectivityVolume u;
  u.values = random_matrix(10, 1, 32).col(0);

  Eigen::VectorXcd clean = H.entries * u.values;
  const double signal = clean.squaredNorm();
  const double target_db = 30.0;

  double mean_db = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    cra::MeasurementVector g = cra::synthesize_measurements(H, u, target_db, 1000 + static_cast<std::uint64_t>(t));
    double noise = (g.values - clean).squaredNorm();
    REQUIRE(noise > 0.0);
    mean_db += 10.0 * std::log10(signal / noise);
  }
  mean_db /= trials;
  REQUIRE_THAT(mean_db, WithinAbs(target_db, 1.0));
}

TEST_CASE("noise is seed-deterministic and decorrelated across seeds", "[scene]") {
  cra::SensingMatrix H = random_sensing(2000, 2, 41);
  cra::ReflectivityVolume u;
  u.values = random_matrix(2, 1, 42).col(0);
  Eigen::VectorXcd clean = H.entries * u.values;

  cra::MeasurementVector a1 = cra::synthesize_measurements(H, u, 20.0, 101);
  cra::MeasurementVector a2 = cra::synthesize_measurements(H, u, 20.0, 101);
  REQUIRE((a1.values - a2.values).norm() == 0.0);

  cra::MeasurementVector b = cra::synthesize_measurements(H, u, 20.0, 202);
  Eigen::VectorXcd na = a1.values - clean;
  Eigen::VectorXcd nb = b.values - clean;
  REQUIRE((na - nb).norm() > 0.0);
  double corr = std::abs(na.dot(nb)) / (na.norm() * nb.norm());
  REQUIRE(corr < 0.05);
}
