#include <catch2/catch_amalgamated.hpp>

#include "pcadv/metrics.hpp"
#include "pcadv/point_cloud.hpp"
#include "pcadv/rng.hpp"

#include "oracles.hpp"

using namespace pcadv;

namespace {

PointCloud cloud(std::initializer_list<Vec3> pts) { return PointCloud{std::vector<Vec3>(pts)}; }

}  // namespace

TEST_CASE("normalize_unit_ball") {
  SECTION("already normalized cloud is unchanged") {
    const PointCloud c = cloud({{-1, 0, 0}, {1, 0, 0}});
    const PointCloud out = normalize_unit_ball(c);
    CHECK(out.points[0] == Vec3{-1, 0, 0});
    CHECK(out.points[1] == Vec3{1, 0, 0});
  }
  SECTION("centers and scales") {
    const PointCloud out = normalize_unit_ball(cloud({{0, 0, 0}, {0, 0, 2}}));
    CHECK(out.points[0].z == Catch::Approx(-1.0));
    CHECK(out.points[1].z == Catch::Approx(1.0));
  }
  SECTION("degenerate cloud is rejected") {
    CHECK_THROWS_AS(normalize_unit_ball(cloud({{5, 5, 5}, {5, 5, 5}, {5, 5, 5}})),
                    std::invalid_argument);
    CHECK_THROWS_AS(normalize_unit_ball(PointCloud{}), std::invalid_argument);
  }
  SECTION("invariants on random clouds") {
    Rng rng(42);
    for (int rep = 0; rep < 20; ++rep) {
      const PointCloud out = normalize_unit_ball(oracle::random_cloud(rng, 40, 7.0));
      CHECK(out.centroid().norm() < 1e-6);
      CHECK(std::abs(out.max_norm() - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("rigid transforms") {
  SECTION("zero transform is the identity") {
    Rng rng(7);
    const PointCloud c = oracle::random_cloud(rng, 16);
    const PointCloud out = apply_transform(c, RigidTransform{});
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(out.points[i] == c.points[i]);
  }
  SECTION("pi rotation about z") {
    const PointCloud out =
        apply_transform(cloud({{1, 0, 0}}), RigidTransform{{0, 0, M_PI}, {}});
    CHECK(out.points[0].x == Catch::Approx(-1.0).margin(1e-9));
    CHECK(std::abs(out.points[0].y) < 1e-9);
  }
  SECTION("rotation matrices are orthonormal") {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
      const Vec3 w{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
      const Mat3 r = rotation_matrix(w);
      const Mat3 rt = r.transposed();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double dot = 0;
          for (int k = 0; k < 3; ++k) dot += r.m[i][k] * rt.m[k][j];
          CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-9);
        }
    }
  }
  SECTION("pairwise distances preserved") {
    Rng rng(13);
    const PointCloud c = oracle::random_cloud(rng, 12);
    const RigidTransform t{{0.3, -1.2, 2.0}, {0.5, -0.25, 4.0}};
    const PointCloud out = apply_transform(c, t);
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j)
        CHECK(std::abs(distance(out.points[i], out.points[j]) -
                       distance(c.points[i], c.points[j])) < 1e-9);
  }
  SECTION("rotation jacobian matches finite differences") {
    Rng rng(17);
    for (int rep = 0; rep < 30; ++rep) {
      const double scale = rep % 3 == 0 ? 1e-5 : 2.0;  // exercise the small-angle series
      const Vec3 w{rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                   rng.uniform(-scale, scale)};
      const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      Mat3 jac;
      rotate_with_jacobian(w, p, &jac);
      for (int d = 0; d < 3; ++d) {
        Vec3 wp = w, wm = w;
        wp[d] += 1e-6;
        wm[d] -= 1e-6;
        const Vec3 fd = (rotate_with_jacobian(wp, p, nullptr) -
                         rotate_with_jacobian(wm, p, nullptr)) /
                        2e-6;
        for (int r = 0; r < 3; ++r) CHECK(jac.m[r][d] == Catch::Approx(fd[r]).margin(2e-5));
      }
    }
  }
}

TEST_CASE("lp perturbation norm") {
  const PointCloud a = cloud({{0, 0, 0}});
  CHECK(lp_perturbation(a, a).value == 0.0);
  CHECK(lp_perturbation(a, cloud({{3, 4, 0}})).value == Catch::Approx(5.0));
  CHECK(lp_perturbation(cloud({{0, 0, 0}, {1, 1, 1}}),
                        cloud({{1, 0, 0}, {1, 2, 1}}))
            .value == Catch::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(lp_perturbation(a, cloud({{0, 0, 0}, {1, 0, 0}})), std::invalid_argument);
}

TEST_CASE("hausdorff distance") {
  const PointCloud s = cloud({{0, 0, 0}, {1, 0, 0}});
  SECTION("subset gives zero") { CHECK(hausdorff(s, cloud({{1, 0, 0}})).value == 0.0); }
  SECTION("worked example") {
    CHECK(hausdorff(s, cloud({{0, 0, 0.1}, {0.5, 0, 0}})).value == Catch::Approx(0.25));
  }
  SECTION("single point pair gives squared distance") {
    CHECK(hausdorff(cloud({{0, 0, 0}}), cloud({{0, 0, 0.3}})).value == Catch::Approx(0.09));
  }
  SECTION("one-sided asymmetry witness") {
    const PointCloud a = cloud({{0, 0, 0}});
    const PointCloud b = cloud({{0, 0, 0}, {5, 0, 0}});
    CHECK(hausdorff(a, b).value == Catch::Approx(25.0));
    CHECK(hausdorff(b, a).value == 0.0);
  }
  SECTION("empty input rejected") {
    CHECK_THROWS_AS(hausdorff(PointCloud{}, s), std::invalid_argument);
  }
}

TEST_CASE("chamfer measurement") {
  const PointCloud s = cloud({{0, 0, 0}, {1, 0, 0}});
  CHECK(chamfer(s, cloud({{0, 0, 0}, {1, 0, 0}})).value == 0.0);
  CHECK(chamfer(s, cloud({{0, 0, 0.1}, {0.5, 0, 0}})).value == Catch::Approx(0.13));
  CHECK(chamfer(cloud({{0, 0, 0}}), cloud({{0, 0.4, 0}})).value == Catch::Approx(0.16));
}

TEST_CASE("count added") {
  const PointCloud s = cloud({{0, 0, 0}, {1, 0, 0}});
  const PointCloud added = cloud({{0, 0, 0.1}, {0.5, 0, 0}});
  CHECK(count_added(s, s, 0.01).value == 0.0);
  CHECK(count_added(s, added, 0.01).value == 2.0);
  CHECK(count_added(s, added, 0.2).value == 1.0);
}

TEST_CASE("farthest distance") {
  CHECK(farthest_distance(cloud({{3, 2, 1}})).value == 0.0);
  CHECK(farthest_distance(cloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}})).value ==
        Catch::Approx(std::sqrt(2.0)));
  SECTION("homogeneous under scaling") {
    Rng rng(23);
    PointCloud c = oracle::random_cloud(rng, 10);
    const double base = farthest_distance(c).value;
    for (auto& p : c.points) p *= 3.5;
    CHECK(farthest_distance(c).value == Catch::Approx(3.5 * base));
  }
}

TEST_CASE("metrics agree with exhaustive oracles") {
  Rng rng(31);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(64);
    const std::size_t m = 1 + rng.uniform_index(64);
    const PointCloud s = oracle::random_cloud(rng, n);
    const PointCloud sp = oracle::random_cloud(rng, m);
    CHECK(hausdorff(s, sp).value == Catch::Approx(oracle::hausdorff_ref(s, sp)).epsilon(0).margin(1e-12));
    CHECK(chamfer(s, sp).value == Catch::Approx(oracle::chamfer_ref(s, sp)).epsilon(0).margin(1e-12));
    CHECK(farthest_distance(sp).value ==
          Catch::Approx(oracle::farthest_ref(sp)).epsilon(0).margin(1e-12));
    CHECK(count_added(s, sp, 0.25).value == oracle::count_added_ref(s, sp, 0.25));
    if (n == m)
      CHECK(lp_perturbation(s, sp).value ==
            Catch::Approx(oracle::l2_ref(s, sp)).epsilon(0).margin(1e-12));
  }
}

TEST_CASE("metric properties") {
  Rng rng(37);
  SECTION("chamfer <= hausdorff, nonnegative") {
    for (int rep = 0; rep < 30; ++rep) {
      const PointCloud s = oracle::random_cloud(rng, 20);
      const PointCloud sp = oracle::random_cloud(rng, 15);
      const double h = hausdorff(s, sp).value;
      const double c = chamfer(s, sp).value;
      CHECK(c >= 0.0);
      CHECK(c <= h);
    }
  }
  SECTION("chamfer zero iff every adversarial point coincides with an original") {
    const PointCloud s = cloud({{0, 0, 0}, {1, 0, 0}});
    CHECK(chamfer(s, cloud({{1, 0, 0}, {0, 0, 0}, {1, 0, 0}})).value == 0.0);
    CHECK(chamfer(s, cloud({{1, 0, 0}, {0, 1e-8, 0}})).value > 0.0);
  }
  SECTION("scale equivariance") {
    for (int rep = 0; rep < 20; ++rep) {
      PointCloud s = oracle::random_cloud(rng, 12);
      PointCloud sp = oracle::random_cloud(rng, 12);
      const double c = 2.75;
      const double h0 = hausdorff(s, sp).value, c0 = chamfer(s, sp).value;
      const double l0 = lp_perturbation(s, sp).value, f0 = farthest_distance(sp).value;
      for (auto& p : s.points) p *= c;
      for (auto& p : sp.points) p *= c;
      CHECK(hausdorff(s, sp).value == Catch::Approx(c * c * h0));
      CHECK(chamfer(s, sp).value == Catch::Approx(c * c * c0));
      CHECK(lp_perturbation(s, sp).value == Catch::Approx(c * l0));
      CHECK(farthest_distance(sp).value == Catch::Approx(c * f0));
    }
  }
}

TEST_CASE("metric gradients") {
  SECTION("chamfer point-pair example") {
    const double d = 0.37;
    const auto g = metric_gradient(MetricKind::Chamfer, cloud({{0, 0, 0}}), cloud({{0, 0, d}}));
    CHECK(g[0].z == Catch::Approx(2.0 * d));
    CHECK(g[0].x == 0.0);
  }
  SECTION("l2 gradient is zero at coincidence") {
    const PointCloud s = cloud({{0.5, 0.25, -1}, {0, 1, 0}});
    for (const auto& g : metric_gradient(MetricKind::L2Norm, s, s)) {
      CHECK(g.x == 0.0);
      CHECK(g.y == 0.0);
      CHECK(g.z == 0.0);
    }
  }
  SECTION("count metrics are not differentiable") {
    const PointCloud s = cloud({{0, 0, 0}});
    CHECK_THROWS_AS(metric_gradient(MetricKind::CountAdded, s, s), std::invalid_argument);
    CHECK_THROWS_AS(metric_gradient(MetricKind::ClusterCount, s, s), std::invalid_argument);
  }
  SECTION("matches central finite differences on random sets") {
    Rng rng(41);
    const MetricKind kinds[] = {MetricKind::L2Norm, MetricKind::Hausdorff, MetricKind::Chamfer,
                                MetricKind::FarthestDistance};
    for (int rep = 0; rep < 25; ++rep) {
      const PointCloud s = oracle::random_cloud(rng, 8);
      const PointCloud sp = oracle::random_cloud(rng, 8);
      for (MetricKind kind : kinds) {
        const auto analytic = metric_gradient(kind, s, sp);
        std::vector<double> flat_analytic;
        for (const auto& g : analytic) {
          flat_analytic.push_back(g.x);
          flat_analytic.push_back(g.y);
          flat_analytic.push_back(g.z);
        }
        std::vector<double> x;
        for (const auto& p : sp.points) {
          x.push_back(p.x);
          x.push_back(p.y);
          x.push_back(p.z);
        }
        auto value = [&](const std::vector<double>& v) {
          PointCloud c;
          for (std::size_t i = 0; i < v.size(); i += 3)
            c.points.push_back({v[i], v[i + 1], v[i + 2]});
          switch (kind) {
            case MetricKind::L2Norm: return lp_perturbation(s, c).value;
            case MetricKind::Hausdorff: return hausdorff(s, c).value;
            case MetricKind::Chamfer: return chamfer(s, c).value;
            default: return farthest_distance(c).value;
          }
        };
        const auto fd = oracle::central_diff(value, x);
        CHECK(oracle::max_rel_err(flat_analytic, fd) < 1e-4);
      }
    }
  }
}
