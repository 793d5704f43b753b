#include "boundsplat/core/bound.hpp"
#include "boundsplat/core/camera.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/core/primitives.hpp"
#include "boundsplat/core/types.hpp"

#include "../support/oracles.hpp"
#include "../support/scenes.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace boundsplat;

namespace {

BoundAsset one_triangle(const Vec3& a, const Vec3& b, const Vec3& c, std::vector<double> weights) {
    BoundAsset asset;
    asset.mesh.vertices = {a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2]};
    asset.mesh.triangles = {{0, 1, 2}};
    asset.per_triangle = weights.size() / 3;
    asset.template_weights = std::move(weights);
    const std::size_t n = asset.size();
    asset.colors.assign(3 * n, 0.5);
    asset.opacity_logits.assign(n, 0.0);
    asset.rotations2d.assign(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) asset.rotations2d[2 * i] = 1.0;
    asset.log_scales.assign(3 * n, -2.0);
    return asset;
}

Vec3 random_convex(std::mt19937_64& rng) {
    Vec3 w(scenes::uniform(rng, 0, 1), scenes::uniform(rng, 0, 1), scenes::uniform(rng, 0, 1));
    return w / w.sum();
}

} // namespace

TEST(BoundPositions, CentroidWeights) {
    const auto a = one_triangle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto p = realize_bound_positions(a);
    EXPECT_NEAR(p[0], 1.0 / 3, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3, 1e-15);
    EXPECT_EQ(p[2], 0.0);
}

TEST(BoundPositions, VertexWeightsGiveVertexExactly) {
    const Vec3 v0(0.3, -1.7, 2.2);
    const auto a = one_triangle(v0, {1, 0, 0}, {0, 1, 0}, {1.0, 0.0, 0.0});
    const auto p = realize_bound_positions(a);
    EXPECT_EQ(Vec3(p[0], p[1], p[2]), v0);
}

TEST(BoundPositions, BarycentricRoundTrip) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 a = Vec3::Random(), b = Vec3::Random(), c = Vec3::Random();
        const Vec3 w = random_convex(rng);
        const auto asset = one_triangle(a, b, c, {w[0], w[1], w[2]});
        const auto p = realize_bound_positions(asset);
        const Vec3 bc = oracle::barycentric(Vec3(p[0], p[1], p[2]), a, b, c);
        EXPECT_LT((bc - w).norm(), 1e-9);
        EXPECT_GE(bc.minCoeff(), -1e-9);
    }
}

TEST(BoundColors, BlendFromMesh) {
    auto a = one_triangle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0, 0.0, 0.0});
    a.mesh.colors = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    a.colors.assign(6, 0.5);
    a.opacity_logits.assign(2, 0.0);
    a.rotations2d = {1, 0, 1, 0};
    a.log_scales.assign(6, -2.0);
    const auto c = realize_bound_colors(a, true);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(c[k], 1.0 / 3, 1e-15);
    EXPECT_EQ(Vec3(c[3], c[4], c[5]), Vec3(1, 0, 0));
    EXPECT_EQ(realize_bound_colors(a, false), a.colors);
}

TEST(BoundColors, MatchesScalarLoop) {
    std::mt19937_64 rng(2);
    auto a = scenes::random_bound_asset(rng, 6);
    for (double& c : a.mesh.colors) c = scenes::uniform(rng, 0, 1);
    const auto c = realize_bound_colors(a, true);
    for (std::size_t t = 0; t < a.cluster_count(); ++t)
        for (std::size_t k = 0; k < 6; ++k)
            for (int ch = 0; ch < 3; ++ch) {
                double expect = 0.0;
                for (int j = 0; j < 3; ++j)
                    expect += a.template_weights[3 * k + j] * a.mesh.colors[3 * a.mesh.triangles[t][j] + ch];
                EXPECT_NEAR(c[3 * (t * 6 + k) + ch], expect, 1e-15);
            }
}

TEST(BoundTemplates, ConvexAndShared) {
    for (std::size_t n : {1u, 3u, 6u}) {
        const auto w = barycentric_template(n);
        ASSERT_EQ(w.size(), 3 * n);
        for (std::size_t k = 0; k < n; ++k) {
            EXPECT_NEAR(w[3 * k] + w[3 * k + 1] + w[3 * k + 2], 1.0, 1e-12);
            EXPECT_GE(std::min({w[3 * k], w[3 * k + 1], w[3 * k + 2]}), 0.0);
        }
    }
    EXPECT_THROW(barycentric_template(4), ValidationError);
}

TEST(BoundPositions, RigidEquivariance) {
    std::mt19937_64 rng(3);
    const auto a = scenes::random_bound_asset(rng, 6);
    const Mat3 r = oracle::rotation_of(0.3, -0.5, 0.7, 0.2);
    const Vec3 t(0.4, -1.1, 2.0);
    std::vector<double> moved(a.mesh.vertices.size());
    for (std::size_t i = 0; i < a.mesh.vertex_count(); ++i) row<3>(moved, i) = r * a.mesh.vertex(i) + t;
    const auto p0 = realize_bound_positions(a);
    const auto p1 = realize_bound_positions(a, moved);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_LT((Vec3(row<3>(p1, i)) - (r * Vec3(row<3>(p0, i)) + t)).norm(), 1e-9);
}

TEST(BoundPositions, JacobianIsTheWeights) {
    std::mt19937_64 rng(4);
    auto a = scenes::random_bound_asset(rng, 3);
    const double h = 1e-4;
    for (std::size_t v = 0; v < a.mesh.vertices.size(); ++v) {
        auto plus = a.mesh.vertices, minus = a.mesh.vertices;
        plus[v] += h;
        minus[v] -= h;
        const auto pp = realize_bound_positions(a, plus), pm = realize_bound_positions(a, minus);
        const std::size_t vid = v / 3, axis = v % 3;
        for (std::size_t t = 0; t < a.cluster_count(); ++t)
            for (std::size_t k = 0; k < 3; ++k) {
                double expect = 0.0;
                for (int j = 0; j < 3; ++j)
                    if (a.mesh.triangles[t][j] == vid) expect += a.template_weights[3 * k + j];
                for (std::size_t c = 0; c < 3; ++c) {
                    const std::size_t idx = 3 * (t * 3 + k) + c;
                    const double fd = (pp[idx] - pm[idx]) / (2 * h);
                    EXPECT_NEAR(fd, c == axis ? expect : 0.0, 1e-6 * std::max(1.0, expect));
                }
            }
    }
}

TEST(Rotations, RenormalizationIsIdempotent) {
    std::mt19937_64 rng(5);
    auto g = scenes::random_cloud(rng, 20);
    for (double& q : g.rotations) q *= 3.0;
    g.renormalize();
    const auto once = g.rotations;
    g.renormalize();
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(g.rotations[i], once[i], 1e-15);
    auto a = scenes::random_bound_asset(rng, 3);
    for (double& r : a.rotations2d) r *= 0.2;
    a.renormalize();
    const auto r1 = a.rotations2d;
    a.renormalize();
    for (std::size_t i = 0; i < r1.size(); ++i) EXPECT_NEAR(a.rotations2d[i], r1[i], 1e-15);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(Vec2(row<2>(a.rotations2d, i)).norm(), 1.0, 1e-12);
}

TEST(Surfel, CovarianceInTangentFrame) {
    const Mat3 cov = surfel_to_covariance(Vec4(1, 0, 0, 0), Vec2(2, 3));
    EXPECT_TRUE(cov.isApprox(Vec3(4, 9, 0).asDiagonal().toDenseMatrix()));
}

TEST(Surfel, CovarianceEigenvalues) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec4 q = scenes::random_quaternion(rng);
        const Vec2 s(scenes::uniform(rng, 0.1, 2), scenes::uniform(rng, 0.1, 2));
        Eigen::SelfAdjointEigenSolver<Mat3> es(surfel_to_covariance(q, s));
        std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + 3);
        std::vector<double> expect{0.0, s[0] * s[0], s[1] * s[1]};
        std::sort(ev.begin(), ev.end());
        std::sort(expect.begin(), expect.end());
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(ev[k], expect[k], 1e-9);
    }
    EXPECT_THROW(surfel_to_covariance(Vec4(std::nan(""), 0, 0, 0), Vec2(1, 1)), NumericError);
}

TEST(Surfel, FlattenDropsSmallestAxis) {
    const auto f = flatten_gaussian(Vec3::Zero(), Vec3(1, 2, 3), Vec4(1, 0, 0, 0));
    EXPECT_EQ(f.scale, Vec2(2, 3));
    const Mat3 r = quat_to_rotation(f.rotation);
    EXPECT_LT((r.col(2) - Vec3::UnitX()).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
}

TEST(Mesh, ValidationCatchesBadInput) {
    ColoredMesh m = icosphere(1);
    EXPECT_NO_THROW(validate_mesh(m));
    auto bad = m;
    bad.triangles[3][1] = 9999;
    EXPECT_THROW(validate_mesh(bad), ValidationError);
    auto degenerate = m;
    degenerate.triangles.push_back({0, 0, 1});
    EXPECT_THROW(validate_mesh(degenerate), ValidationError);
    EXPECT_EQ(validate_mesh(degenerate, true).degenerate_triangles, 1u);
    auto nonfinite = m;
    nonfinite.vertices[5] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(validate_mesh(nonfinite), NumericError);
}

TEST(Mesh, NonManifoldIsFlaggedNotRejected) {
    ColoredMesh m;
    m.vertices = {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1};
    m.triangles = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
    const auto report = validate_mesh(m);
    EXPECT_EQ(report.non_manifold_edges, 1u);
}

TEST(Primitives, ClosedAndOutward) {
    const auto s = icosphere(3);
    EXPECT_EQ(s.vertex_count(), 642u);
    EXPECT_EQ(s.triangle_count(), 1280u);
    EXPECT_GT(signed_volume(s), 4.0);
    EXPECT_EQ(inspect_mesh(s).boundary_edges, 0u);
    const auto b = box_mesh(Vec3(0.5, 0.5, 0.5), 3);
    EXPECT_NEAR(signed_volume(b), 1.0, 1e-12);
    EXPECT_EQ(inspect_mesh(b).boundary_edges, 0u);
}

TEST(Camera, OrbitLooksAtOrigin) {
    const auto cam = CameraPose::orbit(4.5, 37.0, 120.0, 45.0, 64, 32);
    EXPECT_NEAR(cam.center().norm(), 4.5, 1e-12);
    const Vec3 o = cam.to_camera(Vec3::Zero());
    EXPECT_NEAR(o[0], 0.0, 1e-12);
    EXPECT_NEAR(o[1], 0.0, 1e-12);
    EXPECT_NEAR(o[2], 4.5, 1e-12);
    EXPECT_NEAR(cam.rotation.determinant(), 1.0, 1e-12);
    EXPECT_THROW(CameraPose::orbit(0.0, 0, 90, 45, 8, 8), ValidationError);
}

TEST(Camera, MovedWithKeepsRelativePose) {
    const auto cam = CameraPose::orbit(4.0, 20.0, 70.0, 45.0, 16, 16);
    RigidTransform m{oracle::rotation_of(0.9, 0.1, -0.3, 0.2), Vec3(0.5, -0.2, 1.0)};
    const auto moved = cam.moved_with(m);
    const Vec3 p(0.3, -0.4, 0.1);
    EXPECT_LT((moved.to_camera(m.apply(p)) - cam.to_camera(p)).norm(), 1e-12);
}

TEST(Image, DownsampleTransposeIsAdjoint) {
    std::mt19937_64 rng(7);
    const Image x = scenes::random_weights(rng, 16, 8), y = scenes::random_weights(rng, 8, 4);
    const Image dx = downsample_area(x, 2), ty = downsample_area_transpose(y, 2);
    EXPECT_NEAR(oracle::weighted_sum(dx, y), oracle::weighted_sum(x, ty), 1e-12);
}

TEST(Image, Psnr) {
    Image a(4, 4, 3, 0.5), b(4, 4, 3, 0.6);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Cloud, ValidateRejectsBadShapes) {
    std::mt19937_64 rng(8);
    auto g = scenes::random_cloud(rng, 4);
    EXPECT_NO_THROW(g.validate());
    g.colors.pop_back();
    EXPECT_THROW(g.validate(), ValidationError);
    auto s = scenes::random_surfels(rng, 4);
    s.rotations.assign(16, 0.0);
    EXPECT_THROW(s.validate(), ValidationError);
}
