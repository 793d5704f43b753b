#include "boundsplat/bind/bind.hpp"
#include "boundsplat/core/primitives.hpp"
#include "boundsplat/raster/render.hpp"

#include "../support/oracles.hpp"
#include "../support/scenes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace boundsplat;

namespace {

ColoredMesh painted_sphere(int subdiv) {
    ColoredMesh m = icosphere(subdiv, 1.0);
    m.colors.resize(m.vertices.size());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        const Vec3 p = m.vertex(i);
        for (int k = 0; k < 3; ++k) m.colors[3 * i + k] = 0.5 + 0.4 * p[k];
    }
    return m;
}

std::vector<double> moved_vertices(const std::vector<double>& v, const RigidTransform& m) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size() / 3; ++i) row<3>(out, i) = m.apply(Vec3(row<3>(v, i)));
    return out;
}

} // namespace

TEST(Build, CountsAndInitialValues) {
    const ColoredMesh m = painted_sphere(1);
    for (std::size_t n : {1u, 3u, 6u}) {
        bind::BindOptions opt;
        opt.per_triangle = n;
        const BoundAsset a = bind::build_bound_asset(m, opt);
        EXPECT_EQ(a.size(), m.triangle_count() * n);
        EXPECT_NO_THROW(a.validate());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(sigmoid(a.opacity_logits[i]), 0.9, 1e-12);
            EXPECT_EQ(a.rotations2d[2 * i], 1.0);
            EXPECT_EQ(a.rotations2d[2 * i + 1], 0.0);
        }
    }
}

TEST(Build, ScalesFollowHostEdgeLength) {
    ColoredMesh m;
    m.vertices = {0, 0, 0, 3, 0, 0, 0, 4, 0};
    m.triangles = {{0, 1, 2}};
    const BoundAsset a = bind::build_bound_asset(m);
    const double e = (3.0 + 4.0 + 5.0) / 3.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(std::exp(a.log_scales[3 * i]), 0.5 * e, 1e-12);
        EXPECT_NEAR(std::exp(a.log_scales[3 * i + 1]), 0.5 * e, 1e-12);
        EXPECT_NEAR(std::exp(a.log_scales[3 * i + 2]), 0.1 * e, 1e-12);
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.colors[3 * i + k], 0.5, 1e-15); // uncolored mesh -> gray
    }
}

TEST(Build, DropsDegenerateTrianglesAndRejectsMostlyDegenerate) {
    ColoredMesh m = painted_sphere(0);
    m.triangles.push_back({0, 0, 1});
    const BoundAsset a = bind::build_bound_asset(m);
    EXPECT_EQ(a.cluster_count(), m.triangle_count() - 1);

    ColoredMesh bad;
    bad.vertices = {0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 0, 0};
    bad.triangles = {{0, 1, 2}, {0, 1, 3}, {1, 3, 0}};
    EXPECT_THROW(bind::build_bound_asset(bad), ValidationError);
}

TEST(Build, InitialRenderResemblesFlatShading) {
    // The oracle is constant per face while bound colors vary inside it, so the gap
    // scales with the color change across a triangle; subdivision 3 keeps it small.
    const ColoredMesh m = painted_sphere(3);
    const BoundAsset a = bind::build_bound_asset(m);
    for (double az : {0.0, 100.0, 230.0}) {
        const auto cam = CameraPose::orbit(3.5, az, 70.0, 45.0, 64, 64);
        Image coverage;
        const Image ref = oracle::flat_shade(m, cam, Vec3::Zero(), &coverage);
        const Image img = raster::render(a, cam).color;
        double dist = 0.0;
        int count = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                if (coverage.at(x, y) == 0.0) continue;
                Vec3 d;
                for (int k = 0; k < 3; ++k) d[k] = img.at(x, y, k) - ref.at(x, y, k);
                dist += d.norm();
                ++count;
            }
        ASSERT_GT(count, 500);
        EXPECT_LT(dist / count, 0.1) << "azimuth " << az;
    }
}

TEST(Groups, TemplateIsNotLearnable) {
    BoundAsset a = bind::build_bound_asset(painted_sphere(0));
    const auto views = bind::learnable_views(a);
    ASSERT_EQ(views.size(), 5u);
    const std::size_t n = a.size();
    const std::vector<std::pair<std::size_t, std::size_t>> shapes{
        {a.mesh.vertex_count(), 3}, {n, 3}, {n, 1}, {n, 2}, {n, 3}};
    for (std::size_t i = 0; i < views.size(); ++i) {
        EXPECT_NE(views[i].values, &a.template_weights);
        EXPECT_EQ(views[i].rows, shapes[i].first);
        EXPECT_EQ(views[i].cols, shapes[i].second);
        EXPECT_EQ(views[i].values->size(), views[i].rows * views[i].cols);
    }
}

TEST(Deform, IdentityFrameReproducesRestCloud) {
    std::mt19937_64 rng(11);
    const BoundAsset a = scenes::random_bound_asset(rng, 3);
    const auto rest = realize_cloud(a);
    const auto posed = bind::apply_deformation(a, a.mesh.vertices);
    EXPECT_EQ(posed.positions, rest.positions);
    EXPECT_EQ(posed.rotations, rest.rotations);
}

TEST(Deform, RigidMotionMovesRenderWithCamera) {
    std::mt19937_64 rng(12);
    const BoundAsset a = scenes::random_bound_asset(rng, 3);
    const RigidTransform m{oracle::rotation_of(0.8, 0.3, -0.4, 0.2), Vec3(0.3, -0.2, 0.5)};
    const auto posed = bind::apply_deformation(a, moved_vertices(a.mesh.vertices, m));
    const auto rest = realize_cloud(a);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_LT((Vec3(row<3>(posed.positions, i)) - m.apply(Vec3(row<3>(rest.positions, i)))).norm(), 1e-9);
        const Mat3 r0 = quat_to_rotation(row<4>(rest.rotations, i));
        const Mat3 r1 = quat_to_rotation(row<4>(posed.rotations, i));
        EXPECT_LT((r1 - m.rotation * r0).norm(), 1e-9);
    }
    const auto cam = CameraPose::orbit(4.0, 30.0, 80.0, 45.0, 48, 48);
    const Image before = raster::render(rest, cam).color;
    const Image after = raster::render(posed, cam.moved_with(m)).color;
    double worst = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) worst = std::max(worst, std::abs(before.data[i] - after.data[i]));
    EXPECT_LT(worst, 1e-6);
}

TEST(Deform, BendAndReturnRestoresCloud) {
    std::mt19937_64 rng(13);
    const BoundAsset a = scenes::random_bound_asset(rng, 3);
    bind::DeformationStream s;
    s.vertex_count = a.mesh.vertex_count();
    s.timestamps = {0.0, 0.5, 1.0};
    auto bent = a.mesh.vertices;
    for (std::size_t i = 0; i < s.vertex_count; ++i) {
        const double z = bent[3 * i + 2];
        bent[3 * i] += 0.3 * z * z;
    }
    s.frames = {a.mesh.vertices, bent, a.mesh.vertices};
    const auto clouds = bind::play(a, s);
    ASSERT_EQ(clouds.size(), 3u);
    for (std::size_t i = 0; i < clouds[0].positions.size(); ++i)
        EXPECT_NEAR(clouds[2].positions[i], clouds[0].positions[i], 1e-12);
    for (std::size_t i = 0; i < clouds[0].rotations.size(); ++i)
        EXPECT_NEAR(clouds[2].rotations[i], clouds[0].rotations[i], 1e-12);
    EXPECT_NE(clouds[1].positions, clouds[0].positions);
}

TEST(Deform, CollapsedTriangleKeepsPreviousRotation) {
    std::mt19937_64 rng(14);
    const BoundAsset a = scenes::random_bound_asset(rng, 3);
    bind::DeformationStream s;
    s.vertex_count = a.mesh.vertex_count();
    s.timestamps = {0.0, 1.0};
    auto collapsed = a.mesh.vertices;
    const auto& tri = a.mesh.triangles[0];
    for (int k = 0; k < 3; ++k) collapsed[3 * tri[1] + k] = collapsed[3 * tri[2] + k] = collapsed[3 * tri[0] + k];
    s.frames = {a.mesh.vertices, collapsed};
    const auto clouds = bind::play(a, s);
    for (std::size_t k = 0; k < a.per_triangle; ++k)
        for (int c = 0; c < 4; ++c) EXPECT_EQ(clouds[1].rotations[4 * k + c], clouds[0].rotations[4 * k + c]);
    for (double v : clouds[1].positions) EXPECT_TRUE(std::isfinite(v));
}

TEST(Deform, StreamValidation) {
    std::mt19937_64 rng(15);
    const BoundAsset a = scenes::random_bound_asset(rng, 3);
    bind::DeformationStream s;
    s.vertex_count = a.mesh.vertex_count() + 1;
    EXPECT_THROW(bind::play(a, s), ValidationError);
    s.vertex_count = a.mesh.vertex_count();
    s.timestamps = {0.0};
    s.frames = {a.mesh.vertices};
    s.frames[0][4] = std::nan("");
    EXPECT_THROW(bind::play(a, s), NumericError);
}

TEST(Deform, BoundRenderMatchesFreeCloudRender) {
    std::mt19937_64 rng(16);
    const BoundAsset a = scenes::random_bound_asset(rng, 6);
    const auto cam = scenes::random_camera(rng, 40, 32);
    const Image bound = raster::render(a, cam).color;
    const Image free = raster::render(realize_cloud(a), cam).color;
    EXPECT_EQ(bound.data, free.data);
}

TEST(Regularizer, LaplacianPenaltyGradient) {
    std::mt19937_64 rng(17);
    const ColoredMesh m = icosphere(1);
    const bind::Laplacian lap(m);
    std::vector<double> v = m.vertices;
    for (double& x : v) x += scenes::uniform(rng, -0.1, 0.1);
    std::vector<double> grad(v.size(), 0.0);
    const double value = bind::laplacian_penalty(lap, v, m.vertices, 0.7, grad);
    EXPECT_GT(value, 0.0);
    const auto fd = oracle::finite_difference(v, [&] {
        std::vector<double> scratch(v.size(), 0.0);
        return bind::laplacian_penalty(lap, v, m.vertices, 0.7, scratch);
    });
    EXPECT_LT(oracle::relative_error(grad, fd), 1e-6);
}

TEST(Regularizer, RigidDisplacementIsFree) {
    const ColoredMesh m = icosphere(1);
    const bind::Laplacian lap(m);
    std::vector<double> shifted = m.vertices;
    for (std::size_t i = 0; i < shifted.size(); i += 3) shifted[i] += 0.25;
    std::vector<double> grad(shifted.size(), 0.0);
    EXPECT_NEAR(bind::laplacian_penalty(lap, shifted, m.vertices, 1.0, grad), 0.0, 1e-20);
    for (double g : grad) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Regularizer, ClampScalesCapsAtHostEdge) {
    BoundAsset a = bind::build_bound_asset(painted_sphere(0));
    for (double& s : a.log_scales) s = 5.0;
    bind::clamp_scales(a, 2.0);
    for (std::size_t t = 0; t < a.cluster_count(); ++t) {
        const auto& tri = a.mesh.triangles[t];
        const double e = mean_edge_length(a.mesh.vertex(tri[0]), a.mesh.vertex(tri[1]), a.mesh.vertex(tri[2]));
        for (std::size_t k = 0; k < 3 * a.per_triangle; ++k)
            EXPECT_NEAR(std::exp(a.log_scales[3 * a.per_triangle * t + k]), 2.0 * e, 1e-9);
    }
}
