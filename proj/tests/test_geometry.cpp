#include <cmath>

#include <gtest/gtest.h>

#include "cmdp/geometry.hpp"

namespace cmdp {
namespace {

TEST(Angles, WrapKeepsHalfOpenRange) {
  EXPECT_DOUBLE_EQ(wrap_degrees(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_degrees(359.0), 359.0);
  EXPECT_DOUBLE_EQ(wrap_degrees(360.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_degrees(-90.0), 270.0);
  EXPECT_DOUBLE_EQ(wrap_degrees(725.0), 5.0);
}

TEST(Angles, DifferenceIsSignedShortestArc) {
  EXPECT_DOUBLE_EQ(angle_difference(10.0, 350.0), 20.0);
  EXPECT_DOUBLE_EQ(angle_difference(350.0, 10.0), -20.0);
  EXPECT_DOUBLE_EQ(angle_difference(90.0, 90.0), 0.0);
  EXPECT_DOUBLE_EQ(std::abs(angle_difference(0.0, 180.0)), 180.0);
}

TEST(Angles, HeadingVectorMatchesAxes) {
  EXPECT_NEAR(heading_vector(0.0).x, 1.0, 1e-12);
  EXPECT_NEAR(heading_vector(90.0).y, 1.0, 1e-12);
  EXPECT_NEAR(heading_vector(90.0).x, 0.0, 1e-12);
  EXPECT_NEAR(heading_vector(180.0).x, -1.0, 1e-12);
}

TEST(Rects, CenteredAndContains) {
  Rect r = Rect::centered({2.0, 3.0}, 4.0, 2.0);
  EXPECT_EQ(r.min, (Vec2{0.0, 2.0}));
  EXPECT_EQ(r.max, (Vec2{4.0, 4.0}));
  EXPECT_EQ(r.center(), (Vec2{2.0, 3.0}));
  EXPECT_TRUE(r.contains({0.0, 2.0}));
  EXPECT_FALSE(r.contains({4.1, 3.0}));
  EXPECT_DOUBLE_EQ(r.half_diagonal(), 0.5 * std::hypot(4.0, 2.0));
}

TEST(Rays, CircleEntryAndInsideExit) {
  Ray r{{0.0, 0.0}, {1.0, 0.0}};
  auto hit = ray_circle(r, {5.0, 0.0}, 1.0);
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(*hit, 4.0, 1e-12);

  Ray inside{{5.0, 0.0}, {1.0, 0.0}};
  auto exit = ray_circle(inside, {5.0, 0.0}, 1.0);
  ASSERT_TRUE(exit.has_value());
  EXPECT_NEAR(*exit, 1.0, 1e-12);

  EXPECT_FALSE(ray_circle(r, {5.0, 3.0}, 1.0).has_value());
  Ray away{{0.0, 0.0}, {-1.0, 0.0}};
  EXPECT_FALSE(ray_circle(away, {5.0, 0.0}, 1.0).has_value());
}

TEST(Rays, RectEntryDistance) {
  Ray r{{0.0, 0.5}, {1.0, 0.0}};
  auto hit = ray_rect(r, {{2.0, 0.0}, {3.0, 1.0}});
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(*hit, 2.0, 1e-12);
  EXPECT_FALSE(ray_rect(r, {{2.0, 2.0}, {3.0, 3.0}}).has_value());
}

TEST(Rays, DiagonalRectHit) {
  Vec2 dir = Vec2{1.0, 1.0}.normalized();
  Ray r{{0.0, 0.0}, dir};
  auto hit = ray_rect(r, {{1.0, 1.0}, {2.0, 2.0}});
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(*hit, std::sqrt(2.0), 1e-12);
}

TEST(Rays, BoundsExitFromInside) {
  Rect bounds{{0.0, 0.0}, {10.0, 10.0}};
  Ray r{{5.0, 5.0}, {1.0, 0.0}};
  auto hit = ray_bounds_exit(r, bounds);
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(*hit, 5.0, 1e-12);

  Ray up{{5.0, 5.0}, {0.0, 1.0}};
  EXPECT_NEAR(*ray_bounds_exit(up, bounds), 5.0, 1e-12);
}

TEST(Circles, OverlapIsStrict) {
  EXPECT_TRUE(circles_overlap({0.0, 0.0}, 1.0, {1.5, 0.0}, 1.0));
  EXPECT_FALSE(circles_overlap({0.0, 0.0}, 1.0, {2.0, 0.0}, 1.0));  // tangent
  EXPECT_FALSE(circles_overlap({0.0, 0.0}, 1.0, {3.0, 0.0}, 1.0));
}

}  // namespace
}  // namespace cmdp
