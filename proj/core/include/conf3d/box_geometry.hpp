/* Copyright 2026 The conf3d Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Oriented 3D boxes in the KITTI camera frame and their overlap measures.
//
// Camera frame: X right, Y down, Z forward. A box is anchored at the center
// of its bottom face, so it spans [Y - H, Y] vertically. The bird's-eye view
// (BEV) is the X-Z plane.

#ifndef CONF3D_BOX_GEOMETRY_HPP_
#define CONF3D_BOX_GEOMETRY_HPP_

#include <array>
#include <span>
#include <vector>

namespace conf3d {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

// Metric object size (height, width, length).
struct Shape3 {
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;

  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct Box3D {
  Vec3 center;    // bottom-face center, meters
  Shape3 shape;   // meters
  double yaw = 0.0;  // rotation about the camera Y axis, radians

  double volume() const { return shape.h * shape.w * shape.l; }
  double bev_area() const { return shape.w * shape.l; }

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

// Point in the BEV plane: (x, z) in meters.
struct Point2 {
  double x = 0.0;
  double z = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Convex polygon, counter-clockwise in the (x, z) plane.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;
  explicit ConvexPolygon(std::vector<Point2> vertices)
      : vertices_(std::move(vertices)) {}

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  bool empty() const { return vertices_.size() < 3; }

  // Shoelace area; non-negative for CCW input.
  double area() const;

 private:
  std::vector<Point2> vertices_;
};

inline constexpr double kGeomEps = 1e-12;
inline constexpr double kEarthRadiusM = 6371000.0;

// Wraps an angle into [-pi, pi].
double wrap_angle(double a);

// BEV footprint: the W x L rectangle around (X, Z) rotated by yaw. L runs
// along the heading direction (cos yaw, -sin yaw) as in the KITTI devkit.
ConvexPolygon bev_corners(const Box3D& box);

// Area of the intersection of two convex polygons (Sutherland-Hodgman).
double polygon_intersection_area(const ConvexPolygon& a, const ConvexPolygon& b);

// Overlap of the vertical extents [Y - H, Y].
double vertical_overlap(const Box3D& a, const Box3D& b);

double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

// Axis-aligned image-plane box in pixels.
struct BBox2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double height() const { return bottom - top; }
  double width() const { return right - left; }
  double area() const;

  friend bool operator==(const BBox2D&, const BBox2D&) = default;
};

// Axis-aligned 2D IoU; used for DontCare regions and 2D gating.
double iou_2d(const BBox2D& a, const BBox2D& b);
// Intersection over the area of `a`.
double overlap_2d(const BBox2D& a, const BBox2D& b);

struct LatLon {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

// Great-circle distance on a sphere of radius kEarthRadiusM.
double haversine_m(LatLon p, LatLon q);

}  // namespace conf3d

#endif  // CONF3D_BOX_GEOMETRY_HPP_
