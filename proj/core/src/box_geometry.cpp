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

#include "conf3d/box_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace conf3d {
namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

// Intersection of segment p->q with the infinite line through a->b.
Point2 line_intersection(const Point2& p, const Point2& q, const Point2& a,
                         const Point2& b) {
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double denom = dp - dq;
  if (std::abs(denom) < kGeomEps) return p;
  const double t = dp / denom;
  return {p.x + t * (q.x - p.x), p.z + t * (q.z - p.z)};
}

double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi) {
  return std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
}

}  // namespace

double ConvexPolygon::area() const {
  if (vertices_.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const auto& p = vertices_[i];
    const auto& q = vertices_[(i + 1) % vertices_.size()];
    twice += p.x * q.z - q.x * p.z;
  }
  return 0.5 * std::abs(twice);
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

ConvexPolygon bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.shape.l;
  const double hw = 0.5 * box.shape.w;
  // Local (length, width) offsets; rotation maps local x to (c, -s).
  constexpr double kLocal[4][2] = {{1, -1}, {1, 1}, {-1, 1}, {-1, -1}};
  std::vector<Point2> v;
  v.reserve(4);
  for (const auto& k : kLocal) {
    const double lx = k[0] * hl;
    const double lz = k[1] * hw;
    v.push_back({box.center.x + c * lx + s * lz, box.center.z - s * lx + c * lz});
  }
  // Rotation preserves orientation; make sure the order is CCW.
  double twice = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    twice += v[i].x * v[(i + 1) % 4].z - v[(i + 1) % 4].x * v[i].z;
  }
  if (twice < 0.0) std::reverse(v.begin(), v.end());
  return ConvexPolygon(std::move(v));
}

double polygon_intersection_area(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<Point2> output = a.vertices();
  const auto& clip = b.vertices();
  std::vector<Point2> input;
  for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Point2& ca = clip[i];
    const Point2& cb = clip[(i + 1) % clip.size()];
    input.swap(output);
    output.clear();
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Point2& cur = input[j];
      const Point2& prev = input[(j + input.size() - 1) % input.size()];
      const bool cur_in = cross(ca, cb, cur) >= -kGeomEps;
      const bool prev_in = cross(ca, cb, prev) >= -kGeomEps;
      if (cur_in) {
        if (!prev_in) output.push_back(line_intersection(prev, cur, ca, cb));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(line_intersection(prev, cur, ca, cb));
      }
    }
  }
  const double area = ConvexPolygon(std::move(output)).area();
  return std::min({area, a.area(), b.area()});
}

double vertical_overlap(const Box3D& a, const Box3D& b) {
  return interval_overlap(a.center.y - a.shape.h, a.center.y,
                          b.center.y - b.shape.h, b.center.y);
}

// Union terms use the polygon areas rather than W * L so that identical
// boxes give an IoU of exactly 1.
double iou_bev(const Box3D& a, const Box3D& b) {
  const ConvexPolygon pa = bev_corners(a);
  const ConvexPolygon pb = bev_corners(b);
  const double inter = polygon_intersection_area(pa, pb);
  const double uni = pa.area() + pb.area() - inter;
  if (uni < kGeomEps) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double h = vertical_overlap(a, b);
  if (h <= 0.0) return 0.0;
  const ConvexPolygon pa = bev_corners(a);
  const ConvexPolygon pb = bev_corners(b);
  const double inter = polygon_intersection_area(pa, pb) * h;
  // Heights recomputed from the interval endpoints, matching vertical_overlap.
  const double ha = a.center.y - (a.center.y - a.shape.h);
  const double hb = b.center.y - (b.center.y - b.shape.h);
  const double uni = pa.area() * ha + pb.area() * hb - inter;
  if (uni < kGeomEps) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double BBox2D::area() const {
  return std::max(0.0, right - left) * std::max(0.0, bottom - top);
}

double iou_2d(const BBox2D& a, const BBox2D& b) {
  const double inter = interval_overlap(a.left, a.right, b.left, b.right) *
                       interval_overlap(a.top, a.bottom, b.top, b.bottom);
  const double uni = a.area() + b.area() - inter;
  if (uni < kGeomEps) return 0.0;
  return inter / uni;
}

double overlap_2d(const BBox2D& a, const BBox2D& b) {
  const double inter = interval_overlap(a.left, a.right, b.left, b.right) *
                       interval_overlap(a.top, a.bottom, b.top, b.bottom);
  const double area = a.area();
  if (area < kGeomEps) return 0.0;
  return inter / area;
}

double haversine_m(LatLon p, LatLon q) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double dlat = (q.lat - p.lat) * kDeg;
  const double dlon = (q.lon - p.lon) * kDeg;
  const double s_lat = std::sin(0.5 * dlat);
  const double s_lon = std::sin(0.5 * dlon);
  const double h = s_lat * s_lat +
                   std::cos(p.lat * kDeg) * std::cos(q.lat * kDeg) * s_lon * s_lon;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

}  // namespace conf3d
