#include "betadet/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace betadet {

BoxXYXY to_xyxy(const BoxCXCYWH& b) noexcept {
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

BoxCXCYWH to_cxcywh(const BoxXYXY& b) noexcept {
  return {0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1), b.x1 - b.x0, b.y1 - b.y0};
}

namespace {

struct Overlap {
  double inter;
  double uni;
  double hull;
};

Overlap overlap(const BoxXYXY& a, const BoxXYXY& b) noexcept {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double hw = std::max(a.x1, b.x1) - std::min(a.x0, b.x0);
  const double hh = std::max(a.y1, b.y1) - std::min(a.y0, b.y0);
  return {inter, a.area() + b.area() - inter, hw * hh};
}

}  // namespace

double iou(const BoxXYXY& a, const BoxXYXY& b) noexcept {
  const Overlap o = overlap(a, b);
  return o.uni > 0.0 ? o.inter / o.uni : 0.0;
}

double giou(const BoxXYXY& a, const BoxXYXY& b) noexcept {
  const Overlap o = overlap(a, b);
  const double base = o.uni > 0.0 ? o.inter / o.uni : 0.0;
  if (o.hull <= 0.0) return base;
  return base - (o.hull - o.uni) / o.hull;
}

double iou(const BoxCXCYWH& a, const BoxCXCYWH& b) noexcept { return iou(to_xyxy(a), to_xyxy(b)); }

double giou(const BoxCXCYWH& a, const BoxCXCYWH& b) noexcept {
  return giou(to_xyxy(a), to_xyxy(b));
}

double l1_box(const BoxCXCYWH& a, const BoxCXCYWH& b) noexcept {
  return std::fabs(a.cx - b.cx) + std::fabs(a.cy - b.cy) + std::fabs(a.w - b.w) +
         std::fabs(a.h - b.h);
}

}  // namespace betadet
