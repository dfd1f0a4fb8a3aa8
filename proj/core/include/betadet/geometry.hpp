#pragma once

namespace betadet {

/// Center/size box in normalized image coordinates. Never clipped here.
struct BoxCXCYWH {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const BoxCXCYWH&, const BoxCXCYWH&) = default;
};

/// Corner box; x0 ≤ x1 and y0 ≤ y1.
struct BoxXYXY {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double area() const noexcept { return (x1 - x0) * (y1 - y0); }

  friend bool operator==(const BoxXYXY&, const BoxXYXY&) = default;
};

BoxXYXY to_xyxy(const BoxCXCYWH& b) noexcept;
BoxCXCYWH to_cxcywh(const BoxXYXY& b) noexcept;

/// Intersection over union; 0 for disjoint boxes or a zero-area union.
double iou(const BoxXYXY& a, const BoxXYXY& b) noexcept;

/// IoU minus the fraction of the enclosing hull not covered by the union.
/// Two coincident points give 0.
double giou(const BoxXYXY& a, const BoxXYXY& b) noexcept;

double iou(const BoxCXCYWH& a, const BoxCXCYWH& b) noexcept;
double giou(const BoxCXCYWH& a, const BoxCXCYWH& b) noexcept;

/// Sum of absolute coordinate differences.
double l1_box(const BoxCXCYWH& a, const BoxCXCYWH& b) noexcept;

}  // namespace betadet
