#pragma once

#include <array>
#include <cstdint>

namespace vild {

// Axis-aligned box in pixel coordinates; area is (x2-x1)*(y2-y1), no +1.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double area() const noexcept { return (x2 - x1) * (y2 - y1); }
  bool valid() const noexcept;
  std::array<double, 4> as_array() const { return {x1, y1, x2, y2}; }

  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b) noexcept;

struct Detection {
  std::int64_t image_id = 0;
  int category_id = 0;
  Box box;
  double score = 0.0;
  int source_id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruth {
  std::int64_t image_id = 0;
  int category_id = 0;
  Box box;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

}  // namespace vild
