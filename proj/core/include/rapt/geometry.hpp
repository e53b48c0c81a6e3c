#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace rapt {

/// Axis-aligned box in image-plane pixel coordinates, corners (x1,y1)-(x2,y2).
/// Valid boxes satisfy x2 > x1, y2 > y1 with all coordinates finite.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const;
};

/// Binary visibility grid over the RoI bins, row-major h x w.
struct VisibilityMask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> grid;  // entries in {0,1}

  std::uint8_t at(int i, int j) const { return grid[static_cast<std::size_t>(i) * w + j]; }
  int visible_count() const;
  static VisibilityMask all_ones(int h, int w);
};

/// Fixed-size per-proposal feature tensor, row-major (c, h, w).
/// Stored as float; all derived math is done in double.
struct RoIFeature {
  int channels = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;

  float at(int c, int i, int j) const {
    return data[(static_cast<std::size_t>(c) * h + i) * w + j];
  }
  float& at(int c, int i, int j) {
    return data[(static_cast<std::size_t>(c) * h + i) * w + j];
  }
  static RoIFeature zeros(int channels, int h, int w);
};

/// Per-channel visibility-averaged feature vector, length = channels.
using PooledFeature = std::vector<double>;

/// One scored region: geometry, features, visibility, and (for generated
/// positives) the source ground-truth link.
struct Proposal {
  std::int64_t image_id = 0;
  BoundingBox box;
  RoIFeature roi;
  VisibilityMask visibility;
  std::optional<int> gt_label;
  std::optional<BoundingBox> gt_box;
};

/// Intersection-over-union of two valid boxes. Symmetric, in [0, 1].
double iou(const BoundingBox& a, const BoundingBox& b);

/// Rasterize a visible sub-box onto an h x w grid over `box`: a cell is
/// visible iff its center lies inside `visible_box`. An absent visible_box
/// or an all-zero rasterization yields the all-ones mask.
VisibilityMask rasterize_visibility(const BoundingBox& box,
                                    const std::optional<BoundingBox>& visible_box,
                                    int h, int w);

/// Per-channel mean over bins where the mask is 1. The mask is guaranteed
/// to have at least one visible cell by rasterize_visibility.
PooledFeature spatial_pool(const RoIFeature& roi, const VisibilityMask& mask);

/// Standard box-delta encoding (dx, dy, dlog w, dlog h) of `target` with
/// respect to the anchor box.
std::array<double, 4> encode_box_deltas(const BoundingBox& anchor, const BoundingBox& target);

/// Inverse of encode_box_deltas; dw and dh are clamped to +-4 before exp.
BoundingBox apply_box_deltas(const BoundingBox& anchor, const std::array<double, 4>& deltas);

}  // namespace rapt
