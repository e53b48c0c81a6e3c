#include "rapt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rapt {

bool BoundingBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x2 > x1 && y2 > y1;
}

int VisibilityMask::visible_count() const {
  return static_cast<int>(std::count(grid.begin(), grid.end(), std::uint8_t{1}));
}

VisibilityMask VisibilityMask::all_ones(int h, int w) {
  VisibilityMask m;
  m.h = h;
  m.w = w;
  m.grid.assign(static_cast<std::size_t>(h) * w, 1);
  return m;
}

RoIFeature RoIFeature::zeros(int channels, int h, int w) {
  RoIFeature f;
  f.channels = channels;
  f.h = h;
  f.w = w;
  f.data.assign(static_cast<std::size_t>(channels) * h * w, 0.0f);
  return f;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

VisibilityMask rasterize_visibility(const BoundingBox& box,
                                    const std::optional<BoundingBox>& visible_box,
                                    int h, int w) {
  if (!visible_box) return VisibilityMask::all_ones(h, w);

  VisibilityMask m;
  m.h = h;
  m.w = w;
  m.grid.assign(static_cast<std::size_t>(h) * w, 0);
  const double cell_h = box.height() / h;
  const double cell_w = box.width() / w;
  const BoundingBox& v = *visible_box;
  int visible = 0;
  for (int i = 0; i < h; ++i) {
    const double cy = box.y1 + (i + 0.5) * cell_h;
    for (int j = 0; j < w; ++j) {
      const double cx = box.x1 + (j + 0.5) * cell_w;
      if (cx >= v.x1 && cx <= v.x2 && cy >= v.y1 && cy <= v.y2) {
        m.grid[static_cast<std::size_t>(i) * w + j] = 1;
        ++visible;
      }
    }
  }
  if (visible == 0) return VisibilityMask::all_ones(h, w);
  return m;
}

std::array<double, 4> encode_box_deltas(const BoundingBox& anchor, const BoundingBox& target) {
  return {(target.cx() - anchor.cx()) / anchor.width(),
          (target.cy() - anchor.cy()) / anchor.height(),
          std::log(target.width() / anchor.width()),
          std::log(target.height() / anchor.height())};
}

BoundingBox apply_box_deltas(const BoundingBox& anchor, const std::array<double, 4>& deltas) {
  const double cx = anchor.cx() + deltas[0] * anchor.width();
  const double cy = anchor.cy() + deltas[1] * anchor.height();
  const double w = anchor.width() * std::exp(std::clamp(deltas[2], -4.0, 4.0));
  const double h = anchor.height() * std::exp(std::clamp(deltas[3], -4.0, 4.0));
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

PooledFeature spatial_pool(const RoIFeature& roi, const VisibilityMask& mask) {
  PooledFeature out(static_cast<std::size_t>(roi.channels), 0.0);
  const int n_vis = mask.visible_count();
  const int hw = roi.h * roi.w;
  for (int c = 0; c < roi.channels; ++c) {
    const float* plane = roi.data.data() + static_cast<std::size_t>(c) * hw;
    double sum = 0.0;
    for (int k = 0; k < hw; ++k) {
      if (mask.grid[k]) sum += plane[k];
    }
    out[c] = sum / n_vis;
  }
  return out;
}

}  // namespace rapt
