#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rapt/metrics.hpp"
#include "rapt/synthetic.hpp"

namespace rapt {

/// Parsed annotation file: the image list plus ground-truth boxes.
struct AnnotationSet {
  struct ImageInfo {
    std::int64_t id = 0;
    int width = 0;
    int height = 0;
  };
  std::vector<ImageInfo> images;
  std::vector<GroundTruthBox> gts;

  std::int64_t n_images() const { return static_cast<std::int64_t>(images.size()); }
};

/// COCO-style annotation JSON: images[{id,width,height}] and
/// annotations[{image_id, bbox:[x,y,w,h], height?, vis_ratio?, ignore?,
/// category_id?}]. Unknown keys are tolerated; missing height defaults to
/// the box height, vis_ratio to 1, ignore to false. Throws SchemaError.
AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

AnnotationSet annotations_from_dataset(const SyntheticDataset& dataset);

/// COCO-style result JSON: a list of {image_id, bbox:[x,y,w,h], score,
/// category_id?}. Throws SchemaError.
std::vector<Detection> load_detections(const std::filesystem::path& path);
void save_detections(const std::vector<Detection>& dets, const std::filesystem::path& path);

/// Binary proposal/feature dump, little-endian, fixed-size records:
///   magic "RAPTFD01"; u32 channels, roi_h, roi_w; u64 n_proposals;
///   per proposal: i64 image_id; f64 box[4]; u8 has_gt; i32 gt_label;
///   f64 gt_box[4]; u8 mask[roi_h*roi_w]; f32 tensor[channels*roi_h*roi_w].
void save_feature_dump(const SyntheticDataset& dataset, const std::filesystem::path& path);

/// Rebuilds a dataset from a feature dump plus its annotation file (which
/// provides image sizes and ground truths). Throws SchemaError.
SyntheticDataset load_feature_dump(const std::filesystem::path& path,
                                   const AnnotationSet& annotations);

}  // namespace rapt
