#include "rapt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rapt/errors.hpp"
#include "rapt/rng.hpp"

namespace rapt {

void FeatureGeometry::validate() const {
  if (channels < 1) throw ConfigError("geometry.channels: must be >= 1");
  if (roi_h < 1) throw ConfigError("geometry.roi_h: must be >= 1");
  if (roi_w < 1) throw ConfigError("geometry.roi_w: must be >= 1");
}

void DomainSpec::validate(const FeatureGeometry& geometry) const {
  if (std::abs(rho) > 1.0) throw ConfigError("rho: must be within [-1, 1]");
  if (n_images < 1) throw ConfigError("n_images: must be >= 1");
  if (proposals_per_image < 2)
    throw ConfigError("proposals_per_image: must be >= 2 (positives and negatives)");
  if (gts_per_image < 1) throw ConfigError("gts_per_image: must be >= 1");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
    throw ConfigError("positive_fraction: must be in (0, 1)");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma: must be >= 0");
  if (bin_noise_sigma < 0.0) throw ConfigError("bin_noise_sigma: must be >= 0");
  if (image_w < 32 || image_h < 32) throw ConfigError("image size: must be at least 32x32");
  std::vector<bool> used(geometry.channels, false);
  for (int c : relevant_channels) {
    if (c < 0 || c >= geometry.channels)
      throw ConfigError("relevant_channels: index out of range");
    if (used[c]) throw ConfigError("relevant_channels: duplicate channel index");
    used[c] = true;
  }
  for (int c : irrelevant_channels) {
    if (c < 0 || c >= geometry.channels)
      throw ConfigError("irrelevant_channels: index out of range");
    if (used[c]) throw ConfigError("irrelevant_channels: overlaps relevant_channels");
    used[c] = true;
  }
  if (relevant_channels.empty()) throw ConfigError("relevant_channels: must be nonempty");
}

std::int64_t SyntheticDataset::n_proposals() const {
  std::int64_t n = 0;
  for (const auto& img : images) n += static_cast<std::int64_t>(img.proposals.size());
  return n;
}

std::vector<GroundTruthBox> SyntheticDataset::all_gts() const {
  std::vector<GroundTruthBox> out;
  for (const auto& img : images) out.insert(out.end(), img.gts.begin(), img.gts.end());
  return out;
}

namespace {

BoundingBox random_person_box(std::mt19937_64& eng, int image_w, int image_h) {
  std::uniform_real_distribution<double> uh(40.0, 160.0);
  std::uniform_real_distribution<double> ua(0.35, 0.5);
  const double h = std::min(uh(eng), image_h - 2.0);
  const double w = std::min(std::max(ua(eng) * h, 8.0), image_w - 2.0);
  std::uniform_real_distribution<double> ux(0.0, image_w - w);
  std::uniform_real_distribution<double> uy(0.0, image_h - h);
  const double x = ux(eng);
  const double y = uy(eng);
  return {x, y, x + w, y + h};
}

BoundingBox visible_sub_box(std::mt19937_64& eng, const BoundingBox& box, double vis) {
  const double f = std::sqrt(std::clamp(vis, 0.01, 1.0));
  const double vw = box.width() * f;
  const double vh = box.height() * f;
  std::uniform_real_distribution<double> ux(box.x1, box.x2 - vw);
  std::uniform_real_distribution<double> uy(box.y1, box.y2 - vh);
  const double x = vw >= box.width() ? box.x1 : ux(eng);
  const double y = vh >= box.height() ? box.y1 : uy(eng);
  return {x, y, x + vw, y + vh};
}

}  // namespace

SyntheticDataset generate_domain(const DomainSpec& spec, const FeatureGeometry& geometry) {
  geometry.validate();
  spec.validate(geometry);

  const int c_roi = geometry.channels;
  const int hw = geometry.roi_h * geometry.roi_w;
  const double p = spec.positive_fraction;
  const double label_sigma = std::sqrt(p * (1.0 - p));
  const int n_pos =
      std::clamp(static_cast<int>(std::lround(p * spec.proposals_per_image)), 1,
                 spec.proposals_per_image - 1);

  std::vector<bool> is_relevant(c_roi, false), is_irrelevant(c_roi, false);
  std::vector<int> relevant_rank(c_roi, 0);
  for (std::size_t r = 0; r < spec.relevant_channels.size(); ++r) {
    is_relevant[spec.relevant_channels[r]] = true;
    relevant_rank[spec.relevant_channels[r]] = static_cast<int>(r);
  }
  for (int c : spec.irrelevant_channels) is_irrelevant[c] = true;

  SyntheticDataset ds;
  ds.geometry = geometry;
  ds.images.resize(spec.n_images);

  for (int img_idx = 0; img_idx < spec.n_images; ++img_idx) {
    auto eng = make_engine(mix_seed(spec.seed, 0x1A6E, img_idx));
    SyntheticImage& img = ds.images[img_idx];
    img.id = img_idx;
    img.width = spec.image_w;
    img.height = spec.image_h;

    std::vector<BoundingBox> visible_boxes(spec.gts_per_image);
    std::uniform_real_distribution<double> uvis(0.3, 1.0);
    for (int g = 0; g < spec.gts_per_image; ++g) {
      GroundTruthBox gt;
      gt.image_id = img.id;
      gt.box = random_person_box(eng, spec.image_w, spec.image_h);
      gt.height = gt.box.height();
      gt.visibility = uvis(eng);
      gt.ignore = false;
      visible_boxes[g] = visible_sub_box(eng, gt.box, gt.visibility);
      img.gts.push_back(gt);
    }

    // Shift up to 12% plus log-scale up to 0.08 keeps IoU with the source
    // ground truth above 0.5 in the worst case.
    std::uniform_real_distribution<double> ujit(-0.12, 0.12);
    std::uniform_real_distribution<double> uscale(-0.08, 0.08);
    std::normal_distribution<double> gauss(0.0, 1.0);
    img.proposals.reserve(spec.proposals_per_image);

    for (int j = 0; j < spec.proposals_per_image; ++j) {
      Proposal prop;
      prop.image_id = img.id;
      const bool positive = j < n_pos;
      std::array<double, 4> deltas{0.0, 0.0, 0.0, 0.0};

      if (positive) {
        const int g = j % spec.gts_per_image;
        const BoundingBox& src = img.gts[g].box;
        const double cx = src.cx() + ujit(eng) * src.width();
        const double cy = src.cy() + ujit(eng) * src.height();
        const double w = src.width() * std::exp(uscale(eng));
        const double h = src.height() * std::exp(uscale(eng));
        prop.box = {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
        prop.gt_label = 1;
        prop.gt_box = src;
        prop.visibility =
            rasterize_visibility(prop.box, visible_boxes[g], geometry.roi_h, geometry.roi_w);
        deltas = encode_box_deltas(prop.box, src);
      } else {
        // Negatives stay clearly below the matching threshold.
        for (int attempt = 0; attempt < 100; ++attempt) {
          prop.box = random_person_box(eng, spec.image_w, spec.image_h);
          double worst = 0.0;
          for (const auto& gt : img.gts) worst = std::max(worst, iou(prop.box, gt.box));
          if (worst < 0.3) break;
        }
        prop.visibility =
            rasterize_visibility(prop.box, std::nullopt, geometry.roi_h, geometry.roi_w);
      }

      const double z_label = ((positive ? 1.0 : 0.0) - p) / label_sigma;
      prop.roi = RoIFeature::zeros(c_roi, geometry.roi_h, geometry.roi_w);
      for (int c = 0; c < c_roi; ++c) {
        double value;
        if (is_relevant[c]) {
          value = z_label + deltas[relevant_rank[c] % 4] + spec.noise_sigma * gauss(eng);
        } else if (is_irrelevant[c]) {
          value = spec.rho * z_label + std::sqrt(1.0 - spec.rho * spec.rho) * gauss(eng);
        } else {
          value = gauss(eng);
        }
        float* plane = prop.roi.data.data() + static_cast<std::size_t>(c) * hw;
        if (spec.bin_noise_sigma > 0.0) {
          for (int b = 0; b < hw; ++b)
            plane[b] = static_cast<float>(value + spec.bin_noise_sigma * gauss(eng));
        } else {
          std::fill(plane, plane + hw, static_cast<float>(value));
        }
      }
      img.proposals.push_back(std::move(prop));
    }
    std::shuffle(img.proposals.begin(), img.proposals.end(), eng);
  }
  return ds;
}

DgodSplit generate_dgod_split(const std::vector<DomainSpec>& train_specs,
                              const DomainSpec& test_spec, const FeatureGeometry& geometry) {
  if (train_specs.empty()) throw ConfigError("train_domains: must be nonempty");
  DgodSplit split;
  split.train.geometry = geometry;
  std::int64_t next_id = 0;
  for (const auto& spec : train_specs) {
    SyntheticDataset d = generate_domain(spec, geometry);
    for (auto& img : d.images) {
      const std::int64_t id = next_id++;
      img.id = id;
      for (auto& g : img.gts) g.image_id = id;
      for (auto& pr : img.proposals) pr.image_id = id;
      split.train.images.push_back(std::move(img));
    }
  }
  split.test = generate_domain(test_spec, geometry);
  return split;
}

}  // namespace rapt
