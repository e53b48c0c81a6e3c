#include "rapt/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "rapt/errors.hpp"

namespace rapt {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  return j;
}

void write_file(const json& j, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SchemaError("cannot write file: " + path.string());
  out << j.dump(2) << '\n';
}

double require_number(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_number())
    throw SchemaError(ctx + ": missing or non-numeric field '" + key + "'");
  return j[key].get<double>();
}

BoundingBox bbox_from_xywh(const json& arr, const std::string& ctx) {
  if (!arr.is_array() || arr.size() != 4)
    throw SchemaError(ctx + ": bbox must be an array [x, y, w, h]");
  for (const auto& v : arr)
    if (!v.is_number()) throw SchemaError(ctx + ": bbox entries must be numbers");
  const double x = arr[0].get<double>();
  const double y = arr[1].get<double>();
  const double w = arr[2].get<double>();
  const double h = arr[3].get<double>();
  if (!(w > 0.0) || !(h > 0.0)) throw SchemaError(ctx + ": bbox must have positive size");
  BoundingBox b{x, y, x + w, y + h};
  if (!b.valid()) throw SchemaError(ctx + ": bbox coordinates must be finite");
  return b;
}

json bbox_to_xywh(const BoundingBox& b) {
  return json::array({b.x1, b.y1, b.width(), b.height()});
}

}  // namespace

AnnotationSet load_annotations(const std::filesystem::path& path) {
  const json j = parse_file(path);
  if (!j.is_object() || !j.contains("images") || !j.contains("annotations"))
    throw SchemaError(path.string() + ": expected an object with 'images' and 'annotations'");

  AnnotationSet set;
  if (!j["images"].is_array()) throw SchemaError("images: must be an array");
  for (std::size_t i = 0; i < j["images"].size(); ++i) {
    const auto& img = j["images"][i];
    const std::string ctx = "images[" + std::to_string(i) + "]";
    AnnotationSet::ImageInfo info;
    info.id = static_cast<std::int64_t>(require_number(img, "id", ctx));
    info.width = static_cast<int>(require_number(img, "width", ctx));
    info.height = static_cast<int>(require_number(img, "height", ctx));
    set.images.push_back(info);
  }
  if (!j["annotations"].is_array()) throw SchemaError("annotations: must be an array");
  for (std::size_t i = 0; i < j["annotations"].size(); ++i) {
    const auto& a = j["annotations"][i];
    const std::string ctx = "annotations[" + std::to_string(i) + "]";
    GroundTruthBox g;
    g.image_id = static_cast<std::int64_t>(require_number(a, "image_id", ctx));
    if (!a.contains("bbox")) throw SchemaError(ctx + ": missing field 'bbox'");
    g.box = bbox_from_xywh(a["bbox"], ctx);
    g.height = a.contains("height") ? a["height"].get<double>() : g.box.height();
    g.visibility = a.contains("vis_ratio") ? a["vis_ratio"].get<double>() : 1.0;
    if (a.contains("ignore")) {
      const auto& ig = a["ignore"];
      g.ignore = ig.is_boolean() ? ig.get<bool>() : ig.get<double>() != 0.0;
    }
    g.category_id = a.contains("category_id") ? a["category_id"].get<int>() : 1;
    set.gts.push_back(g);
  }
  return set;
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
  json j;
  j["format_version"] = 1;
  j["images"] = json::array();
  for (const auto& img : set.images)
    j["images"].push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
  j["annotations"] = json::array();
  std::int64_t next_id = 0;
  for (const auto& g : set.gts) {
    j["annotations"].push_back({{"id", next_id++},
                                {"image_id", g.image_id},
                                {"bbox", bbox_to_xywh(g.box)},
                                {"height", g.height},
                                {"vis_ratio", g.visibility},
                                {"ignore", g.ignore ? 1 : 0},
                                {"category_id", g.category_id}});
  }
  j["categories"] = json::array({{{"id", 1}, {"name", "person"}}});
  write_file(j, path);
}

AnnotationSet annotations_from_dataset(const SyntheticDataset& dataset) {
  AnnotationSet set;
  for (const auto& img : dataset.images) {
    set.images.push_back({img.id, img.width, img.height});
    set.gts.insert(set.gts.end(), img.gts.begin(), img.gts.end());
  }
  return set;
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  const json j = parse_file(path);
  if (!j.is_array()) throw SchemaError(path.string() + ": expected an array of detections");
  std::vector<Detection> dets;
  dets.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& d = j[i];
    const std::string ctx = "detections[" + std::to_string(i) + "]";
    Detection det;
    det.image_id = static_cast<std::int64_t>(require_number(d, "image_id", ctx));
    if (!d.contains("bbox")) throw SchemaError(ctx + ": missing field 'bbox'");
    det.box = bbox_from_xywh(d["bbox"], ctx);
    det.score = require_number(d, "score", ctx);
    if (!std::isfinite(det.score)) throw SchemaError(ctx + ": score must be finite");
    det.category_id = d.contains("category_id") ? d["category_id"].get<int>() : 1;
    dets.push_back(det);
  }
  return dets;
}

void save_detections(const std::vector<Detection>& dets, const std::filesystem::path& path) {
  json j = json::array();
  for (const auto& d : dets) {
    j.push_back({{"image_id", d.image_id},
                 {"bbox", bbox_to_xywh(d.box)},
                 {"score", d.score},
                 {"category_id", d.category_id}});
  }
  write_file(j, path);
}

namespace {

constexpr char kDumpMagic[8] = {'R', 'A', 'P', 'T', 'F', 'D', '0', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& ctx) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw SchemaError(ctx + ": truncated feature dump");
  return v;
}

}  // namespace

void save_feature_dump(const SyntheticDataset& dataset, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("cannot write file: " + path.string());
  out.write(kDumpMagic, sizeof(kDumpMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.geometry.channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.geometry.roi_h));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.geometry.roi_w));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(dataset.n_proposals()));
  for (const auto& img : dataset.images) {
    for (const auto& p : img.proposals) {
      put<std::int64_t>(out, p.image_id);
      put<double>(out, p.box.x1);
      put<double>(out, p.box.y1);
      put<double>(out, p.box.x2);
      put<double>(out, p.box.y2);
      put<std::uint8_t>(out, p.gt_label.has_value() ? 1 : 0);
      put<std::int32_t>(out, p.gt_label.value_or(0));
      const BoundingBox gb = p.gt_box.value_or(BoundingBox{0.0, 0.0, 1.0, 1.0});
      put<double>(out, gb.x1);
      put<double>(out, gb.y1);
      put<double>(out, gb.x2);
      put<double>(out, gb.y2);
      out.write(reinterpret_cast<const char*>(p.visibility.grid.data()),
                static_cast<std::streamsize>(p.visibility.grid.size()));
      out.write(reinterpret_cast<const char*>(p.roi.data.data()),
                static_cast<std::streamsize>(p.roi.data.size() * sizeof(float)));
    }
  }
}

SyntheticDataset load_feature_dump(const std::filesystem::path& path,
                                   const AnnotationSet& annotations) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open file: " + path.string());
  const std::string ctx = path.string();
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kDumpMagic))
    throw SchemaError(ctx + ": not a feature dump (bad magic)");

  SyntheticDataset ds;
  ds.geometry.channels = static_cast<int>(get<std::uint32_t>(in, ctx));
  ds.geometry.roi_h = static_cast<int>(get<std::uint32_t>(in, ctx));
  ds.geometry.roi_w = static_cast<int>(get<std::uint32_t>(in, ctx));
  ds.geometry.validate();
  const auto n_proposals = get<std::uint64_t>(in, ctx);

  std::map<std::int64_t, std::size_t> image_index;
  for (const auto& img : annotations.images) {
    SyntheticImage si;
    si.id = img.id;
    si.width = img.width;
    si.height = img.height;
    image_index[img.id] = ds.images.size();
    ds.images.push_back(std::move(si));
  }
  for (const auto& g : annotations.gts) {
    auto it = image_index.find(g.image_id);
    if (it == image_index.end())
      throw SchemaError(ctx + ": annotation references unknown image id");
    ds.images[it->second].gts.push_back(g);
  }

  const int hw = ds.geometry.roi_h * ds.geometry.roi_w;
  for (std::uint64_t i = 0; i < n_proposals; ++i) {
    Proposal p;
    p.image_id = get<std::int64_t>(in, ctx);
    p.box.x1 = get<double>(in, ctx);
    p.box.y1 = get<double>(in, ctx);
    p.box.x2 = get<double>(in, ctx);
    p.box.y2 = get<double>(in, ctx);
    const auto has_gt = get<std::uint8_t>(in, ctx);
    const auto gt_label = get<std::int32_t>(in, ctx);
    BoundingBox gb;
    gb.x1 = get<double>(in, ctx);
    gb.y1 = get<double>(in, ctx);
    gb.x2 = get<double>(in, ctx);
    gb.y2 = get<double>(in, ctx);
    if (has_gt) {
      p.gt_label = gt_label;
      p.gt_box = gb;
    }
    p.visibility.h = ds.geometry.roi_h;
    p.visibility.w = ds.geometry.roi_w;
    p.visibility.grid.resize(hw);
    in.read(reinterpret_cast<char*>(p.visibility.grid.data()), hw);
    p.roi.channels = ds.geometry.channels;
    p.roi.h = ds.geometry.roi_h;
    p.roi.w = ds.geometry.roi_w;
    p.roi.data.resize(static_cast<std::size_t>(ds.geometry.channels) * hw);
    in.read(reinterpret_cast<char*>(p.roi.data.data()),
            static_cast<std::streamsize>(p.roi.data.size() * sizeof(float)));
    if (!in) throw SchemaError(ctx + ": truncated feature dump");
    auto it = image_index.find(p.image_id);
    if (it == image_index.end())
      throw SchemaError(ctx + ": proposal references unknown image id");
    ds.images[it->second].proposals.push_back(std::move(p));
  }
  return ds;
}

}  // namespace rapt
