#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zolr/common.hpp"
#include "zolr/experiment.hpp"
#include "zolr/extractor.hpp"
#include "zolr/io.hpp"
#include "zolr/lab.hpp"

namespace zolr {

// Per-sample metadata carried next to scene and feature files.
struct SampleMeta {
  std::string id;
  std::string label = "clean";
  std::uint64_t scene_seed = 0;
  std::optional<CorruptionSpec> corruption;
  Vec target;
};

inline SampleMeta meta_of(const LabScene& s) {
  return {s.id, s.label(), s.seed, s.corruption, s.cloud.scene.target()};
}

inline nlohmann::ordered_json to_json(const SampleMeta& m) {
  nlohmann::ordered_json j;
  j["id"] = m.id;
  j["label"] = m.label;
  j["scene_seed"] = m.scene_seed;
  if (m.corruption) {
    j["corruption"] = {{"kind", to_string(m.corruption->kind)},
                       {"severity", to_string(m.corruption->severity)},
                       {"seed", m.corruption->seed}};
  } else {
    j["corruption"] = nullptr;
  }
  j["target"] = m.target;
  return j;
}

inline SampleMeta sample_meta_from_json(const nlohmann::json& j) {
  SampleMeta m;
  m.id = j.at("id").get<std::string>();
  m.label = j.at("label").get<std::string>();
  m.scene_seed = j.at("scene_seed").get<std::uint64_t>();
  if (!j.at("corruption").is_null()) {
    const auto& c = j.at("corruption");
    m.corruption = CorruptionSpec{parse_corruption_kind(c.at("kind").get<std::string>()),
                                  parse_severity(c.at("severity").get<std::string>()),
                                  c.at("seed").get<std::uint64_t>(), std::nullopt};
  }
  m.target = j.at("target").get<Vec>();
  return m;
}

inline std::string sidecar_path(const std::string& path) { return path + ".meta.json"; }

inline void write_sidecar(const std::string& path, const std::string& kind,
                          const std::vector<SampleMeta>& metas) {
  nlohmann::ordered_json j;
  j["format"] = kind;
  j["version"] = 1;
  j["count"] = metas.size();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : metas) arr.push_back(to_json(m));
  j["samples"] = std::move(arr);
  auto os = open_out(sidecar_path(path));
  os << j.dump(1) << '\n';
}

inline std::vector<SampleMeta> read_sidecar(const std::string& path) {
  auto is = open_in(sidecar_path(path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    std::vector<SampleMeta> out;
    for (const auto& s : j.at("samples")) out.push_back(sample_meta_from_json(s));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("metadata '" + sidecar_path(path) + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Feature file
//
//   bytes 0-3   magic "ZFEA"
//   u32         version (1)
//   u32         feature_dim
//   u32         count
//   u8          tap       (0 point, 1 feature, 2 encoder)
//   u8          modality  (0 lidar, 1 camera, 2 fused)
//   u16         reserved (0)
//   count x feature_dim float32, row-major
// All integers and floats little-endian. Metadata lives in <file>.meta.json.

struct FeatureFile {
  Tap tap = Tap::encoder_level;
  Modality modality = Modality::lidar;
  std::size_t feature_dim = 0;
  std::vector<Vec> rows;
  std::vector<SampleMeta> meta;
};

inline constexpr std::uint32_t kFeatureFileVersion = 1;

inline void write_feature_file(const std::string& path, const FeatureFile& f) {
  require(f.rows.size() == f.meta.size(), "feature file: rows/metadata count mismatch");
  auto os = open_out(path);
  os.write("ZFEA", 4);
  le::put<std::uint32_t>(os, kFeatureFileVersion);
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(f.feature_dim));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(f.rows.size()));
  le::put<std::uint8_t>(os, static_cast<std::uint8_t>(f.tap));
  le::put<std::uint8_t>(os, static_cast<std::uint8_t>(f.modality));
  le::put<std::uint16_t>(os, 0);
  for (const auto& r : f.rows) {
    require_dim("feature file row", f.feature_dim, r.size());
    for (double v : r) le::put<float>(os, static_cast<float>(v));
  }
  if (!os) throw IoError("feature file: write failed for '" + path + "'");
  write_sidecar(path, "zolr-features", f.meta);
}

inline FeatureFile read_feature_file(const std::string& path) {
  auto is = open_in(path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ZFEA")
    throw IoError("feature file '" + path + "': bad magic");
  const auto version = le::get<std::uint32_t>(is);
  if (version != kFeatureFileVersion)
    throw IoError("feature file '" + path + "': unsupported version " + std::to_string(version));
  FeatureFile f;
  f.feature_dim = le::get<std::uint32_t>(is);
  const auto count = le::get<std::uint32_t>(is);
  const auto tap = le::get<std::uint8_t>(is);
  const auto modality = le::get<std::uint8_t>(is);
  le::get<std::uint16_t>(is);
  if (tap > 2 || modality > 2) throw IoError("feature file '" + path + "': bad tap/modality");
  f.tap = static_cast<Tap>(tap);
  f.modality = static_cast<Modality>(modality);
  f.rows.assign(count, Vec(f.feature_dim));
  for (auto& r : f.rows)
    for (auto& v : r) v = static_cast<double>(le::get<float>(is));
  f.meta = read_sidecar(path);
  if (f.meta.size() != f.rows.size())
    throw IoError("feature file '" + path + "': metadata count mismatch");
  return f;
}

// ---------------------------------------------------------------------------
// Scene file (point clouds written by gen-data)
//
//   bytes 0-3   magic "ZPCD"
//   u32         version (1)
//   u32         count
//   per scene:  u8 shape, 3 x f64 centroid, 3 x f64 extent,
//               u32 n_points, n_points x 3 x f64
// Metadata (ids, labels, seeds, corruption specs) in <file>.meta.json.

inline void write_scene_file(const std::string& path, const SceneSet& set) {
  auto os = open_out(path);
  os.write("ZPCD", 4);
  le::put<std::uint32_t>(os, 1);
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(set.scenes.size()));
  std::vector<SampleMeta> metas;
  for (const auto& s : set.scenes) {
    const auto& sc = s.cloud.scene;
    le::put<std::uint8_t>(os, static_cast<std::uint8_t>(sc.shape));
    for (double v : sc.centroid) le::put<double>(os, v);
    for (double v : sc.extent) le::put<double>(os, v);
    le::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.cloud.points.size()));
    for (const auto& p : s.cloud.points)
      for (double v : p) le::put<double>(os, v);
    metas.push_back(meta_of(s));
  }
  if (!os) throw IoError("scene file: write failed for '" + path + "'");
  write_sidecar(path, "zolr-scenes", metas);
}

inline SceneSet read_scene_file(const std::string& path, const std::string& name) {
  auto is = open_in(path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ZPCD")
    throw IoError("scene file '" + path + "': bad magic");
  if (le::get<std::uint32_t>(is) != 1) throw IoError("scene file '" + path + "': bad version");
  const auto count = le::get<std::uint32_t>(is);
  const auto metas = read_sidecar(path);
  if (metas.size() != count) throw IoError("scene file '" + path + "': metadata count mismatch");
  SceneSet set{name, {}};
  for (std::uint32_t i = 0; i < count; ++i) {
    LabScene s;
    const auto shape = le::get<std::uint8_t>(is);
    if (shape > 2) throw IoError("scene file '" + path + "': bad shape");
    s.cloud.scene.shape = static_cast<SceneShape>(shape);
    for (auto& v : s.cloud.scene.centroid) v = le::get<double>(is);
    for (auto& v : s.cloud.scene.extent) v = le::get<double>(is);
    s.cloud.points.resize(le::get<std::uint32_t>(is));
    for (auto& p : s.cloud.points)
      for (auto& v : p) v = le::get<double>(is);
    s.id = metas[i].id;
    s.seed = metas[i].scene_seed;
    s.corruption = metas[i].corruption;
    set.scenes.push_back(std::move(s));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Extractor weights: "ZEXT", u32 version (1), u32 count, count x f64.

inline void write_extractor_file(const std::string& path, const PointSetExtractor& ex) {
  const Vec flat = ex.parameters();
  auto os = open_out(path);
  os.write("ZEXT", 4);
  le::put<std::uint32_t>(os, 1);
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(flat.size()));
  for (double v : flat) le::put<double>(os, v);
  if (!os) throw IoError("extractor file: write failed for '" + path + "'");
}

inline PointSetExtractor read_extractor_file(const std::string& path) {
  auto is = open_in(path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ZEXT")
    throw IoError("extractor file '" + path + "': bad magic");
  if (le::get<std::uint32_t>(is) != 1) throw IoError("extractor file '" + path + "': bad version");
  Vec flat(le::get<std::uint32_t>(is));
  for (auto& v : flat) v = le::get<double>(is);
  PointSetExtractor ex(0);
  try {
    ex.set_parameters(flat);
  } catch (const Error& e) {
    throw IoError("extractor file '" + path + "': " + e.what());
  }
  return ex;
}

}  // namespace zolr
