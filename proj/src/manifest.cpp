// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "palmpipe/error.hpp"

namespace palmpipe {

void Manifest::validate() const {
  std::unordered_set<std::string> seen;
  seen.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    if (e.subject_id.empty()) raise(ErrorCode::SchemaViolation, "empty subject_id");
    if (e.capture_id.empty()) raise(ErrorCode::SchemaViolation, "empty capture_id");
    if (!seen.insert(e.capture_id).second) {
      raise(ErrorCode::DuplicateCapture, "duplicate capture_id \"" + e.capture_id + "\"");
    }
    if (e.age_months < 0 || e.age_months > 1200) {
      raise(ErrorCode::SchemaViolation, "age_months out of range for \"" + e.capture_id + "\"");
    }
  }
}

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorCode::IoError, "cannot open: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, path + ": " + e.what());
  }
  Manifest m;
  try {
    m.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("captures") || !j.at("captures").is_array()) {
      raise(ErrorCode::SchemaViolation, path + ": missing captures array");
    }
    for (const auto& c : j.at("captures")) {
      ManifestEntry e;
      e.subject_id = c.at("subject_id").get<std::string>();
      e.capture_id = c.at("capture_id").get<std::string>();
      e.hand_side = hand_side_from_name(c.at("hand_side").get<std::string>());
      e.image_path = c.at("image").get<std::string>();
      e.keypoints_path = c.at("keypoints").get<std::string>();
      e.age_months = c.at("age_months").get<int>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::SchemaViolation, path + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  manifest.validate();
  nlohmann::ordered_json j;
  j["seed"] = manifest.seed;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ManifestEntry& e : manifest.entries) {
    nlohmann::ordered_json c;
    c["subject_id"] = e.subject_id;
    c["capture_id"] = e.capture_id;
    c["hand_side"] = hand_side_name(e.hand_side);
    c["image"] = e.image_path;
    c["keypoints"] = e.keypoints_path;
    c["age_months"] = e.age_months;
    arr.push_back(std::move(c));
  }
  j["captures"] = std::move(arr);
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorCode::IoError, "cannot open for write: " + path);
  f << j.dump(2) << "\n";
  if (!f) raise(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace palmpipe
