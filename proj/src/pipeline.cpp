// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "palmpipe/enhance.hpp"
#include "palmpipe/error.hpp"
#include "palmpipe/image_io.hpp"

namespace palmpipe {

namespace {

namespace fs = std::filesystem;

enum LogLevel { kLogError = 0, kLogInfo = 1, kLogDebug = 2 };

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("PALMPIPE_LOG");
    if (env == nullptr) return kLogInfo;
    if (std::strcmp(env, "error") == 0) return kLogError;
    if (std::strcmp(env, "debug") == 0) return kLogDebug;
    return kLogInfo;
  }();
  return level;
}

void log_at(int level, const char* fmt, ...) {
  if (level > log_level()) return;
  std::va_list args;
  va_start(args, fmt);
  std::fputs("[palmpipe] ", stderr);
  std::vfprintf(stderr, fmt, args);
  std::fputc('\n', stderr);
  va_end(args);
}

// Shortest decimal text that parses back to exactly the same double, so
// config round trips are bit-faithful without 17-digit noise.
std::string shortest_double(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

const char* provider_name(KeypointProviderKind kind) {
  return kind == KeypointProviderKind::File ? "file" : "heuristic";
}

KeypointProviderKind provider_from_name(const std::string& name) {
  if (name == "file") return KeypointProviderKind::File;
  if (name == "heuristic") return KeypointProviderKind::Heuristic;
  raise(ErrorCode::ParseError, "unknown keypoint provider \"" + name + "\"");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  raise(ErrorCode::ParseError, key + ": expected true or false, got \"" + value + "\"");
}

long long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
    raise(ErrorCode::ParseError, key + ": expected an integer, got \"" + value + "\"");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE ||
      value.find('-') != std::string::npos) {
    raise(ErrorCode::ParseError, key + ": expected a non-negative integer, got \"" + value + "\"");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || !std::isfinite(v)) {
    raise(ErrorCode::ParseError, key + ": expected a finite number, got \"" + value + "\"");
  }
  return v;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) raise(ErrorCode::IoError, "short write to " + path.string());
}

// Runs fn(0..n-1) on `jobs` workers (0 = hardware threads). Any exception
// stops the pool and is rethrown on the caller thread.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  int workers = jobs == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : jobs;
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (!stop.load(std::memory_order_relaxed)) {
        const int i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          stop.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<ProcessedCapture> process_all(const Manifest& manifest, const std::string& dataset_dir,
                                          const PipelineConfig& cfg) {
  const int n = static_cast<int>(manifest.entries.size());
  std::vector<ProcessedCapture> out(static_cast<std::size_t>(n));
  parallel_for(n, cfg.jobs, [&](int i) {
    out[static_cast<std::size_t>(i)] = process_capture(manifest, dataset_dir, i, cfg);
    log_at(kLogDebug, "processed %s", out[static_cast<std::size_t>(i)].capture_id.c_str());
  });
  return out;
}

// Age bands of the verification summary; a pair belongs to its probe's
// band. Captures outside every band are reported without one.
const char* age_band(int age_months) {
  if (age_months >= 6 && age_months < 12) return "age_6_12";
  if (age_months >= 12 && age_months < 24) return "age_12_24";
  if (age_months >= 24 && age_months <= 48) return "age_24_48";
  return nullptr;
}

std::vector<RecordGroup> age_groups(const Manifest& manifest,
                                    const std::vector<PairSpec>& pairs,
                                    const std::vector<ScoreRecord>& records) {
  bool has_ages = false;
  for (const ManifestEntry& e : manifest.entries) has_ages = has_ages || e.age_months > 0;
  if (!has_ages) return {};
  std::vector<RecordGroup> groups;
  groups.emplace_back("age_6_12", std::vector<ScoreRecord>{});
  groups.emplace_back("age_12_24", std::vector<ScoreRecord>{});
  groups.emplace_back("age_24_48", std::vector<ScoreRecord>{});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int age = manifest.entries[static_cast<std::size_t>(pairs[i].probe_index)].age_months;
    const char* band = age_band(age);
    if (band == nullptr) continue;
    for (RecordGroup& g : groups) {
      if (g.first == band) {
        g.second.push_back(records[i]);
        break;
      }
    }
  }
  std::erase_if(groups, [](const RecordGroup& g) { return g.second.empty(); });
  return groups;
}

std::string manifest_directory(const std::string& manifest_path) {
  const fs::path parent = fs::path(manifest_path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

}  // namespace

void PipelineConfig::validate() const {
  keypoints.validate();
  if (enhance_window < 3 || enhance_window > 224 || enhance_window % 2 == 0) {
    raise(ErrorCode::BadWindow, "enhance_window must be odd and within [3, 224]");
  }
  if (realign_params.grid_n < 2 || realign_params.grid_n > 32) {
    raise(ErrorCode::BadArgument, "realign_grid_n must be within [2, 32]");
  }
  if (realign_params.radius < 1 || realign_params.radius > 64) {
    raise(ErrorCode::BadArgument, "realign_radius must be within [1, 64]");
  }
  if (!(realign_params.lambda >= 0.0) || realign_params.lambda > 1e6) {
    raise(ErrorCode::BadArgument, "realign_lambda must be within [0, 1e6]");
  }
  if (!(realign_params.min_confidence >= 0.0 && realign_params.min_confidence <= 1.0)) {
    raise(ErrorCode::BadArgument, "realign_min_confidence must be within [0, 1]");
  }
  if (realign_params.min_nodes < 3) {
    raise(ErrorCode::BadArgument, "realign_min_nodes must be at least 3");
  }
  if (realign_params.passes < 1 || realign_params.passes > 8) {
    raise(ErrorCode::BadArgument, "realign_passes must be within [1, 8]");
  }
  if (descriptor.block_size < 4 || descriptor.block_size > 224) {
    raise(ErrorCode::BadArgument, "block_size must be within [4, 224]");
  }
  if (descriptor.orientation_bins < 2 || descriptor.orientation_bins > 64) {
    raise(ErrorCode::BadArgument, "orientation_bins must be within [2, 64]");
  }
  if (!(similarity_threshold >= 0.0 && similarity_threshold <= 1.0)) {
    raise(ErrorCode::BadArgument, "similarity_threshold must be within [0, 1]");
  }
  if (impostor_cap == 0) raise(ErrorCode::BadArgument, "impostor_cap must be positive");
  if (jobs < 0 || jobs > 1024) raise(ErrorCode::BadArgument, "jobs must be within [0, 1024]");
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "keypoint_provider") {
    cfg.keypoints.kind = provider_from_name(value);
  } else if (key == "binarization_threshold") {
    cfg.keypoints.binarization_threshold = parse_double(key, value);
  } else if (key == "min_hand_area") {
    cfg.keypoints.min_hand_area = parse_double(key, value);
  } else if (key == "enhance") {
    cfg.enhance = parse_bool(key, value);
  } else if (key == "enhance_window") {
    cfg.enhance_window = static_cast<int>(parse_int(key, value));
  } else if (key == "realign") {
    cfg.realign = parse_bool(key, value);
  } else if (key == "realign_grid_n") {
    cfg.realign_params.grid_n = static_cast<int>(parse_int(key, value));
  } else if (key == "realign_radius") {
    cfg.realign_params.radius = static_cast<int>(parse_int(key, value));
  } else if (key == "realign_lambda") {
    cfg.realign_params.lambda = parse_double(key, value);
  } else if (key == "realign_min_confidence") {
    cfg.realign_params.min_confidence = parse_double(key, value);
  } else if (key == "realign_min_nodes") {
    cfg.realign_params.min_nodes = static_cast<int>(parse_int(key, value));
  } else if (key == "realign_passes") {
    cfg.realign_params.passes = static_cast<int>(parse_int(key, value));
  } else if (key == "ensemble") {
    cfg.ensemble = parse_bool(key, value);
  } else if (key == "block_size") {
    cfg.descriptor.block_size = static_cast<int>(parse_int(key, value));
  } else if (key == "orientation_bins") {
    cfg.descriptor.orientation_bins = static_cast<int>(parse_int(key, value));
  } else if (key == "similarity_threshold") {
    cfg.similarity_threshold = parse_double(key, value);
  } else if (key == "impostor_policy") {
    cfg.impostor_policy = impostor_policy_from_name(value);
  } else if (key == "impostor_cap") {
    cfg.impostor_cap = parse_u64(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "jobs") {
    cfg.jobs = static_cast<int>(parse_int(key, value));
  } else {
    raise(ErrorCode::ParseError, "unknown config key \"" + key + "\"");
  }
}

PipelineConfig pipeline_config_from_text(const std::string& text) {
  PipelineConfig cfg;
  std::size_t start = 0;
  std::size_t lineno = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++lineno;
    std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::ParseError,
            "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      raise(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": empty key");
    }
    set_config_value(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

std::string pipeline_config_to_text(const PipelineConfig& cfg) {
  std::string out = "# palmpipe matching workflow configuration\n";
  auto kv = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  kv("keypoint_provider", provider_name(cfg.keypoints.kind));
  kv("binarization_threshold", shortest_double(cfg.keypoints.binarization_threshold));
  kv("min_hand_area", shortest_double(cfg.keypoints.min_hand_area));
  kv("enhance", cfg.enhance ? "true" : "false");
  kv("enhance_window", std::to_string(cfg.enhance_window));
  kv("realign", cfg.realign ? "true" : "false");
  kv("realign_grid_n", std::to_string(cfg.realign_params.grid_n));
  kv("realign_radius", std::to_string(cfg.realign_params.radius));
  kv("realign_lambda", shortest_double(cfg.realign_params.lambda));
  kv("realign_min_confidence", shortest_double(cfg.realign_params.min_confidence));
  kv("realign_min_nodes", std::to_string(cfg.realign_params.min_nodes));
  kv("realign_passes", std::to_string(cfg.realign_params.passes));
  kv("ensemble", cfg.ensemble ? "true" : "false");
  kv("block_size", std::to_string(cfg.descriptor.block_size));
  kv("orientation_bins", std::to_string(cfg.descriptor.orientation_bins));
  kv("similarity_threshold", shortest_double(cfg.similarity_threshold));
  kv("impostor_policy", impostor_policy_name(cfg.impostor_policy));
  kv("impostor_cap", std::to_string(cfg.impostor_cap));
  kv("seed", std::to_string(cfg.seed));
  kv("jobs", std::to_string(cfg.jobs));
  return out;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pipeline_config_from_text(text);
}

ProcessedCapture process_image(const Image& img, const std::optional<KeypointSet>& keypoints,
                               const PipelineConfig& cfg) {
  cfg.validate();
  KeypointSet kps;
  if (keypoints.has_value()) {
    kps = *keypoints;
    kps.validate(img.width(), img.height());
  } else {
    if (cfg.keypoints.kind == KeypointProviderKind::File) {
      raise(ErrorCode::BadArgument, "the file keypoint provider needs a keypoints file");
    }
    kps = detect_valleys(img, cfg.keypoints);
  }

  Image upright = img;
  if (kps.hand_side() == HandSide::Left) {
    upright = img.mirrored_horizontal();
    kps = kps.mirrored_horizontal(img.width());
  }

  ProcessedCapture out;
  out.roi = extract_roi(upright, kps, CanonicalTemplate::standard());
  if (cfg.enhance) out.roi = enhance_baseline(out.roi, cfg.enhance_window);
  out.embeddings = embed_patches(out.roi, cfg.descriptor);
  return out;
}

ProcessedCapture process_capture(const Manifest& manifest, const std::string& dataset_dir,
                                 int index, const PipelineConfig& cfg) {
  if (index < 0 || index >= static_cast<int>(manifest.entries.size())) {
    raise(ErrorCode::OutOfBounds, "capture index out of range");
  }
  const ManifestEntry& entry = manifest.entries[static_cast<std::size_t>(index)];
  const fs::path root(dataset_dir);
  const Image img = read_image((root / entry.image_path).string());

  std::optional<KeypointSet> kps;
  if (cfg.keypoints.kind == KeypointProviderKind::File) {
    if (entry.keypoints_path.empty()) {
      raise(ErrorCode::BadArgument,
            "capture " + entry.capture_id + " has no keypoints file in the manifest");
    }
    const KeypointRecord rec = load_keypoints((root / entry.keypoints_path).string());
    if (rec.image_id != entry.capture_id) {
      raise(ErrorCode::SchemaViolation, "keypoints file " + entry.keypoints_path + " describes \"" +
                                            rec.image_id + "\", manifest expects \"" +
                                            entry.capture_id + "\"");
    }
    if (rec.keypoints.hand_side() != entry.hand_side) {
      raise(ErrorCode::SchemaViolation,
            "keypoints file and manifest disagree on the hand side of " + entry.capture_id);
    }
    kps = rec.keypoints;
  }

  ProcessedCapture out = process_image(img, kps, cfg);
  out.subject_id = entry.subject_id;
  out.capture_id = entry.capture_id;
  out.age_months = entry.age_months;
  return out;
}

PipelineRunStats run_pipeline(const std::string& manifest_path, const PipelineConfig& cfg,
                              const std::string& out_dir) {
  cfg.validate();
  const Manifest manifest = load_manifest(manifest_path);
  const std::string dataset_dir = manifest_directory(manifest_path);

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "roi", ec);
  fs::create_directories(fs::path(out_dir) / "emb", ec);
  if (ec) raise(ErrorCode::IoError, "cannot create " + out_dir + ": " + ec.message());
  write_text_file(fs::path(out_dir) / "config.txt", pipeline_config_to_text(cfg));

  const int n = static_cast<int>(manifest.entries.size());
  PipelineRunStats stats;
  std::mutex stats_mutex;
  parallel_for(n, cfg.jobs, [&](int i) {
    const ManifestEntry& entry = manifest.entries[static_cast<std::size_t>(i)];
    try {
      const ProcessedCapture pc = process_capture(manifest, dataset_dir, i, cfg);
      write_png(pc.roi, (fs::path(out_dir) / "roi" / (entry.capture_id + ".png")).string());
      for (const Embedding& e : pc.embeddings) {
        const std::string name = entry.capture_id + "." + patch_id_name(e.patch_id) + ".plme";
        save_embedding(e, (fs::path(out_dir) / "emb" / name).string());
      }
      std::lock_guard<std::mutex> lock(stats_mutex);
      ++stats.processed;
    } catch (const Error& e) {
      log_at(kLogError, "capture %s failed: %s", entry.capture_id.c_str(), e.what());
      std::lock_guard<std::mutex> lock(stats_mutex);
      ++stats.failed;
    }
  });
  log_at(kLogInfo, "pipeline: %d processed, %d failed", stats.processed, stats.failed);
  return stats;
}

namespace {

EvalMetrics metrics_from_records(const std::vector<ScoreRecord>& records) {
  const RocCurve roc = compute_roc(records);
  const OperatingPoint op01 = tar_at_far(roc, 0.001);
  const OperatingPoint op1 = tar_at_far(roc, 0.01);
  EvalMetrics m;
  m.eer = eer(roc);
  m.tar_at_far_0_1pct = op01.tar;
  m.threshold_far_0_1pct = op01.threshold;
  m.tar_at_far_1pct = op1.tar;
  m.threshold_far_1pct = op1.threshold;
  for (const ScoreRecord& r : records) (r.genuine ? m.genuine_pairs : m.impostor_pairs) += 1;
  return m;
}

}  // namespace

EvalMetrics run_eval(const std::string& manifest_path, const PipelineConfig& cfg,
                     const std::string& out_dir) {
  cfg.validate();
  const Manifest manifest = load_manifest(manifest_path);
  const std::string dataset_dir = manifest_directory(manifest_path);
  const std::vector<ProcessedCapture> captures = process_all(manifest, dataset_dir, cfg);
  log_at(kLogInfo, "eval: %zu captures processed", captures.size());

  PairPolicy policy;
  policy.impostor = cfg.impostor_policy;
  policy.impostor_cap = cfg.impostor_cap;
  policy.seed = cfg.seed;
  const std::vector<PairSpec> pairs = generate_pairs(manifest, policy);

  std::vector<ScoreRecord> records(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), cfg.jobs, [&](int i) {
    const PairSpec& pair = pairs[static_cast<std::size_t>(i)];
    const ProcessedCapture& probe = captures[static_cast<std::size_t>(pair.probe_index)];
    const ProcessedCapture& gallery = captures[static_cast<std::size_t>(pair.gallery_index)];

    double score = 0.0;
    if (cfg.realign) {
      const Image aligned = realign(probe.roi, gallery.roi, cfg.realign_params);
      if (cfg.ensemble) {
        score = fused_score(embed_patches(aligned, cfg.descriptor), gallery.embeddings);
      } else {
        score = similarity(extract_descriptor(aligned, cfg.descriptor), gallery.embeddings[0]);
      }
    } else if (cfg.ensemble) {
      score = fused_score(probe.embeddings, gallery.embeddings);
    } else {
      score = similarity(probe.embeddings[0], gallery.embeddings[0]);
    }

    ScoreRecord& r = records[static_cast<std::size_t>(i)];
    r.probe_id = probe.capture_id;
    r.gallery_id = gallery.capture_id;
    r.subject_a = probe.subject_id;
    r.subject_b = gallery.subject_id;
    r.score = score;
    r.genuine = pair.genuine;
  });
  log_at(kLogInfo, "eval: %zu comparisons scored", records.size());

  const std::vector<RecordGroup> groups = age_groups(manifest, pairs, records);
  export_report(records, groups, out_dir);
  write_text_file(fs::path(out_dir) / "config.txt", pipeline_config_to_text(cfg));
  return metrics_from_records(records);
}

FuseMetrics run_fuse(const std::string& csv_a, const std::string& csv_b,
                     const std::string& out_dir) {
  const std::vector<ScoreRecord> a = load_score_csv(csv_a);
  const std::vector<ScoreRecord> b = load_score_csv(csv_b);
  if (a.empty()) raise(ErrorCode::EmptyManifest, csv_a + " holds no comparisons");
  if (a.size() != b.size()) {
    raise(ErrorCode::LengthMismatch,
          "score files list " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
              " comparisons");
  }

  std::unordered_map<std::string, std::size_t> index_b;
  index_b.reserve(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    const std::string key = b[j].probe_id + "\x1f" + b[j].gallery_id;
    if (!index_b.emplace(key, j).second) {
      raise(ErrorCode::DuplicateCapture,
            csv_b + ": pair (" + b[j].probe_id + ", " + b[j].gallery_id + ") listed twice");
    }
  }

  const RocCurve roc_a = compute_roc(a);
  const RocCurve roc_b = compute_roc(b);
  const double thr_a = tar_at_far(roc_a, 0.001).threshold;
  const double thr_b = tar_at_far(roc_b, 0.001).threshold;

  std::vector<bool> accept_a(a.size());
  std::vector<bool> accept_b(a.size());
  std::vector<ScoreRecord> fused(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string key = a[i].probe_id + "\x1f" + a[i].gallery_id;
    const auto it = index_b.find(key);
    if (it == index_b.end()) {
      raise(ErrorCode::LengthMismatch, "pair (" + a[i].probe_id + ", " + a[i].gallery_id +
                                           ") is missing from " + csv_b);
    }
    const ScoreRecord& rb = b[it->second];
    if (rb.genuine != a[i].genuine) {
      raise(ErrorCode::SchemaViolation, "pair (" + a[i].probe_id + ", " + a[i].gallery_id +
                                            ") has conflicting genuine labels");
    }
    accept_a[i] = a[i].score >= thr_a;
    accept_b[i] = rb.score >= thr_b;
    fused[i] = a[i];
    fused[i].score = sum_fuse(a[i].score, rb.score);
  }

  const ContingencyTable table = contingency(accept_a, accept_b);
  export_report(fused, {}, out_dir);

  std::string csv = "both_match,a_only,b_only,neither,total\n";
  csv += std::to_string(table.both_match) + "," + std::to_string(table.a_only) + "," +
         std::to_string(table.b_only) + "," + std::to_string(table.neither) + "," +
         std::to_string(table.total()) + "\n";
  write_text_file(fs::path(out_dir) / "contingency.csv", csv);

  std::string txt;
  txt += "threshold_a " + shortest_double(thr_a) + "\n";
  txt += "threshold_b " + shortest_double(thr_b) + "\n";
  txt += "both_match " + std::to_string(table.both_match) + "\n";
  txt += "a_only " + std::to_string(table.a_only) + "\n";
  txt += "b_only " + std::to_string(table.b_only) + "\n";
  txt += "neither " + std::to_string(table.neither) + "\n";
  txt += "total " + std::to_string(table.total()) + "\n";
  write_text_file(fs::path(out_dir) / "fusion.txt", txt);

  FuseMetrics out;
  out.threshold_a = thr_a;
  out.threshold_b = thr_b;
  out.table = table;
  out.fused = metrics_from_records(fused);
  return out;
}

int run_enroll(const std::string& manifest_path, const PipelineConfig& cfg,
               const std::string& gallery_path) {
  cfg.validate();
  const Manifest manifest = load_manifest(manifest_path);
  const std::string dataset_dir = manifest_directory(manifest_path);
  const std::vector<ProcessedCapture> captures = process_all(manifest, dataset_dir, cfg);

  Gallery gallery;
  for (std::size_t i = 0; i < captures.size(); ++i) {
    const ManifestEntry& entry = manifest.entries[i];
    GalleryEntry ge;
    ge.subject_id = entry.subject_id;
    ge.capture_id = entry.capture_id;
    ge.hand_side = entry.hand_side;
    if (entry.age_months >= 6 && entry.age_months <= 48) ge.age_months = entry.age_months;
    ge.embeddings = captures[i].embeddings;
    ge.enrolled_at = 0;  // keep gallery files byte-stable across reruns
    gallery.enroll(std::move(ge));
  }
  save_gallery(gallery, gallery_path);
  log_at(kLogInfo, "enroll: %zu captures into %s", captures.size(), gallery_path.c_str());
  return static_cast<int>(captures.size());
}

namespace {

std::array<Embedding, kNumPatches> embed_single(const std::string& image_path,
                                                const std::string& keypoints_path,
                                                const PipelineConfig& cfg) {
  const Image img = read_image(image_path);
  std::optional<KeypointSet> kps;
  if (!keypoints_path.empty()) kps = load_keypoints(keypoints_path).keypoints;
  return process_image(img, kps, cfg).embeddings;
}

}  // namespace

VerifyResult run_verify(const std::string& gallery_path, const std::string& image_path,
                        const std::string& keypoints_path, const std::string& subject_id,
                        const PipelineConfig& cfg) {
  cfg.validate();
  const Gallery gallery = load_gallery(gallery_path);
  const std::array<Embedding, kNumPatches> probe = embed_single(image_path, keypoints_path, cfg);
  return gallery.verify(subject_id, probe, cfg.similarity_threshold);
}

std::vector<RankedMatch> run_identify(const std::string& gallery_path,
                                      const std::string& image_path,
                                      const std::string& keypoints_path, int top_n,
                                      const PipelineConfig& cfg) {
  cfg.validate();
  const Gallery gallery = load_gallery(gallery_path);
  const std::array<Embedding, kNumPatches> probe = embed_single(image_path, keypoints_path, cfg);
  return gallery.identify_topn(probe, top_n);
}

}  // namespace palmpipe
