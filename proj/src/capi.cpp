// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/palmpipe.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "palmpipe/error.hpp"
#include "palmpipe/pipeline.hpp"
#include "palmpipe/synth.hpp"

namespace {

thread_local std::string g_last_error;

// ErrorCode values are declared in the same order as pp_status.
static_assert(static_cast<int>(palmpipe::ErrorCode::BadArgument) == PP_ERR_BAD_ARGUMENT);
static_assert(static_cast<int>(palmpipe::ErrorCode::ParseError) == PP_ERR_PARSE);
static_assert(static_cast<int>(palmpipe::ErrorCode::ValleysNotFound) == PP_ERR_VALLEYS_NOT_FOUND);
static_assert(static_cast<int>(palmpipe::ErrorCode::IoError) == PP_ERR_IO);

pp_status map_code(palmpipe::ErrorCode code) {
  return static_cast<pp_status>(static_cast<int>(code));
}

template <typename Fn>
pp_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PP_OK;
  } catch (const palmpipe::Error& e) {
    // what() leads with the error code name; the status already carries
    // that, so keep only the message.
    const std::string prefix = std::string(palmpipe::error_code_name(e.code())) + ": ";
    const std::string what = e.what();
    g_last_error = what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return PP_ERR_INTERNAL;
  }
}

pp_status require(bool ok, const char* message) {
  if (ok) return PP_OK;
  g_last_error = message;
  return PP_ERR_BAD_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

void fill(pp_eval_metrics* out, const palmpipe::EvalMetrics& m) {
  if (out == nullptr) return;
  out->eer = m.eer;
  out->tar_at_far_0_1pct = m.tar_at_far_0_1pct;
  out->threshold_far_0_1pct = m.threshold_far_0_1pct;
  out->tar_at_far_1pct = m.tar_at_far_1pct;
  out->threshold_far_1pct = m.threshold_far_1pct;
  out->genuine_pairs = m.genuine_pairs;
  out->impostor_pairs = m.impostor_pairs;
}

}  // namespace

struct pp_config {
  palmpipe::PipelineConfig cfg;
};

extern "C" {

const char* pp_status_name(pp_status status) {
  switch (status) {
    case PP_OK: return "ok";
    case PP_ERR_BAD_ARGUMENT: return "bad_argument";
    case PP_ERR_OUT_OF_BOUNDS: return "out_of_bounds";
    case PP_ERR_BAD_WINDOW: return "bad_window";
    case PP_ERR_BAD_SIZE: return "bad_size";
    case PP_ERR_DEGENERATE_CONFIGURATION: return "degenerate_configuration";
    case PP_ERR_SINGULAR_HOMOGRAPHY: return "singular_homography";
    case PP_ERR_INSUFFICIENT_POINTS: return "insufficient_points";
    case PP_ERR_COLLINEAR_POINTS: return "collinear_points";
    case PP_ERR_DUPLICATE_SOURCE_POINTS: return "duplicate_source_points";
    case PP_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case PP_ERR_EXTRACTOR_MISMATCH: return "extractor_mismatch";
    case PP_ERR_PARSE: return "parse";
    case PP_ERR_SCHEMA_VIOLATION: return "schema_violation";
    case PP_ERR_SEGMENTATION_FAILED: return "segmentation_failed";
    case PP_ERR_VALLEYS_NOT_FOUND: return "valleys_not_found";
    case PP_ERR_WRONG_ARITY: return "wrong_arity";
    case PP_ERR_OUT_OF_RANGE_SCORE: return "out_of_range_score";
    case PP_ERR_LENGTH_MISMATCH: return "length_mismatch";
    case PP_ERR_EMPTY_MANIFEST: return "empty_manifest";
    case PP_ERR_MISSING_CLASS: return "missing_class";
    case PP_ERR_DUPLICATE_CAPTURE: return "duplicate_capture";
    case PP_ERR_UNKNOWN_SUBJECT: return "unknown_subject";
    case PP_ERR_EMPTY_GALLERY: return "empty_gallery";
    case PP_ERR_IO: return "io";
    case PP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* pp_last_error(void) { return g_last_error.c_str(); }

const char* pp_version(void) { return "1.0.0"; }

void pp_free(char* text) { std::free(text); }

pp_config* pp_config_new(void) { return new (std::nothrow) pp_config{}; }

pp_config* pp_config_load(const char* path) {
  if (path == nullptr) {
    g_last_error = "path must not be NULL";
    return nullptr;
  }
  pp_config* handle = new (std::nothrow) pp_config{};
  if (handle == nullptr) {
    g_last_error = "out of memory";
    return nullptr;
  }
  const pp_status st = guarded([&] { handle->cfg = palmpipe::load_pipeline_config(path); });
  if (st != PP_OK) {
    delete handle;
    return nullptr;
  }
  return handle;
}

pp_status pp_config_set(pp_config* cfg, const char* key, const char* value) {
  pp_status st = require(cfg != nullptr, "cfg must not be NULL");
  if (st != PP_OK) return st;
  st = require(key != nullptr && value != nullptr, "key and value must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] { palmpipe::set_config_value(cfg->cfg, key, value); });
}

pp_status pp_config_text(const pp_config* cfg, char** out_text) {
  pp_status st = require(cfg != nullptr && out_text != nullptr,
                         "cfg and out_text must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] {
    *out_text = dup_string(palmpipe::pipeline_config_to_text(cfg->cfg));
    if (*out_text == nullptr) palmpipe::raise(palmpipe::ErrorCode::BadArgument, "out of memory");
  });
}

void pp_config_free(pp_config* cfg) { delete cfg; }

pp_status pp_synth(uint64_t n_subjects, uint64_t captures_per_subject, uint64_t seed,
                   const char* out_dir, int image_size, double left_fraction) {
  pp_status st = require(out_dir != nullptr, "out_dir must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] {
    palmpipe::DatasetOptions options;
    if (image_size > 0) options.image_size = image_size;
    if (left_fraction >= 0.0) options.left_hand_fraction = left_fraction;
    palmpipe::generate_dataset(static_cast<int>(n_subjects),
                               static_cast<int>(captures_per_subject), seed, out_dir, options);
  });
}

pp_status pp_pipeline(const char* manifest_path, const pp_config* cfg, const char* out_dir,
                      int* out_processed, int* out_failed) {
  pp_status st = require(manifest_path != nullptr && cfg != nullptr && out_dir != nullptr,
                         "manifest_path, cfg and out_dir must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] {
    const palmpipe::PipelineRunStats stats =
        palmpipe::run_pipeline(manifest_path, cfg->cfg, out_dir);
    if (out_processed != nullptr) *out_processed = stats.processed;
    if (out_failed != nullptr) *out_failed = stats.failed;
  });
}

pp_status pp_eval(const char* manifest_path, const pp_config* cfg, const char* out_dir,
                  pp_eval_metrics* out_metrics) {
  pp_status st = require(manifest_path != nullptr && cfg != nullptr && out_dir != nullptr,
                         "manifest_path, cfg and out_dir must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] { fill(out_metrics, palmpipe::run_eval(manifest_path, cfg->cfg, out_dir)); });
}

pp_status pp_fuse(const char* csv_a, const char* csv_b, const char* out_dir,
                  pp_fuse_metrics* out_metrics) {
  pp_status st = require(csv_a != nullptr && csv_b != nullptr && out_dir != nullptr,
                         "csv_a, csv_b and out_dir must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] {
    const palmpipe::FuseMetrics m = palmpipe::run_fuse(csv_a, csv_b, out_dir);
    if (out_metrics != nullptr) {
      out_metrics->threshold_a = m.threshold_a;
      out_metrics->threshold_b = m.threshold_b;
      out_metrics->both_match = m.table.both_match;
      out_metrics->a_only = m.table.a_only;
      out_metrics->b_only = m.table.b_only;
      out_metrics->neither = m.table.neither;
      fill(&out_metrics->fused, m.fused);
    }
  });
}

pp_status pp_enroll(const char* manifest_path, const pp_config* cfg, const char* gallery_path,
                    int* out_enrolled) {
  pp_status st = require(manifest_path != nullptr && cfg != nullptr && gallery_path != nullptr,
                         "manifest_path, cfg and gallery_path must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] {
    const int n = palmpipe::run_enroll(manifest_path, cfg->cfg, gallery_path);
    if (out_enrolled != nullptr) *out_enrolled = n;
  });
}

pp_status pp_verify(const char* gallery_path, const char* image_path, const char* keypoints_path,
                    const char* subject_id, const pp_config* cfg, int* out_match,
                    double* out_score) {
  pp_status st = require(gallery_path != nullptr && image_path != nullptr &&
                             subject_id != nullptr && cfg != nullptr,
                         "gallery_path, image_path, subject_id and cfg must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] {
    const palmpipe::VerifyResult r =
        palmpipe::run_verify(gallery_path, image_path,
                             keypoints_path == nullptr ? "" : keypoints_path, subject_id,
                             cfg->cfg);
    if (out_match != nullptr) *out_match = r.match ? 1 : 0;
    if (out_score != nullptr) *out_score = r.score;
  });
}

pp_status pp_identify(const char* gallery_path, const char* image_path,
                      const char* keypoints_path, int top_n, const pp_config* cfg,
                      char** out_json) {
  pp_status st = require(gallery_path != nullptr && image_path != nullptr && cfg != nullptr &&
                             out_json != nullptr,
                         "gallery_path, image_path, cfg and out_json must not be NULL");
  if (st != PP_OK) return st;
  return guarded([&] {
    const std::vector<palmpipe::RankedMatch> matches = palmpipe::run_identify(
        gallery_path, image_path, keypoints_path == nullptr ? "" : keypoints_path, top_n,
        cfg->cfg);
    std::string json = "{\"matches\": [";
    for (std::size_t i = 0; i < matches.size(); ++i) {
      if (i > 0) json += ", ";
      char score[64];
      std::snprintf(score, sizeof(score), "%.9f", matches[i].score);
      json += "{\"subject_id\": \"" + json_escape(matches[i].subject_id) + "\", \"score\": ";
      json += score;
      json += "}";
    }
    json += "]}";
    *out_json = dup_string(json);
    if (*out_json == nullptr) palmpipe::raise(palmpipe::ErrorCode::BadArgument, "out of memory");
  });
}

}  // extern "C"
