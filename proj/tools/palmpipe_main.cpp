// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Everything below talks to the shared library
// through its C interface only.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "palmpipe/palmpipe.h"

namespace {

struct ConfigHandle {
  pp_config* ptr = nullptr;
  ~ConfigHandle() { pp_config_free(ptr); }
};

int fail(pp_status status) {
  std::fprintf(stderr, "error: %s: %s\n", pp_status_name(status), pp_last_error());
  return 1;
}

// Matching-workflow options shared by the commands that process captures.
struct MatchFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  bool jobs_given = false;
  std::string keypoints;
  bool enhance_on = false, enhance_off = false;
  bool tps_on = false, tps_off = false;
  bool ensemble_on = false, ensemble_off = false;
  std::vector<std::string> sets;
};

void add_match_flags(CLI::App* cmd, MatchFlags& f) {
  cmd->add_option("--config", f.config_path, "config file (flat key = value text)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "pair-sampling seed")->trigger_on_parse(false);
  cmd->add_option("--jobs", f.jobs, "worker threads (0 = all hardware threads)");
  cmd->add_option("--keypoints", f.keypoints, "keypoint provider: file or heuristic")
      ->check(CLI::IsMember({"file", "heuristic"}));
  CLI::Option* eo = cmd->add_flag("--enhance", f.enhance_on, "force enhancement on");
  CLI::Option* ef = cmd->add_flag("--no-enhance", f.enhance_off, "disable enhancement");
  eo->excludes(ef);
  CLI::Option* to = cmd->add_flag("--tps", f.tps_on, "force TPS re-alignment on");
  CLI::Option* tf = cmd->add_flag("--no-tps", f.tps_off, "disable TPS re-alignment");
  to->excludes(tf);
  CLI::Option* so = cmd->add_flag("--ensemble", f.ensemble_on, "force multi-patch scoring on");
  CLI::Option* sf =
      cmd->add_flag("--no-ensemble", f.ensemble_off, "score the whole patch only");
  so->excludes(sf);
  cmd->add_option("--set", f.sets,
                  "config override key=value; highest precedence, repeatable");
}

// Builds the effective config: defaults < --config file < named flags
// < --set overrides. Returns nullptr after printing an error.
pp_config* build_config(const MatchFlags& f, const CLI::App* cmd) {
  ConfigHandle handle;
  handle.ptr = f.config_path.empty() ? pp_config_new() : pp_config_load(f.config_path.c_str());
  if (handle.ptr == nullptr) {
    std::fprintf(stderr, "error: %s\n", pp_last_error());
    return nullptr;
  }
  auto set = [&handle](const std::string& key, const std::string& value) {
    const pp_status st = pp_config_set(handle.ptr, key.c_str(), value.c_str());
    if (st != PP_OK) {
      std::fprintf(stderr, "error: %s: %s\n", pp_status_name(st), pp_last_error());
      return false;
    }
    return true;
  };
  if (cmd->count("--seed") > 0 && !set("seed", std::to_string(f.seed))) return nullptr;
  if (cmd->count("--jobs") > 0 && !set("jobs", std::to_string(f.jobs))) return nullptr;
  if (!f.keypoints.empty() && !set("keypoint_provider", f.keypoints)) return nullptr;
  if (f.enhance_on && !set("enhance", "true")) return nullptr;
  if (f.enhance_off && !set("enhance", "false")) return nullptr;
  if (f.tps_on && !set("realign", "true")) return nullptr;
  if (f.tps_off && !set("realign", "false")) return nullptr;
  if (f.ensemble_on && !set("ensemble", "true")) return nullptr;
  if (f.ensemble_off && !set("ensemble", "false")) return nullptr;
  for (const std::string& kv : f.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects key=value, got \"%s\"\n", kv.c_str());
      return nullptr;
    }
    if (!set(kv.substr(0, eq), kv.substr(eq + 1))) return nullptr;
  }
  pp_config* out = handle.ptr;
  handle.ptr = nullptr;
  return out;
}

void print_eval_metrics(const pp_eval_metrics& m) {
  std::printf("genuine %llu impostor %llu\n", static_cast<unsigned long long>(m.genuine_pairs),
              static_cast<unsigned long long>(m.impostor_pairs));
  std::printf("eer %.6f\n", m.eer);
  std::printf("tar_at_far_0.001 %.6f threshold %.9g\n", m.tar_at_far_0_1pct,
              m.threshold_far_0_1pct);
  std::printf("tar_at_far_0.010 %.6f threshold %.9g\n", m.tar_at_far_1pct, m.threshold_far_1pct);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"palmpipe: contactless palmprint recognition toolkit"};
  app.require_subcommand(1);
  app.footer("Environment: PALMPIPE_LOG=error|info|debug controls library logging.");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  std::uint64_t sy_subjects = 0, sy_captures = 0, sy_seed = 0;
  std::string sy_out;
  int sy_image_size = 0;
  double sy_left_fraction = -1.0;
  synth->add_option("--subjects", sy_subjects, "number of identities")->required();
  synth->add_option("--captures", sy_captures, "captures per identity")->required();
  synth->add_option("--seed", sy_seed, "dataset seed")->required();
  synth->add_option("--out", sy_out, "output directory")->required();
  synth->add_option("--image-size", sy_image_size, "capture frame size in px (default 416)");
  synth->add_option("--left-fraction", sy_left_fraction,
                    "fraction of left-hand subjects (default 0.5)");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "extract ROI and embeddings for a dataset");
  MatchFlags pl_flags;
  std::string pl_manifest, pl_out;
  pipeline->add_option("--manifest", pl_manifest, "dataset manifest.json")->required();
  pipeline->add_option("--out", pl_out, "output directory")->required();
  add_match_flags(pipeline, pl_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "verification benchmark with report files");
  MatchFlags ev_flags;
  std::string ev_manifest, ev_out;
  eval->add_option("--manifest", ev_manifest, "dataset manifest.json")->required();
  eval->add_option("--out", ev_out, "report directory")->required();
  add_match_flags(eval, ev_flags);

  // fuse
  auto* fuse = app.add_subcommand("fuse", "sum-score fusion of two matchers' score files");
  std::string fu_a, fu_b, fu_out;
  fuse->add_option("--scores-a", fu_a, "in-house score csv, scores in [0,1]")->required();
  fuse->add_option("--scores-b", fu_b, "external score csv, scores in [0,100]")->required();
  fuse->add_option("--out", fu_out, "report directory")->required();

  // enroll
  auto* enroll = app.add_subcommand("enroll", "build a gallery file from a dataset");
  MatchFlags en_flags;
  std::string en_manifest, en_gallery;
  enroll->add_option("--manifest", en_manifest, "dataset manifest.json")->required();
  enroll->add_option("--gallery", en_gallery, "gallery file to write")->required();
  add_match_flags(enroll, en_flags);

  // verify
  auto* verify = app.add_subcommand("verify", "verify one capture against a subject");
  MatchFlags vf_flags;
  std::string vf_gallery, vf_image, vf_keypoints, vf_subject;
  double vf_threshold = -1.0;
  verify->add_option("--gallery", vf_gallery, "gallery file")->required();
  verify->add_option("--image", vf_image, "capture image (png or pgm)")->required();
  verify->add_option("--subject", vf_subject, "claimed subject id")->required();
  verify->add_option("--keypoint-file", vf_keypoints, "keypoints json for the capture");
  verify->add_option("--threshold", vf_threshold, "accept threshold override in [0,1]");
  add_match_flags(verify, vf_flags);

  // identify
  auto* identify = app.add_subcommand("identify", "rank gallery subjects for one capture");
  MatchFlags id_flags;
  std::string id_gallery, id_image, id_keypoints;
  int id_top = 5;
  identify->add_option("--gallery", id_gallery, "gallery file")->required();
  identify->add_option("--image", id_image, "capture image (png or pgm)")->required();
  identify->add_option("--keypoint-file", id_keypoints, "keypoints json for the capture");
  identify->add_option("--top", id_top, "number of ranked subjects (default 5)");
  add_match_flags(identify, id_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*synth) {
    const pp_status st = pp_synth(sy_subjects, sy_captures, sy_seed, sy_out.c_str(),
                                  sy_image_size, sy_left_fraction);
    if (st != PP_OK) return fail(st);
    std::printf("dataset %s subjects %llu captures %llu seed %llu\n", sy_out.c_str(),
                static_cast<unsigned long long>(sy_subjects),
                static_cast<unsigned long long>(sy_captures),
                static_cast<unsigned long long>(sy_seed));
    return 0;
  }

  if (*pipeline) {
    ConfigHandle cfg{build_config(pl_flags, pipeline)};
    if (cfg.ptr == nullptr) return 1;
    int processed = 0, failed = 0;
    const pp_status st = pp_pipeline(pl_manifest.c_str(), cfg.ptr, pl_out.c_str(), &processed,
                                     &failed);
    if (st != PP_OK) return fail(st);
    std::printf("processed %d failed %d out %s\n", processed, failed, pl_out.c_str());
    return failed > 0 ? 1 : 0;
  }

  if (*eval) {
    ConfigHandle cfg{build_config(ev_flags, eval)};
    if (cfg.ptr == nullptr) return 1;
    pp_eval_metrics metrics{};
    const pp_status st = pp_eval(ev_manifest.c_str(), cfg.ptr, ev_out.c_str(), &metrics);
    if (st != PP_OK) return fail(st);
    print_eval_metrics(metrics);
    std::printf("report %s\n", ev_out.c_str());
    return 0;
  }

  if (*fuse) {
    pp_fuse_metrics metrics{};
    const pp_status st = pp_fuse(fu_a.c_str(), fu_b.c_str(), fu_out.c_str(), &metrics);
    if (st != PP_OK) return fail(st);
    std::printf("threshold_a %.9g threshold_b %.9g\n", metrics.threshold_a, metrics.threshold_b);
    std::printf("both_match %llu a_only %llu b_only %llu neither %llu total %llu\n",
                static_cast<unsigned long long>(metrics.both_match),
                static_cast<unsigned long long>(metrics.a_only),
                static_cast<unsigned long long>(metrics.b_only),
                static_cast<unsigned long long>(metrics.neither),
                static_cast<unsigned long long>(metrics.both_match + metrics.a_only +
                                                metrics.b_only + metrics.neither));
    print_eval_metrics(metrics.fused);
    std::printf("report %s\n", fu_out.c_str());
    return 0;
  }

  if (*enroll) {
    ConfigHandle cfg{build_config(en_flags, enroll)};
    if (cfg.ptr == nullptr) return 1;
    int enrolled = 0;
    const pp_status st = pp_enroll(en_manifest.c_str(), cfg.ptr, en_gallery.c_str(), &enrolled);
    if (st != PP_OK) return fail(st);
    std::printf("enrolled %d gallery %s\n", enrolled, en_gallery.c_str());
    return 0;
  }

  if (*verify) {
    ConfigHandle cfg{build_config(vf_flags, verify)};
    if (cfg.ptr == nullptr) return 1;
    if (vf_threshold >= 0.0) {
      char value[64];
      std::snprintf(value, sizeof(value), "%.17g", vf_threshold);
      const pp_status st = pp_config_set(cfg.ptr, "similarity_threshold", value);
      if (st != PP_OK) return fail(st);
    }
    int match = 0;
    double score = 0.0;
    const pp_status st =
        pp_verify(vf_gallery.c_str(), vf_image.c_str(),
                  vf_keypoints.empty() ? nullptr : vf_keypoints.c_str(), vf_subject.c_str(),
                  cfg.ptr, &match, &score);
    if (st != PP_OK) return fail(st);
    std::printf("match %s score %.6f\n", match != 0 ? "true" : "false", score);
    return 0;
  }

  if (*identify) {
    ConfigHandle cfg{build_config(id_flags, identify)};
    if (cfg.ptr == nullptr) return 1;
    char* json = nullptr;
    const pp_status st =
        pp_identify(id_gallery.c_str(), id_image.c_str(),
                    id_keypoints.empty() ? nullptr : id_keypoints.c_str(), id_top, cfg.ptr,
                    &json);
    if (st != PP_OK) return fail(st);
    std::printf("%s\n", json);
    pp_free(json);
    return 0;
  }

  return 2;
}
