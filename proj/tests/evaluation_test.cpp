// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "palmpipe/evaluation.hpp"
#include "palmpipe/image.hpp"
#include "palmpipe/manifest.hpp"
#include "palmpipe/rng.hpp"
#include "testutil.hpp"

using namespace palmpipe;

namespace {

std::vector<ScoreRecord> make_records(const std::vector<double>& genuine,
                                      const std::vector<double>& impostor) {
  std::vector<ScoreRecord> out;
  int n = 0;
  for (const double s : genuine) {
    ScoreRecord r;
    r.probe_id = "g" + std::to_string(n);
    r.gallery_id = "h" + std::to_string(n++);
    r.subject_a = "A";
    r.subject_b = "A";
    r.score = s;
    r.genuine = true;
    out.push_back(r);
  }
  for (const double s : impostor) {
    ScoreRecord r;
    r.probe_id = "i" + std::to_string(n);
    r.gallery_id = "j" + std::to_string(n++);
    r.subject_a = "A";
    r.subject_b = "B";
    r.score = s;
    r.genuine = false;
    out.push_back(r);
  }
  return out;
}

/// Independent counting oracle: for every distinct score as threshold,
/// count the fractions of scores >= threshold per class.
RocCurve brute_force_roc(const std::vector<ScoreRecord>& records) {
  std::set<double> distinct;
  std::size_t n_gen = 0, n_imp = 0;
  for (const ScoreRecord& r : records) {
    distinct.insert(r.score);
    (r.genuine ? n_gen : n_imp)++;
  }
  RocCurve roc;
  for (const double t : distinct) {
    std::size_t gen_ge = 0, imp_ge = 0;
    for (const ScoreRecord& r : records) {
      if (r.score >= t) (r.genuine ? gen_ge : imp_ge)++;
    }
    roc.thresholds.push_back(t);
    roc.far.push_back(static_cast<double>(imp_ge) / static_cast<double>(n_imp));
    roc.tar.push_back(static_cast<double>(gen_ge) / static_cast<double>(n_gen));
  }
  return roc;
}

Manifest tiny_manifest(int subjects, int captures) {
  Manifest m;
  m.seed = 5;
  for (int s = 0; s < subjects; ++s) {
    for (int c = 0; c < captures; ++c) {
      ManifestEntry e;
      e.subject_id = "S" + std::to_string(s);
      e.capture_id = e.subject_id + "_C" + std::to_string(c);
      e.image_path = e.capture_id + ".png";
      e.keypoints_path = e.capture_id + ".json";
      e.age_months = 24;
      m.entries.push_back(e);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("pair generation enumerates genuine and impostor pairs") {
  PairPolicy policy;

  // 2 subjects x 2 captures: 1 genuine pair per subject, one impostor pair
  // between the two first captures.
  const std::vector<PairSpec> small = generate_pairs(tiny_manifest(2, 2), policy);
  int genuine = 0, impostor = 0;
  for (const PairSpec& p : small) (p.genuine ? genuine : impostor)++;
  CHECK(genuine == 2);
  CHECK(impostor == 1);

  // n subjects x k captures: n * k(k-1)/2 genuine pairs.
  const std::vector<PairSpec> big = generate_pairs(tiny_manifest(5, 4), policy);
  genuine = 0;
  for (const PairSpec& p : big) genuine += p.genuine ? 1 : 0;
  CHECK(genuine == 5 * 4 * 3 / 2);

  // All-cross impostor policy: every cross-subject capture pair.
  PairPolicy cross;
  cross.impostor = ImpostorPolicy::AllCross;
  const std::vector<PairSpec> all = generate_pairs(tiny_manifest(3, 2), cross);
  impostor = 0;
  for (const PairSpec& p : all) impostor += p.genuine ? 0 : 1;
  CHECK(impostor == 6 * 5 / 2 - 3);

  // The cap subsamples deterministically.
  PairPolicy capped = cross;
  capped.impostor_cap = 5;
  capped.seed = 9;
  const std::vector<PairSpec> a = generate_pairs(tiny_manifest(3, 2), capped);
  const std::vector<PairSpec> b = generate_pairs(tiny_manifest(3, 2), capped);
  impostor = 0;
  for (const PairSpec& p : a) impostor += p.genuine ? 0 : 1;
  CHECK(impostor == 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].probe_index == b[i].probe_index);
    CHECK(a[i].gallery_index == b[i].gallery_index);
    CHECK(a[i].genuine == b[i].genuine);
  }

  CHECK(testutil::thrown_code([&] { generate_pairs(Manifest{}, policy); }) ==
        ErrorCode::EmptyManifest);
  CHECK(std::string(impostor_policy_name(ImpostorPolicy::FirstCapture)) == "first_capture");
  CHECK(impostor_policy_from_name("all_cross") == ImpostorPolicy::AllCross);
}

TEST_CASE("roc computation on separable and identical distributions") {
  // Perfect separation: TAR = 1 wherever FAR < 1.
  const RocCurve sep = compute_roc(make_records({0.9, 0.9, 0.9}, {0.1, 0.1}));
  sep.validate();
  for (std::size_t i = 0; i < sep.thresholds.size(); ++i) {
    if (sep.far[i] < 1.0) CHECK(sep.tar[i] == doctest::Approx(1.0));
  }

  // Identical discrete distributions: TAR(t) = FAR(t) at every threshold.
  const std::vector<double> vals = {0.2, 0.4, 0.6, 0.8};
  const RocCurve same = compute_roc(make_records(vals, vals));
  for (std::size_t i = 0; i < same.thresholds.size(); ++i) {
    CHECK(same.tar[i] == doctest::Approx(same.far[i]));
  }

  CHECK(testutil::thrown_code([] { compute_roc(make_records({0.5}, {})); }) ==
        ErrorCode::MissingClass);
  CHECK(testutil::thrown_code([] { compute_roc(make_records({}, {0.5})); }) ==
        ErrorCode::MissingClass);
}

TEST_CASE("roc matches the brute-force counting oracle exactly") {
  Rng rng(2024);
  std::vector<double> genuine, impostor;
  for (int i = 0; i < 600; ++i) genuine.push_back(clamp01(rng.normal(0.7, 0.12)));
  for (int i = 0; i < 400; ++i) impostor.push_back(clamp01(rng.normal(0.35, 0.1)));
  // Inject exact ties across the classes to exercise the >= convention.
  genuine.push_back(0.5);
  impostor.push_back(0.5);

  const std::vector<ScoreRecord> records = make_records(genuine, impostor);
  const RocCurve got = compute_roc(records);
  const RocCurve want = brute_force_roc(records);
  REQUIRE(got.thresholds.size() == want.thresholds.size());
  for (std::size_t i = 0; i < want.thresholds.size(); ++i) {
    CHECK(got.thresholds[i] == want.thresholds[i]);
    CHECK(got.far[i] == want.far[i]);
    CHECK(got.tar[i] == want.tar[i]);
  }
}

TEST_CASE("operating point lookup at fixed far targets") {
  // Perfect separation reaches TAR 1 at any target.
  const RocCurve sep = compute_roc(make_records({0.9, 0.95}, {0.1, 0.2}));
  CHECK(tar_at_far(sep, 0.01).tar == doctest::Approx(1.0));

  // Hand-counted fixture: 10 impostor scores 0.1..0.9 and 0.95, genuine
  // {0.5, 0.92, 0.93}. At far 0.10 the smallest threshold with at most one
  // impostor at or above it is 0.92 (ties count as matches), giving 2 of 3
  // genuine. At far 0.20 the threshold drops to 0.9.
  const std::vector<double> imp = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  const RocCurve fixture = compute_roc(make_records({0.5, 0.92, 0.93}, imp));
  const OperatingPoint at10 = tar_at_far(fixture, 0.10);
  CHECK(at10.threshold == doctest::Approx(0.92));
  CHECK(at10.tar == doctest::Approx(2.0 / 3.0));
  const OperatingPoint at20 = tar_at_far(fixture, 0.20);
  CHECK(at20.threshold == doctest::Approx(0.9));
  CHECK(at20.tar == doctest::Approx(2.0 / 3.0));

  // far target below 1/#impostor with all-distinct scores: no threshold
  // reaches it, the sentinel (0, +inf) comes back.
  const OperatingPoint none = tar_at_far(fixture, 0.05);
  CHECK(none.tar == 0.0);
  CHECK(std::isinf(none.threshold));

  // Monotone: a looser far target never lowers TAR.
  Rng rng(7);
  std::vector<double> g, i2;
  for (int i = 0; i < 200; ++i) g.push_back(rng.uniform(0.3, 1.0));
  for (int i = 0; i < 200; ++i) i2.push_back(rng.uniform(0.0, 0.7));
  const RocCurve rnd = compute_roc(make_records(g, i2));
  double last = -1.0;
  for (const double target : {0.001, 0.01, 0.05, 0.1, 0.2, 0.5}) {
    const double tar = tar_at_far(rnd, target).tar;
    CHECK(tar >= last);
    last = tar;
  }
}

TEST_CASE("equal error rate on reference distributions") {
  CHECK(eer(compute_roc(make_records({0.9, 0.95}, {0.1, 0.2}))) == doctest::Approx(0.0));

  const std::vector<double> vals = {0.2, 0.4, 0.6, 0.8};
  CHECK(eer(compute_roc(make_records(vals, vals))) == doctest::Approx(0.5).epsilon(0.01));

  // Two seeded Gaussians against a brute-force crossing search.
  Rng rng(1515);
  std::vector<double> genuine, impostor;
  for (int i = 0; i < 10000; ++i) genuine.push_back(clamp01(rng.normal(0.7, 0.1)));
  for (int i = 0; i < 10000; ++i) impostor.push_back(clamp01(rng.normal(0.3, 0.1)));
  const std::vector<ScoreRecord> records = make_records(genuine, impostor);
  const double got = eer(compute_roc(records));

  double best_gap = std::numeric_limits<double>::infinity();
  double oracle = 0.5;
  const RocCurve bf = brute_force_roc(records);
  for (std::size_t i = 0; i < bf.thresholds.size(); ++i) {
    const double frr = 1.0 - bf.tar[i];
    if (std::abs(bf.far[i] - frr) < best_gap) {
      best_gap = std::abs(bf.far[i] - frr);
      oracle = (bf.far[i] + frr) / 2.0;
    }
  }
  CHECK(std::abs(got - oracle) < 0.005);
  CHECK(got > 0.0);
  CHECK(got < 0.5);
}

TEST_CASE("score csv round trips with stable header") {
  const testutil::TempDir tmp("eval_csv");
  const std::vector<ScoreRecord> records =
      make_records({0.5, 0.25, 0.125}, {0.0625, 0.03125});
  const std::string path = tmp.str("scores.csv");
  save_score_csv(records, path);

  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "probe_id,gallery_id,genuine,score");
  // LF endings only.
  const std::vector<std::uint8_t> bytes = testutil::slurp(path);
  CHECK(std::find(bytes.begin(), bytes.end(), '\r') == bytes.end());

  const std::vector<ScoreRecord> back = load_score_csv(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].probe_id == records[i].probe_id);
    CHECK(back[i].gallery_id == records[i].gallery_id);
    CHECK(back[i].genuine == records[i].genuine);
    CHECK(back[i].score == records[i].score);
  }
}

TEST_CASE("report export is deterministic and conserves counts") {
  const testutil::TempDir tmp("eval_report");
  Rng rng(99);
  std::vector<double> g, im;
  for (int i = 0; i < 300; ++i) g.push_back(clamp01(rng.normal(0.7, 0.1)));
  for (int i = 0; i < 500; ++i) im.push_back(clamp01(rng.normal(0.4, 0.1)));
  const std::vector<ScoreRecord> records = make_records(g, im);

  export_report(records, {}, tmp.str("a"));
  export_report(records, {}, tmp.str("b"));
  for (const char* name : {"scores.csv", "roc.csv", "histogram.csv", "summary.txt"}) {
    CHECK(testutil::files_equal(tmp.str("a") + "/" + name, tmp.str("b") + "/" + name));
  }

  // Histogram bin counts sum to the record count per class.
  std::ifstream hist(tmp.str("a") + "/histogram.csv");
  std::string line;
  std::getline(hist, line);  // header
  std::uint64_t genuine_total = 0, impostor_total = 0;
  while (std::getline(hist, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // bin low edge
    std::getline(ss, cell, ',');
    genuine_total += std::stoull(cell);
    std::getline(ss, cell, ',');
    impostor_total += std::stoull(cell);
  }
  CHECK(genuine_total == g.size());
  CHECK(impostor_total == im.size());

  CHECK(testutil::thrown_code([&] { export_report({}, {}, tmp.str("c")); }) != ErrorCode::None);
  CHECK_FALSE(std::filesystem::exists(tmp.str("c") + "/scores.csv"));
}
