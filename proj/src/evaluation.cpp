// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "palmpipe/error.hpp"
#include "palmpipe/rng.hpp"

namespace palmpipe {

namespace {

struct SubjectGroup {
  std::string id;
  std::vector<int> captures;  // manifest entry indices, manifest order
};

std::vector<SubjectGroup> group_by_subject(const Manifest& manifest) {
  std::vector<SubjectGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) {
    const std::string& sid = manifest.entries[i].subject_id;
    auto it = index.find(sid);
    if (it == index.end()) {
      index.emplace(sid, groups.size());
      groups.push_back(SubjectGroup{sid, {i}});
    } else {
      groups[it->second].captures.push_back(i);
    }
  }
  return groups;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void check_csv_id(const std::string& id) {
  if (id.empty()) raise(ErrorCode::BadArgument, "empty identifier in score record");
  for (char c : id) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') {
      raise(ErrorCode::BadArgument, "identifier \"" + id + "\" contains CSV metacharacters");
    }
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(ErrorCode::IoError, "cannot open for write: " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) raise(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace

void RocCurve::validate() const {
  if (thresholds.size() != far.size() || thresholds.size() != tar.size()) {
    raise(ErrorCode::LengthMismatch, "ROC arrays have different lengths");
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      raise(ErrorCode::BadArgument, "ROC thresholds must be strictly ascending");
    }
    if (far[i] > far[i - 1] + 1e-12 || tar[i] > tar[i - 1] + 1e-12) {
      raise(ErrorCode::BadArgument, "ROC rates must be non-increasing in the threshold");
    }
  }
}

const char* impostor_policy_name(ImpostorPolicy policy) {
  return policy == ImpostorPolicy::AllCross ? "all_cross" : "first_capture";
}

ImpostorPolicy impostor_policy_from_name(const std::string& name) {
  if (name == "first_capture") return ImpostorPolicy::FirstCapture;
  if (name == "all_cross") return ImpostorPolicy::AllCross;
  raise(ErrorCode::BadArgument, "unknown impostor policy \"" + name + "\"");
}

std::vector<PairSpec> generate_pairs(const Manifest& manifest, const PairPolicy& policy) {
  if (manifest.entries.empty()) raise(ErrorCode::EmptyManifest, "manifest has no captures");
  manifest.validate();
  const std::vector<SubjectGroup> groups = group_by_subject(manifest);
  if (groups.size() < 2) {
    raise(ErrorCode::EmptyManifest, "pairing needs at least 2 subjects");
  }
  for (const SubjectGroup& g : groups) {
    if (g.captures.size() < 2) {
      raise(ErrorCode::EmptyManifest, "subject \"" + g.id + "\" has fewer than 2 captures");
    }
  }

  std::vector<PairSpec> pairs;
  for (const SubjectGroup& g : groups) {
    for (std::size_t a = 0; a < g.captures.size(); ++a) {
      for (std::size_t b = a + 1; b < g.captures.size(); ++b) {
        pairs.push_back(PairSpec{g.captures[a], g.captures[b], true});
      }
    }
  }

  // Impostor candidates as an index space we can either enumerate or
  // sample from without materializing.
  std::vector<int> pool;  // entry indices
  if (policy.impostor == ImpostorPolicy::FirstCapture) {
    pool.reserve(groups.size());
    for (const SubjectGroup& g : groups) pool.push_back(g.captures.front());
  } else {
    pool.reserve(manifest.entries.size());
    for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) pool.push_back(i);
  }
  const std::uint64_t e = pool.size();
  auto same_subject = [&](std::uint64_t a, std::uint64_t b) {
    return manifest.entries[pool[a]].subject_id == manifest.entries[pool[b]].subject_id;
  };
  std::uint64_t impostor_total = e * (e - 1) / 2;
  if (policy.impostor == ImpostorPolicy::AllCross) {
    for (const SubjectGroup& g : groups) {
      const std::uint64_t k = g.captures.size();
      impostor_total -= k * (k - 1) / 2;
    }
  }

  if (impostor_total <= policy.impostor_cap) {
    for (std::uint64_t a = 0; a < e; ++a) {
      for (std::uint64_t b = a + 1; b < e; ++b) {
        if (policy.impostor == ImpostorPolicy::AllCross && same_subject(a, b)) continue;
        pairs.push_back(PairSpec{pool[a], pool[b], false});
      }
    }
    return pairs;
  }

  // Uniform sample without replacement over the triangular index space,
  // rejecting same-subject hits; final order sorted for determinism.
  Rng rng(mix_seed(policy.seed, 0x50414952ULL));
  const std::uint64_t all = e * (e - 1) / 2;
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(policy.impostor_cap * 2);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> sampled;
  sampled.reserve(policy.impostor_cap);
  std::uint64_t attempts = 0;
  const std::uint64_t max_attempts = policy.impostor_cap * 64 + 1024;
  while (sampled.size() < policy.impostor_cap) {
    if (++attempts > max_attempts) {
      raise(ErrorCode::BadArgument, "impostor sampling rejection rate too high");
    }
    const std::uint64_t k = static_cast<std::uint64_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(all - 1)));
    if (!chosen.insert(k).second) continue;
    // Decode triangular index: row a holds (e-1-a) pairs.
    const double ed = static_cast<double>(e);
    double guess = ed - 0.5 - std::sqrt((ed - 0.5) * (ed - 0.5) - 2.0 * static_cast<double>(k));
    std::uint64_t a = guess < 0.0 ? 0 : static_cast<std::uint64_t>(guess);
    auto row_start = [&](std::uint64_t r) { return r * e - r * (r + 1) / 2; };
    while (a > 0 && row_start(a) > k) --a;
    while (a + 1 < e && row_start(a + 1) <= k) ++a;
    const std::uint64_t b = a + 1 + (k - row_start(a));
    if (same_subject(a, b)) continue;
    sampled.emplace_back(a, b);
  }
  std::sort(sampled.begin(), sampled.end());
  for (const auto& [a, b] : sampled) {
    pairs.push_back(PairSpec{pool[a], pool[b], false});
  }
  return pairs;
}

RocCurve compute_roc(const std::vector<ScoreRecord>& records) {
  std::vector<double> genuine;
  std::vector<double> impostor;
  for (const ScoreRecord& r : records) {
    if (!std::isfinite(r.score)) raise(ErrorCode::BadArgument, "non-finite score");
    (r.genuine ? genuine : impostor).push_back(r.score);
  }
  if (genuine.empty() || impostor.empty()) {
    raise(ErrorCode::MissingClass, "need at least one genuine and one impostor score");
  }
  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());

  std::vector<double> thresholds;
  thresholds.reserve(records.size());
  for (const ScoreRecord& r : records) thresholds.push_back(r.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve roc;
  roc.thresholds = std::move(thresholds);
  roc.far.reserve(roc.thresholds.size());
  roc.tar.reserve(roc.thresholds.size());
  const double ng = static_cast<double>(genuine.size());
  const double ni = static_cast<double>(impostor.size());
  for (double t : roc.thresholds) {
    const auto gi = std::lower_bound(genuine.begin(), genuine.end(), t);
    const auto ii = std::lower_bound(impostor.begin(), impostor.end(), t);
    roc.tar.push_back(static_cast<double>(genuine.end() - gi) / ng);
    roc.far.push_back(static_cast<double>(impostor.end() - ii) / ni);
  }
  return roc;
}

OperatingPoint tar_at_far(const RocCurve& roc, double far_target) {
  if (!(far_target > 0.0) || !(far_target < 1.0)) {
    raise(ErrorCode::BadArgument, "far_target must lie in (0, 1)");
  }
  roc.validate();
  for (std::size_t i = 0; i < roc.thresholds.size(); ++i) {
    if (roc.far[i] <= far_target) {
      return OperatingPoint{roc.tar[i], roc.thresholds[i]};
    }
  }
  return OperatingPoint{0.0, std::numeric_limits<double>::infinity()};
}

double eer(const RocCurve& roc) {
  roc.validate();
  if (roc.thresholds.empty()) raise(ErrorCode::BadArgument, "empty ROC");
  const std::size_t n = roc.thresholds.size();
  double prev_far = 0.0;
  double prev_diff = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    // Virtual end point past the maximum score: nothing matches.
    const double far_i = i < n ? roc.far[i] : 0.0;
    const double frr_i = i < n ? 1.0 - roc.tar[i] : 1.0;
    const double diff = far_i - frr_i;
    if (diff == 0.0) return far_i;
    if (diff < 0.0) {
      if (i == 0) return far_i;  // already below at the smallest threshold
      const double alpha = prev_diff / (prev_diff - diff);
      return std::clamp(prev_far + alpha * (far_i - prev_far), 0.0, 1.0);
    }
    prev_far = far_i;
    prev_diff = diff;
  }
  // FAR stayed above FRR everywhere, including the virtual end: degenerate.
  return std::clamp(prev_far, 0.0, 1.0);
}

void save_score_csv(const std::vector<ScoreRecord>& records, const std::string& path) {
  std::string out = "probe_id,gallery_id,genuine,score\n";
  for (const ScoreRecord& r : records) {
    check_csv_id(r.probe_id);
    check_csv_id(r.gallery_id);
    if (!std::isfinite(r.score)) raise(ErrorCode::BadArgument, "non-finite score");
    out += r.probe_id;
    out += ',';
    out += r.gallery_id;
    out += r.genuine ? ",1," : ",0,";
    out += format_double(r.score);
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<ScoreRecord> load_score_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorCode::IoError, "cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) raise(ErrorCode::ParseError, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "probe_id,gallery_id,genuine,score") {
    raise(ErrorCode::ParseError, path + ": unexpected header \"" + line + "\"");
  }
  std::vector<ScoreRecord> records;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 4> fields;
    std::size_t start = 0;
    int nf = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (nf >= 4) {
          nf = 5;
          break;
        }
        fields[nf++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    char buf[96];
    if (nf != 4) {
      std::snprintf(buf, sizeof(buf), "line %zu: expected 4 fields", lineno);
      raise(ErrorCode::ParseError, path + ": " + buf);
    }
    ScoreRecord r;
    r.probe_id = fields[0];
    r.gallery_id = fields[1];
    if (fields[2] == "1") {
      r.genuine = true;
    } else if (fields[2] == "0") {
      r.genuine = false;
    } else {
      std::snprintf(buf, sizeof(buf), "line %zu: genuine must be 0 or 1", lineno);
      raise(ErrorCode::ParseError, path + ": " + buf);
    }
    char* end = nullptr;
    r.score = std::strtod(fields[3].c_str(), &end);
    if (end == fields[3].c_str() || *end != '\0' || !std::isfinite(r.score)) {
      std::snprintf(buf, sizeof(buf), "line %zu: bad score", lineno);
      raise(ErrorCode::ParseError, path + ": " + buf);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void export_report(const std::vector<ScoreRecord>& records, const std::vector<RecordGroup>& groups,
                   const std::string& out_dir) {
  if (records.empty()) raise(ErrorCode::BadArgument, "cannot export an empty result set");
  const RocCurve roc = compute_roc(records);
  const OperatingPoint op_01 = tar_at_far(roc, 0.001);
  const OperatingPoint op_1 = tar_at_far(roc, 0.01);
  const double e = eer(roc);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(ErrorCode::IoError, "cannot create " + out_dir + ": " + ec.message());
  const std::filesystem::path dir(out_dir);

  save_score_csv(records, (dir / "scores.csv").string());

  std::string roc_csv = "threshold,far,tar\n";
  for (std::size_t i = 0; i < roc.thresholds.size(); ++i) {
    roc_csv += format_double(roc.thresholds[i]);
    roc_csv += ',';
    roc_csv += format_double(roc.far[i]);
    roc_csv += ',';
    roc_csv += format_double(roc.tar[i]);
    roc_csv += '\n';
  }
  write_text_file(dir / "roc.csv", roc_csv);

  double lo = records.front().score;
  double hi = lo;
  for (const ScoreRecord& r : records) {
    lo = std::min(lo, r.score);
    hi = std::max(hi, r.score);
  }
  const double width = hi > lo ? (hi - lo) / 100.0 : 1e-9;
  std::array<std::uint64_t, 100> gen_bins{};
  std::array<std::uint64_t, 100> imp_bins{};
  for (const ScoreRecord& r : records) {
    int bin = static_cast<int>((r.score - lo) / width);
    bin = std::clamp(bin, 0, 99);
    (r.genuine ? gen_bins : imp_bins)[static_cast<std::size_t>(bin)]++;
  }
  std::string hist_csv = "bin_low,bin_high,genuine_count,impostor_count\n";
  for (int b = 0; b < 100; ++b) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%llu\n", format_double(lo + b * width).c_str(),
                  format_double(lo + (b + 1) * width).c_str(),
                  static_cast<unsigned long long>(gen_bins[static_cast<std::size_t>(b)]),
                  static_cast<unsigned long long>(imp_bins[static_cast<std::size_t>(b)]));
    hist_csv += buf;
  }
  write_text_file(dir / "histogram.csv", hist_csv);

  std::uint64_t n_gen = 0;
  for (const ScoreRecord& r : records) n_gen += r.genuine ? 1 : 0;
  char buf[160];
  std::string summary;
  std::snprintf(buf, sizeof(buf), "comparisons %zu\n", records.size());
  summary += buf;
  std::snprintf(buf, sizeof(buf), "genuine %llu\n", static_cast<unsigned long long>(n_gen));
  summary += buf;
  std::snprintf(buf, sizeof(buf), "impostor %llu\n",
                static_cast<unsigned long long>(records.size() - n_gen));
  summary += buf;
  std::snprintf(buf, sizeof(buf), "eer %.6f\n", e);
  summary += buf;
  std::snprintf(buf, sizeof(buf), "tar_at_far_0.001 %.6f threshold %s\n", op_01.tar,
                format_double(op_01.threshold).c_str());
  summary += buf;
  std::snprintf(buf, sizeof(buf), "tar_at_far_0.010 %.6f threshold %s\n", op_1.tar,
                format_double(op_1.threshold).c_str());
  summary += buf;

  for (const RecordGroup& g : groups) {
    std::uint64_t gg = 0;
    for (const ScoreRecord& r : g.second) gg += r.genuine ? 1 : 0;
    const std::uint64_t gi = g.second.size() - gg;
    if (gg == 0 || gi == 0) {
      std::snprintf(buf, sizeof(buf), "group %s comparisons %zu genuine %llu impostor %llu insufficient\n",
                    g.first.c_str(), g.second.size(), static_cast<unsigned long long>(gg),
                    static_cast<unsigned long long>(gi));
      summary += buf;
      continue;
    }
    const RocCurve groc = compute_roc(g.second);
    const OperatingPoint gop = tar_at_far(groc, 0.001);
    std::snprintf(buf, sizeof(buf),
                  "group %s comparisons %zu genuine %llu impostor %llu eer %.6f tar_at_far_0.001 %.6f\n",
                  g.first.c_str(), g.second.size(), static_cast<unsigned long long>(gg),
                  static_cast<unsigned long long>(gi), eer(groc), gop.tar);
    summary += buf;
  }
  write_text_file(dir / "summary.txt", summary);
}

}  // namespace palmpipe
