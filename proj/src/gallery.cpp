// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/gallery.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "palmpipe/binio.hpp"
#include "palmpipe/error.hpp"
#include "palmpipe/fusion.hpp"

namespace palmpipe {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'M', 'G'};
constexpr std::uint16_t kFormatVersion = 1;

}  // namespace

void GalleryEntry::validate() const {
  if (subject_id.empty()) raise(ErrorCode::BadArgument, "empty subject_id");
  if (capture_id.empty()) raise(ErrorCode::BadArgument, "empty capture_id");
  if (age_months && (*age_months < 6 || *age_months > 48)) {
    raise(ErrorCode::BadArgument, "age_months must lie in [6, 48]");
  }
  for (int i = 0; i < kNumPatches; ++i) {
    embeddings[static_cast<std::size_t>(i)].validate();
    if (embeddings[static_cast<std::size_t>(i)].patch_id != static_cast<PatchId>(i)) {
      raise(ErrorCode::BadArgument, "embeddings must be ordered whole, q1, q2, q3, q4");
    }
    if (embeddings[static_cast<std::size_t>(i)].extractor_id != embeddings[0].extractor_id) {
      raise(ErrorCode::ExtractorMismatch, "entry embeddings mix extractors");
    }
  }
}

double fused_score(const std::array<Embedding, kNumPatches>& probe,
                   const std::array<Embedding, kNumPatches>& gallery) {
  std::array<double, kNumPatches> scores;
  for (int i = 0; i < kNumPatches; ++i) {
    scores[static_cast<std::size_t>(i)] =
        similarity(probe[static_cast<std::size_t>(i)], gallery[static_cast<std::size_t>(i)]);
  }
  return ensemble_mean(scores);
}

void Gallery::enroll(GalleryEntry entry) {
  entry.validate();
  if (capture_ids_.count(entry.capture_id)) {
    raise(ErrorCode::DuplicateCapture, "capture \"" + entry.capture_id + "\" already enrolled");
  }
  const std::string& entry_extractor = entry.embeddings[0].extractor_id;
  if (extractor_id_.empty()) {
    extractor_id_ = entry_extractor;
  } else if (extractor_id_ != entry_extractor) {
    raise(ErrorCode::ExtractorMismatch,
          "store holds \"" + extractor_id_ + "\" embeddings, entry has \"" + entry_extractor +
              "\"");
  }
  capture_ids_.insert(entry.capture_id);
  entries_.push_back(std::move(entry));
}

VerifyResult Gallery::verify(const std::string& subject_id,
                             const std::array<Embedding, kNumPatches>& probe,
                             double threshold) const {
  double best = -1.0;
  for (const GalleryEntry& e : entries_) {
    if (e.subject_id != subject_id) continue;
    best = std::max(best, fused_score(probe, e.embeddings));
  }
  if (best < 0.0) {
    raise(ErrorCode::UnknownSubject, "no enrolled captures for subject \"" + subject_id + "\"");
  }
  return VerifyResult{best >= threshold, best};
}

std::vector<RankedMatch> Gallery::identify_topn(const std::array<Embedding, kNumPatches>& probe,
                                                int n) const {
  if (entries_.empty()) raise(ErrorCode::EmptyGallery, "gallery has no enrolled captures");
  if (n < 1) raise(ErrorCode::BadArgument, "n must be >= 1");
  std::map<std::string, double> best;  // ordered: stable lexicographic ties
  for (const GalleryEntry& e : entries_) {
    const double s = fused_score(probe, e.embeddings);
    auto [it, inserted] = best.emplace(e.subject_id, s);
    if (!inserted) it->second = std::max(it->second, s);
  }
  std::vector<RankedMatch> ranked;
  ranked.reserve(best.size());
  for (const auto& [sid, score] : best) ranked.push_back(RankedMatch{sid, score});
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedMatch& a, const RankedMatch& b) {
    return a.score > b.score;  // equal scores keep lexicographic map order
  });
  if (static_cast<int>(ranked.size()) > n) ranked.resize(static_cast<std::size_t>(n));
  return ranked;
}

void save_gallery(const Gallery& gallery, const std::string& path) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kFormatVersion);
  put_text16(out, gallery.extractor_id());

  nlohmann::ordered_json index;
  index["extractor_id"] = gallery.extractor_id();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();

  for (const GalleryEntry& e : gallery.entries()) {
    std::vector<std::uint8_t> rec;
    put_text16(rec, e.subject_id);
    put_text16(rec, e.capture_id);
    put_u8(rec, e.hand_side == HandSide::Left ? 1 : 0);
    put_u8(rec, e.age_months ? 1 : 0);
    put_u16(rec, static_cast<std::uint16_t>(e.age_months.value_or(0)));
    put_u64(rec, static_cast<std::uint64_t>(e.enrolled_at));
    for (const Embedding& emb : e.embeddings) {
      const std::vector<std::uint8_t> blob = embedding_to_bytes(emb);
      put_u32(rec, static_cast<std::uint32_t>(blob.size()));
      rec.insert(rec.end(), blob.begin(), blob.end());
    }

    nlohmann::ordered_json row;
    row["capture_id"] = e.capture_id;
    row["subject_id"] = e.subject_id;
    row["hand_side"] = hand_side_name(e.hand_side);
    if (e.age_months) {
      row["age_months"] = *e.age_months;
    } else {
      row["age_months"] = nullptr;
    }
    row["enrolled_at"] = e.enrolled_at;
    row["offset"] = out.size();
    rows.push_back(std::move(row));

    put_u32(out, static_cast<std::uint32_t>(rec.size()));
    out.insert(out.end(), rec.begin(), rec.end());
  }
  index["entries"] = std::move(rows);

  write_binary_file(path, out);
  std::ofstream f(path + ".index.json", std::ios::trunc);
  if (!f) raise(ErrorCode::IoError, "cannot open for write: " + path + ".index.json");
  f << index.dump(2) << "\n";
  if (!f) raise(ErrorCode::IoError, "write failed: " + path + ".index.json");
}

Gallery load_gallery(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_binary_file(path);
  ByteReader r(bytes);
  const std::string magic = r.text(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    raise(ErrorCode::ParseError, path + ": not a gallery file (bad magic)");
  }
  if (r.u16() != kFormatVersion) {
    raise(ErrorCode::ParseError, path + ": unsupported gallery version");
  }
  Gallery g(r.text16());
  while (!r.exhausted()) {
    const std::uint32_t rec_len = r.u32();
    if (rec_len > r.remaining()) raise(ErrorCode::ParseError, path + ": truncated entry record");
    const std::size_t rec_end = r.position() + rec_len;
    GalleryEntry e;
    e.subject_id = r.text16();
    e.capture_id = r.text16();
    e.hand_side = r.u8() ? HandSide::Left : HandSide::Right;
    const bool has_age = r.u8() != 0;
    const std::uint16_t age = r.u16();
    if (has_age) e.age_months = static_cast<int>(age);
    e.enrolled_at = static_cast<std::int64_t>(r.u64());
    for (int i = 0; i < kNumPatches; ++i) {
      const std::uint32_t blob_len = r.u32();
      if (blob_len > r.remaining()) {
        raise(ErrorCode::ParseError, path + ": truncated embedding blob");
      }
      std::vector<std::uint8_t> blob(blob_len);
      for (std::uint32_t k = 0; k < blob_len; ++k) blob[k] = r.u8();
      e.embeddings[static_cast<std::size_t>(i)] = embedding_from_bytes(blob);
    }
    if (r.position() != rec_end) {
      raise(ErrorCode::ParseError, path + ": entry record length mismatch");
    }
    g.enroll(std::move(e));
  }
  return g;
}

}  // namespace palmpipe
