#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "score/morphology.hpp"
#include "score/volume.hpp"

namespace score {

inline constexpr int kMaxQuality = 5;

// One region's rating. k is 1-based, as on the wire.
struct RegionLabel {
  int k = 1;
  int q = kMaxQuality;
  int l = 0;
  bool operator==(const RegionLabel&) const = default;
};

using WeakLabelSet = std::vector<RegionLabel>;

// Correction weight (5 - q) / 5. Throws ScoreError outside {0..5}.
double weight(int q);

// Every violated consistency rule, in region order; empty iff consistent.
// If `regions` is non-zero, k must also cover exactly 1..regions.
std::vector<std::string> validate(const WeakLabelSet& labels, std::size_t regions = 0);

// Rating of a region label set entry for region index k0 (0-based).
const RegionLabel& label_for(const WeakLabelSet& labels, std::size_t k0);

// Dice bins used to simulate a rater from ground truth. A region scores the
// first q (from 5 down) whose lower bound its Dice reaches.
struct ScoreBins {
  // lower Dice bound for q = 5, 4, 3, 2, 1; anything below scores 0.
  std::array<double, 5> lower{0.98, 0.95, 0.90, 0.80, 0.60};
  double mixed_fraction = 0.1;
};

RegionLabel derive_labels_from_gt(const Mask& initial, const Mask& truth,
                                  const ScoreBins& bins = {});

// One line of cases.jsonl.
struct CaseRecord {
  std::string case_id;
  std::string image;
  std::string init_masks;
  std::optional<std::string> gt_masks;
  WeakLabelSet labels;
  std::string annotator;
  std::string timestamp;
};

std::string record_to_json_line(const CaseRecord& r);
CaseRecord record_from_json_line(const std::string& line);

// Throws IoError / DataError. Blank lines are skipped.
std::vector<CaseRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<CaseRecord>& records);
void append_manifest(const std::filesystem::path& path, const CaseRecord& record);

// Paths in a manifest are relative to the manifest's directory unless absolute.
std::filesystem::path resolve_case_path(const std::filesystem::path& manifest,
                                        const std::string& p);

std::string now_iso8601();

}  // namespace score
