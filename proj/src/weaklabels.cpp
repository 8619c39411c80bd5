#include "score/weaklabels.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>

#include <json.hpp>

#include "score/errors.hpp"

namespace score {

double weight(int q) {
  if (q < 0 || q > kMaxQuality)
    throw ScoreError("quality score must be in 0..5 (got " + std::to_string(q) + ")");
  return double(kMaxQuality - q) / kMaxQuality;
}

std::vector<std::string> validate(const WeakLabelSet& labels, std::size_t regions) {
  std::vector<std::string> out;
  std::set<int> seen;
  for (const auto& r : labels) {
    const std::string where = "region " + std::to_string(r.k) + ": ";
    if (r.q < 0 || r.q > kMaxQuality) out.push_back(where + "quality score must be in 0..5");
    if (!is_valid_error_label(r.l)) out.push_back(where + "error label must be one of -1, 0, 1, 2");
    if (r.q == kMaxQuality && r.l != 0) out.push_back(where + "label must be 0 when q=5");
    if (r.q >= 0 && r.q < kMaxQuality && r.l == 0)
      out.push_back(where + "q<5 requires an error label");
    if (!seen.insert(r.k).second) out.push_back(where + "duplicate region index");
    if (r.k < 1 || (regions > 0 && std::size_t(r.k) > regions))
      out.push_back(where + "region index out of range");
  }
  if (regions > 0 && seen.size() != regions)
    out.push_back("expected labels for " + std::to_string(regions) + " regions, got " +
                  std::to_string(labels.size()));
  return out;
}

const RegionLabel& label_for(const WeakLabelSet& labels, std::size_t k0) {
  for (const auto& r : labels)
    if (r.k == int(k0) + 1) return r;
  throw LabelError("no label for region " + std::to_string(k0 + 1));
}

RegionLabel derive_labels_from_gt(const Mask& initial, const Mask& truth,
                                  const ScoreBins& bins) {
  require_same_grid(initial.grid(), truth.grid(), "derive_labels_from_gt");
  std::size_t inter = 0, n_init = 0, n_true = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    n_init += initial[i];
    n_true += truth[i];
    inter += initial[i] & truth[i];
  }
  if (n_true == 0) throw EmptyRegionError("reference region is empty");
  const double dice = 2.0 * double(inter) / double(n_init + n_true);
  RegionLabel r;
  r.q = 0;
  for (int i = 0; i < 5; ++i)
    if (dice >= bins.lower[std::size_t(i)]) {
      r.q = kMaxQuality - i;
      break;
    }
  const double fn = double(n_true - inter);
  const double fp = double(n_init - inter);
  const double tau = bins.mixed_fraction * std::max({fn, fp, 1.0});
  if (r.q == kMaxQuality)
    r.l = 0;
  else if (fn > tau && fp > tau)
    r.l = 2;
  else
    r.l = fn >= fp ? -1 : 1;
  return r;
}

std::string record_to_json_line(const CaseRecord& r) {
  nlohmann::json j;
  j["case_id"] = r.case_id;
  j["image"] = r.image;
  j["init_masks"] = r.init_masks;
  j["gt_masks"] = r.gt_masks ? nlohmann::json(*r.gt_masks) : nlohmann::json(nullptr);
  auto labels = nlohmann::json::array();
  for (const auto& l : r.labels) labels.push_back({{"k", l.k}, {"q", l.q}, {"l", l.l}});
  j["labels"] = labels;
  j["annotator"] = r.annotator;
  j["timestamp"] = r.timestamp;
  return j.dump();
}

CaseRecord record_from_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    CaseRecord r;
    r.case_id = j.at("case_id").get<std::string>();
    r.image = j.at("image").get<std::string>();
    r.init_masks = j.at("init_masks").get<std::string>();
    if (j.contains("gt_masks") && !j["gt_masks"].is_null())
      r.gt_masks = j["gt_masks"].get<std::string>();
    for (const auto& l : j.at("labels"))
      r.labels.push_back({l.at("k").get<int>(), l.at("q").get<int>(), l.at("l").get<int>()});
    r.annotator = j.value("annotator", "");
    r.timestamp = j.value("timestamp", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest line: ") + e.what());
  }
}

std::vector<CaseRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<CaseRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_json_line(line));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<CaseRecord>& records) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + tmp.string());
    for (const auto& r : records) out << record_to_json_line(r) << '\n';
    if (!out) throw IoError("manifest write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace manifest " + path.string() + ": " + ec.message());
}

void append_manifest(const std::filesystem::path& path, const CaseRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to manifest " + path.string());
  out << record_to_json_line(record) << '\n';
}

std::filesystem::path resolve_case_path(const std::filesystem::path& manifest,
                                        const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return fp;
  return manifest.parent_path() / fp;
}

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace score
