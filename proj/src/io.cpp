#include "matchsum/io.hpp"

#include <json.hpp>

#include "matchsum/geometry.hpp"

namespace matchsum {

using nlohmann::json;

namespace {

json matrix3_to_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

Eigen::Matrix3d matrix3_from_json(const json& j, const char* what, int line) {
  if (!j.is_array() || j.size() != 3) throw DataError(std::string(what) + ": expected 3x3 array", line);
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != 3) {
      throw DataError(std::string(what) + ": expected 3x3 array", line);
    }
    for (int c = 0; c < 3; ++c) {
      if (!row[c].is_number()) throw DataError(std::string(what) + ": non-numeric entry", line);
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

json tuples_to_json(std::span<const Eigen::Vector4d> tuples) {
  json arr = json::array();
  for (const Eigen::Vector4d& t : tuples) arr.push_back({t(0), t(1), t(2), t(3)});
  return arr;
}

std::vector<Eigen::Vector4d> tuples_from_json(const json& j, const char* what, int line) {
  if (!j.is_array()) throw DataError(std::string(what) + ": expected an array", line);
  std::vector<Eigen::Vector4d> tuples;
  tuples.reserve(j.size());
  for (const json& entry : j) {
    if (!entry.is_array() || entry.size() != 4) {
      throw DataError(std::string(what) + ": expected [x1, y1, x2, y2]", line);
    }
    Eigen::Vector4d t;
    for (int i = 0; i < 4; ++i) {
      if (!entry[i].is_number()) throw DataError(std::string(what) + ": non-numeric entry", line);
      t(i) = entry[i].get<double>();
    }
    tuples.push_back(t);
  }
  return tuples;
}

}  // namespace

std::string pair_to_json(const PairRecord& record) {
  json j;
  j["pair_id"] = record.pair_id;
  if (record.k1) j["K1"] = matrix3_to_json(record.k1->matrix());
  if (record.k2) j["K2"] = matrix3_to_json(record.k2->matrix());
  j["matches"] = tuples_to_json(record.matches);
  if (record.gt) {
    j["gt"] = {{"R", matrix3_to_json(record.gt->R)},
               {"t", {record.gt->t(0), record.gt->t(1), record.gt->t(2)}}};
  }
  if (!record.gt_matches.empty()) j["gt_matches"] = tuples_to_json(record.gt_matches);
  return j.dump();
}

PairRecord pair_from_json(const std::string& line, int line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw DataError("record is not a JSON object", line_number);

  PairRecord record;
  record.pair_id = j.value("pair_id", std::string());
  if (j.contains("K1")) {
    record.k1 = CameraIntrinsics::from_matrix(matrix3_from_json(j["K1"], "K1", line_number));
  }
  if (j.contains("K2")) {
    record.k2 = CameraIntrinsics::from_matrix(matrix3_from_json(j["K2"], "K2", line_number));
  }
  if (!j.contains("matches")) throw DataError("record missing 'matches'", line_number);
  record.matches = tuples_from_json(j["matches"], "matches", line_number);
  if (j.contains("gt")) {
    const json& gt = j["gt"];
    if (!gt.is_object() || !gt.contains("R") || !gt.contains("t")) {
      throw DataError("gt: expected object with R and t", line_number);
    }
    GroundTruthPose pose;
    pose.R = matrix3_from_json(gt["R"], "gt.R", line_number);
    const json& t = gt["t"];
    if (!t.is_array() || t.size() != 3) throw DataError("gt.t: expected 3-vector", line_number);
    for (int i = 0; i < 3; ++i) {
      if (!t[i].is_number()) throw DataError("gt.t: non-numeric entry", line_number);
      pose.t(i) = t[i].get<double>();
    }
    record.gt = pose;
  }
  if (j.contains("gt_matches")) {
    record.gt_matches = tuples_from_json(j["gt_matches"], "gt_matches", line_number);
  }
  return record;
}

PairReader::PairReader(const std::filesystem::path& path)
    : stream_(std::make_unique<std::ifstream>(path)), path_(path.string()) {
  if (!stream_->is_open()) throw DataError("cannot open pair file: " + path_);
}

PairReader::~PairReader() = default;
PairReader::PairReader(PairReader&&) noexcept = default;
PairReader& PairReader::operator=(PairReader&&) noexcept = default;

std::optional<PairRecord> PairReader::next() {
  std::string line;
  while (std::getline(*stream_, line)) {
    ++line_;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    return pair_from_json(line, line_);
  }
  return std::nullopt;
}

std::vector<PairRecord> load_pairs(const std::filesystem::path& path) {
  PairReader reader(path);
  std::vector<PairRecord> records;
  while (auto record = reader.next()) records.push_back(std::move(*record));
  return records;
}

void emit_pairs(std::span<const PairRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write pair file: " + path.string());
  for (const PairRecord& record : records) out << pair_to_json(record) << '\n';
  if (!out.good()) throw DataError("write failed: " + path.string());
}

std::vector<Match> matches_from_record(const PairRecord& record, bool require_calibration) {
  if (require_calibration && !record.calibrated()) {
    throw DataError("pair '" + record.pair_id + "' has no intrinsics but calibration is required");
  }
  std::vector<Match> matches;
  matches.reserve(record.matches.size());
  for (const Eigen::Vector4d& t : record.matches) {
    if (record.calibrated()) {
      matches.push_back(normalize_match({t(0), t(1)}, {t(2), t(3)}, *record.k1, *record.k2));
    } else {
      Match m;
      m.p1 = {t(0), t(1)};
      m.p2 = {t(2), t(3)};
      m.n1 = m.p1;
      m.n2 = m.p2;
      matches.push_back(m);
    }
  }
  return matches;
}

}  // namespace matchsum
