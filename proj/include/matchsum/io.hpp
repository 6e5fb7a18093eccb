#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchsum/types.hpp"

namespace matchsum {

/// File or format problem in benchmark data; carries the offending line when
/// known.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what, int line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_number(line) {}
  int line_number = -1;
};

/// Ground-truth relative pose with the convention x2 = R * x1 + t. The
/// translation keeps its metric length (unlike RelativePose it is not
/// normalized).
struct GroundTruthPose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  RelativePose pose() const {
    const double n = t.norm();
    return {R, n > 0.0 ? Eigen::Vector3d(t / n) : Eigen::Vector3d::UnitX()};
  }
};

/// One benchmark image pair: intrinsics, pixel matches (x1, y1, x2, y2), and
/// optional ground truth.
struct PairRecord {
  std::string pair_id;
  std::optional<CameraIntrinsics> k1;
  std::optional<CameraIntrinsics> k2;
  std::vector<Eigen::Vector4d> matches;
  std::optional<GroundTruthPose> gt;
  std::vector<Eigen::Vector4d> gt_matches;  // verification correspondences

  bool calibrated() const { return k1.has_value() && k2.has_value(); }
};

/// Streaming reader over a JSON-lines pair file. Malformed lines raise
/// DataError with their line number.
class PairReader {
 public:
  explicit PairReader(const std::filesystem::path& path);
  ~PairReader();
  PairReader(PairReader&&) noexcept;
  PairReader& operator=(PairReader&&) noexcept;

  /// Next record, or nullopt at end of file.
  std::optional<PairRecord> next();

 private:
  std::unique_ptr<std::ifstream> stream_;
  std::string path_;
  int line_ = 0;
};

/// Eagerly loads a whole pair file.
std::vector<PairRecord> load_pairs(const std::filesystem::path& path);

/// Writes records as JSON lines. Numeric fields round-trip bit-exactly
/// through load_pairs.
void emit_pairs(std::span<const PairRecord> records, const std::filesystem::path& path);

/// Serialization of a single record (one JSON line, no trailing newline).
std::string pair_to_json(const PairRecord& record);
PairRecord pair_from_json(const std::string& line, int line_number = -1);

/// The matches of a record as Match values. Calibrated fills n = K^-1 p;
/// uncalibrated records require require_calibration == false and use pixel
/// coordinates for n.
std::vector<Match> matches_from_record(const PairRecord& record, bool require_calibration);

}  // namespace matchsum
