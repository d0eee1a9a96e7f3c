#pragma once

// File formats:
//   radar JSONL  — one scan per line: {"t": s, "points": [[x,y,z,doppler,power?], ...]}
//   IMU CSV      — t, qw, qx, qy, qz, wx, wy, wz, ax, ay, az  ('#' header optional)
//   TUM          — t x y z qx qy qz qw

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "radarodo/geometry.hpp"
#include "radarodo/radar_scan.hpp"

namespace radarodo {

// Streaming reader so long datasets never live in memory at once.
// Enforces strictly increasing scan timestamps.
class RadarJsonlReader {
 public:
  explicit RadarJsonlReader(const std::string& path);
  ~RadarJsonlReader();
  RadarJsonlReader(RadarJsonlReader&&) noexcept;

  // Next scan, or nullopt at end of file. Throws ParseError on malformed lines.
  std::optional<RadarScan> next();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<RadarScan> read_radar_jsonl(const std::string& path);
void write_radar_jsonl(const std::string& path, std::span<const RadarScan> scans);

// Streaming IMU reader, same contract as the eager loader below.
class ImuCsvReader {
 public:
  explicit ImuCsvReader(const std::string& path);
  ~ImuCsvReader();
  ImuCsvReader(ImuCsvReader&&) noexcept;

  std::optional<ImuSample> next();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<ImuSample> read_imu_csv(const std::string& path);
void write_imu_csv(const std::string& path, std::span<const ImuSample> samples);

std::vector<Pose> read_tum(const std::string& path);
void write_tum(const std::string& path, std::span<const Pose> poses);

// Append-style TUM writer used to flush retired poses incrementally.
class TumWriter {
 public:
  explicit TumWriter(const std::string& path);
  ~TumWriter();
  void write(const Pose& pose);
  void flush();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace radarodo
