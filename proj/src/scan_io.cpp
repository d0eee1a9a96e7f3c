#include "radarodo/scan_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace radarodo {

using nlohmann::json;

struct RadarJsonlReader::Impl {
  std::ifstream in;
  std::size_t line_no = 0;
  double last_stamp = -std::numeric_limits<double>::infinity();
  bool any = false;
};

RadarJsonlReader::RadarJsonlReader(const std::string& path) : impl_(new Impl) {
  impl_->in.open(path);
  if (!impl_->in) throw Error("cannot open radar file: " + path);
}

RadarJsonlReader::~RadarJsonlReader() = default;
RadarJsonlReader::RadarJsonlReader(RadarJsonlReader&&) noexcept = default;

std::optional<RadarScan> RadarJsonlReader::next() {
  std::string line;
  while (std::getline(impl_->in, line)) {
    ++impl_->line_no;
    if (line.empty() || line[0] == '#') continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), impl_->line_no);
    }

    RadarScan scan;
    try {
      scan.t_stamp = j.at("t").get<double>();
      const json& pts = j.at("points");
      if (!pts.is_array()) throw ParseError("\"points\" must be an array", impl_->line_no);
      scan.points.reserve(pts.size());
      for (const json& e : pts) {
        if (!e.is_array() || e.size() < 4 || e.size() > 5)
          throw ParseError("point entry must be [x,y,z,doppler] or [x,y,z,doppler,power]",
                           impl_->line_no);
        RadarPoint p;
        p.pos = Vec3(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
        p.doppler = e[3].get<double>();
        if (e.size() == 5) p.power = e[4].get<double>();
        if (!p.pos.allFinite() || !std::isfinite(p.doppler))
          throw ParseError("non-finite point fields", impl_->line_no);
        if (p.pos.norm() < 1e-9) continue;  // zero-range returns rejected
        scan.points.push_back(p);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad scan record: ") + e.what(), impl_->line_no);
    }

    if (!std::isfinite(scan.t_stamp))
      throw ParseError("non-finite timestamp", impl_->line_no);
    if (scan.t_stamp <= impl_->last_stamp)
      throw ParseError("timestamps not monotonic", impl_->line_no);
    impl_->last_stamp = scan.t_stamp;
    impl_->any = true;
    return scan;
  }
  if (!impl_->any) throw EmptyStream("radar stream holds no scans");
  return std::nullopt;
}

std::vector<RadarScan> read_radar_jsonl(const std::string& path) {
  RadarJsonlReader reader(path);
  std::vector<RadarScan> scans;
  while (auto s = reader.next()) scans.push_back(std::move(*s));
  return scans;
}

void write_radar_jsonl(const std::string& path, std::span<const RadarScan> scans) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const RadarScan& scan : scans) {
    json pts = json::array();
    for (const RadarPoint& p : scan.points) {
      json e = {p.pos.x(), p.pos.y(), p.pos.z(), p.doppler};
      if (!std::isnan(p.power)) e.push_back(p.power);
      pts.push_back(std::move(e));
    }
    json j{{"t", scan.t_stamp}, {"points", std::move(pts)}};
    out << j.dump() << '\n';
  }
}

namespace {

std::vector<double> parse_number_row(const std::string& line, std::size_t line_no,
                                     char sep) {
  std::vector<double> vals;
  std::string token;
  std::istringstream ss(line);
  while (std::getline(ss, token, sep)) {
    if (token.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      throw ParseError("not a number: '" + token + "'", line_no);
    }
    if (token.find_first_not_of(" \t\r", used) != std::string::npos)
      throw ParseError("trailing garbage in field: '" + token + "'", line_no);
    vals.push_back(v);
  }
  return vals;
}

}  // namespace

struct ImuCsvReader::Impl {
  std::ifstream in;
  std::size_t line_no = 0;
  double last_stamp = -std::numeric_limits<double>::infinity();
  bool any = false;
};

ImuCsvReader::ImuCsvReader(const std::string& path) : impl_(new Impl) {
  impl_->in.open(path);
  if (!impl_->in) throw Error("cannot open IMU file: " + path);
}

ImuCsvReader::~ImuCsvReader() = default;
ImuCsvReader::ImuCsvReader(ImuCsvReader&&) noexcept = default;

std::optional<ImuSample> ImuCsvReader::next() {
  std::string line;
  while (std::getline(impl_->in, line)) {
    ++impl_->line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto v = parse_number_row(line, impl_->line_no, ',');
    if (v.size() != 11)
      throw ParseError("expected 11 fields, got " + std::to_string(v.size()),
                       impl_->line_no);
    ImuSample s;
    s.t_stamp = v[0];
    try {
      s.orientation = Quat(v[1], v[2], v[3], v[4]);
    } catch (const Error&) {
      throw ParseError("invalid orientation quaternion", impl_->line_no);
    }
    s.ang_vel = Vec3(v[5], v[6], v[7]);
    s.lin_acc = Vec3(v[8], v[9], v[10]);
    if (s.t_stamp <= impl_->last_stamp)
      throw ParseError("timestamps not monotonic", impl_->line_no);
    impl_->last_stamp = s.t_stamp;
    impl_->any = true;
    return s;
  }
  if (!impl_->any) throw EmptyStream("IMU stream holds no samples");
  return std::nullopt;
}

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  ImuCsvReader reader(path);
  std::vector<ImuSample> samples;
  while (auto s = reader.next()) samples.push_back(*s);
  return samples;
}

void write_imu_csv(const std::string& path, std::span<const ImuSample> samples) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open for writing: " + path);
  std::fprintf(f, "# t, qw, qx, qy, qz, wx, wy, wz, ax, ay, az\n");
  for (const ImuSample& s : samples) {
    std::fprintf(f, "%.9f, %.12f, %.12f, %.12f, %.12f, %.9f, %.9f, %.9f, %.9f, %.9f, %.9f\n",
                 s.t_stamp, s.orientation.w, s.orientation.x, s.orientation.y,
                 s.orientation.z, s.ang_vel.x(), s.ang_vel.y(), s.ang_vel.z(),
                 s.lin_acc.x(), s.lin_acc.y(), s.lin_acc.z());
  }
  std::fclose(f);
}

std::vector<Pose> read_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory file: " + path);
  std::vector<Pose> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto v = parse_number_row(line, line_no, ' ');
    if (v.size() != 8)
      throw ParseError("expected 8 fields (t x y z qx qy qz qw), got " +
                           std::to_string(v.size()),
                       line_no);
    Pose p;
    p.t_stamp = v[0];
    p.trans = Vec3(v[1], v[2], v[3]);
    try {
      p.rot = Quat(v[7], v[4], v[5], v[6]);  // TUM order is qx qy qz qw
    } catch (const Error&) {
      throw ParseError("invalid quaternion", line_no);
    }
    poses.push_back(p);
  }
  return poses;
}

struct TumWriter::Impl {
  std::FILE* f = nullptr;
};

TumWriter::TumWriter(const std::string& path) : impl_(new Impl) {
  impl_->f = std::fopen(path.c_str(), "w");
  if (!impl_->f) throw Error("cannot open for writing: " + path);
}

TumWriter::~TumWriter() {
  if (impl_->f) std::fclose(impl_->f);
}

void TumWriter::write(const Pose& p) {
  std::fprintf(impl_->f, "%.9f %.9f %.9f %.9f %.12f %.12f %.12f %.12f\n", p.t_stamp,
               p.trans.x(), p.trans.y(), p.trans.z(), p.rot.x, p.rot.y, p.rot.z,
               p.rot.w);
}

void TumWriter::flush() { std::fflush(impl_->f); }

void write_tum(const std::string& path, std::span<const Pose> poses) {
  TumWriter w(path);
  for (const Pose& p : poses) w.write(p);
}

}  // namespace radarodo
