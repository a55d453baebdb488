#include "sgmm/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sgmm::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_pair(std::string_view line, double& a, double& b) {
  const auto comma = line.find(',');
  if (comma == std::string_view::npos) return false;
  return parse_number(line.substr(0, comma), a) && parse_number(line.substr(comma + 1), b);
}

std::string shortest(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

FixationPoints parse_fixation_csv(std::string_view text) {
  std::size_t line_no = 0;
  bool have_header = false;
  int width = 0, height = 0;
  std::vector<Point> points;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!have_header) {
      if (line.empty() || line.front() != '#') throw LineError(ErrorKind::ParseError, line_no, "expected '# width,height' header");
      double w = 0, h = 0;
      if (!parse_pair(line.substr(1), w, h) || w < 1 || h < 1 || w != std::floor(w) || h != std::floor(h)) {
        throw LineError(ErrorKind::ParseError, line_no, "malformed canvas header");
      }
      width = static_cast<int>(w);
      height = static_cast<int>(h);
      have_header = true;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    Point p;
    if (!parse_pair(line, p.u, p.v) || !std::isfinite(p.u) || !std::isfinite(p.v)) {
      throw LineError(ErrorKind::ParseError, line_no, "expected 'u,v'");
    }
    if (!(p.u >= 0.0 && p.u < width && p.v >= 0.0 && p.v < height)) {
      throw LineError(ErrorKind::BoundsError, line_no, "point outside the canvas");
    }
    points.push_back(p);
  }
  if (!have_header) throw LineError(ErrorKind::ParseError, 1, "empty fixation file");
  return FixationPoints(std::move(points), width, height);
}

std::string format_fixation_csv(const FixationPoints& points) {
  std::string out = "# " + std::to_string(points.width()) + "," + std::to_string(points.height()) + "\n";
  for (const Point& p : points.points()) out += shortest(p.u) + "," + shortest(p.v) + "\n";
  return out;
}

FixationPoints parse_fixation_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  try {
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    std::vector<Point> points;
    for (const auto& p : j.at("points")) {
      if (p.size() != 2) throw Error(ErrorKind::ParseError, "each point must be [u, v]");
      points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return FixationPoints(std::move(points), width, height);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

std::string format_fixation_json(const FixationPoints& points) {
  nlohmann::json j;
  j["width"] = points.width();
  j["height"] = points.height();
  j["points"] = nlohmann::json::array();
  for (const Point& p : points.points()) j["points"].push_back({p.u, p.v});
  return j.dump() + "\n";
}

FixationPoints load_fixation_points(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return path.extension() == ".json" ? parse_fixation_json(text) : parse_fixation_csv(text);
}

void save_fixation_points(const std::filesystem::path& path, const FixationPoints& points) {
  write_file(path, path.extension() == ".json" ? format_fixation_json(points) : format_fixation_csv(points));
}

namespace {

void put_le(std::string& out, std::uint64_t v, int width) {
  for (int b = 0; b < width; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  }
  return v;
}

// Reads the next whitespace-delimited PGM header token, skipping comments.
std::string_view pgm_token(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return bytes.substr(start, pos - start);
}

SaliencyMap decode_pgm(std::string_view bytes) {
  std::size_t pos = 2;
  int width = 0, height = 0, maxval = 0;
  if (!parse_number(pgm_token(bytes, pos), width) || !parse_number(pgm_token(bytes, pos), height) ||
      !parse_number(pgm_token(bytes, pos), maxval) || width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw Error(ErrorKind::FormatError, "malformed PGM header");
  }
  ++pos;  // single whitespace before the raster
  const int sample = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() < pos + count * sample) throw Error(ErrorKind::FormatError, "truncated PGM raster");
  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    unsigned v = static_cast<unsigned char>(bytes[pos + k * sample]);
    if (sample == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + k * 2 + 1]);
    values[k] = static_cast<double>(v) / maxval;
  }
  return SaliencyMap(width, height, std::move(values));
}

}  // namespace

std::string encode_map(const SaliencyMap& map, MapFormat format) {
  std::string out;
  if (format == MapFormat::F64Raw) {
    out.assign(kMapMagic, sizeof kMapMagic);
    put_le(out, static_cast<std::uint32_t>(map.width()), 4);
    put_le(out, static_cast<std::uint32_t>(map.height()), 4);
    for (double x : map.values()) put_le(out, std::bit_cast<std::uint64_t>(x), 8);
    return out;
  }
  out = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n65535\n";
  const double peak = map.max();
  for (double x : map.values()) {
    const auto q = peak > 0.0 ? static_cast<unsigned>(std::lround(x / peak * 65535.0)) : 0u;
    out.push_back(static_cast<char>((q >> 8) & 0xff));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

SaliencyMap decode_map(std::string_view bytes) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kMapMagic, 8) == 0) {
    if (bytes.size() < 16) throw Error(ErrorKind::FormatError, "truncated map header");
    const auto width = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
    const auto height = static_cast<std::uint32_t>(get_le(bytes, 12, 4));
    const std::size_t count = static_cast<std::size_t>(width) * height;
    if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20) || bytes.size() != 16 + 8 * count) {
      throw Error(ErrorKind::FormatError, "map size does not match its header");
    }
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) values[k] = std::bit_cast<double>(get_le(bytes, 16 + 8 * k, 8));
    try {
      return SaliencyMap(static_cast<int>(width), static_cast<int>(height), std::move(values));
    } catch (const Error& e) {
      throw Error(ErrorKind::FormatError, e.what());
    }
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  throw Error(ErrorKind::FormatError, "unrecognized map format");
}

MapFormat map_format_for(const std::filesystem::path& path) {
  return path.extension() == ".pgm" ? MapFormat::Pgm : MapFormat::F64Raw;
}

void save_map(const std::filesystem::path& path, const SaliencyMap& map, MapFormat format) {
  write_file(path, encode_map(map, format));
}

SaliencyMap load_map(const std::filesystem::path& path) { return decode_map(read_file(path)); }

std::string format_gmm(const GmmParams& gmm) {
  nlohmann::json j;
  j["format"] = "sgmm-gmm";
  j["version"] = kGmmFileVersion;
  j["canvas"] = {{"width", gmm.canvas_width}, {"height", gmm.canvas_height}};
  j["components"] = nlohmann::json::array();
  for (const auto& c : gmm.components) {
    j["components"].push_back(
        {{"weight", c.weight}, {"mean", {c.mu_u, c.mu_v}}, {"cov", {c.var_u, c.var_v, c.cov_uv}}});
  }
  return j.dump(2) + "\n";
}

GmmParams parse_gmm(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.contains("version")) throw Error(ErrorKind::FormatError, "GMM file has no version field");
    const int version = j.at("version").get<int>();
    if (version != kGmmFileVersion) {
      throw Error(ErrorKind::FormatError, "unsupported GMM file version " + std::to_string(version));
    }
    GmmParams gmm;
    gmm.canvas_width = j.at("canvas").at("width").get<int>();
    gmm.canvas_height = j.at("canvas").at("height").get<int>();
    for (const auto& c : j.at("components")) {
      GaussianComponent g;
      g.weight = c.at("weight").get<double>();
      g.mu_u = c.at("mean").at(0).get<double>();
      g.mu_v = c.at("mean").at(1).get<double>();
      g.var_u = c.at("cov").at(0).get<double>();
      g.var_v = c.at("cov").at(1).get<double>();
      g.cov_uv = c.at("cov").at(2).get<double>();
      gmm.components.push_back(g);
    }
    return gmm;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
}

void save_gmm(const std::filesystem::path& path, const GmmParams& gmm) { write_file(path, format_gmm(gmm)); }

GmmParams load_gmm(const std::filesystem::path& path) { return parse_gmm(read_file(path)); }

void save_checkpoint(const std::filesystem::path& path, const TinyPredictor& predictor) {
  write_file(path, encode_checkpoint(predictor));
}

TinyPredictor load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "failed reading " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

}  // namespace sgmm::io
