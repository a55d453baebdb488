#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sgmm/core.hpp"
#include "sgmm/trainer.hpp"

namespace sgmm::io {

// Fixation points as CSV: first line "# width,height", then one "u,v" per
// line. Blank lines and later '#' lines are ignored. Line numbers in errors
// count the header as line 1.
FixationPoints parse_fixation_csv(std::string_view text);
std::string format_fixation_csv(const FixationPoints& points);

// Structured-text equivalent: {"width": W, "height": H, "points": [[u,v], ...]}.
FixationPoints parse_fixation_json(std::string_view text);
std::string format_fixation_json(const FixationPoints& points);

// Dispatches on the ".json" extension, CSV otherwise.
FixationPoints load_fixation_points(const std::filesystem::path& path);
void save_fixation_points(const std::filesystem::path& path, const FixationPoints& points);

enum class MapFormat { Pgm, F64Raw };

inline constexpr char kMapMagic[8] = {'S', 'G', 'M', 'M', 'M', 'A', 'P', 'S'};

// PGM: binary P5, 16-bit big-endian samples, max-normalized to 65535 (lossy).
// F64RAW: "SGMMMAPS", u32 width, u32 height, then little-endian f64 values
// row-major (lossless).
std::string encode_map(const SaliencyMap& map, MapFormat format);
SaliencyMap decode_map(std::string_view bytes);  // detects the format

void save_map(const std::filesystem::path& path, const SaliencyMap& map, MapFormat format);
SaliencyMap load_map(const std::filesystem::path& path);

// ".pgm" selects PGM, anything else F64RAW.
MapFormat map_format_for(const std::filesystem::path& path);

inline constexpr int kGmmFileVersion = 1;

// {"format": "sgmm-gmm", "version": 1, "canvas": {"width", "height"},
//  "components": [{"weight", "mean": [u, v], "cov": [var_u, var_v, cov_uv]}]}
std::string format_gmm(const GmmParams& gmm);
GmmParams parse_gmm(std::string_view text);

void save_gmm(const std::filesystem::path& path, const GmmParams& gmm);
GmmParams load_gmm(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const TinyPredictor& predictor);
TinyPredictor load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace sgmm::io
