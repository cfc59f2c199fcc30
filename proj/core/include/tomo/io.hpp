#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tomo/labeled_array.hpp"

namespace tomo {

inline constexpr int native_schema_version = 1;

/// Native container: an 8-byte little-endian header length, a JSON header
/// (schema version, shape, labels, dtype "f64", byte order "little",
/// geometry or null, CRC32 of the payload) and the little-endian float64
/// payload in row-major label order. Throws IoError on failure.
void write_native(const LabeledArray& a, const std::filesystem::path& path);

/// Rejects unknown schema versions, other dtypes or byte orders, truncated
/// or oversized payloads and checksum mismatches with IoError.
LabeledArray read_native(const std::filesystem::path& path);

/// One 32-bit float grayscale TIFF per index of `axis`, named
/// "<prefix>_<index:04d>.tiff". The remaining two axes become image rows
/// and columns in label order; a 2-D array gives one-row images. Returns
/// the written paths.
std::vector<std::filesystem::path> write_tiff_stack(const LabeledArray& a, const std::filesystem::path& dir,
                                                    std::string_view axis, std::string_view prefix = "slice");

/// Read every ".tif"/".tiff" file in a directory, or the files matching a
/// glob ('*' and '?' in the file name part), ordered by the number in each
/// file name. The result has shape (files, rows, columns) and the given
/// labels; an optional geometry is attached after a shape check.
LabeledArray read_tiff_stack(const std::filesystem::path& dir_or_glob, const std::vector<std::string>& labels,
                             const std::optional<Geometry>& geometry = std::nullopt);

/// Read a single-image TIFF (uncompressed; 8/16-bit unsigned or 32/64-bit
/// float samples) as a (rows, columns) array with the given labels.
LabeledArray read_tiff(const std::filesystem::path& path, const std::vector<std::string>& labels);

enum class Colormap { gray, hot };
std::string_view to_string(Colormap map);
Colormap parse_colormap(std::string_view text);

/// 8-bit RGB lookup entry `index` of a fixed colormap.
std::array<unsigned char, 3> colormap_entry(Colormap map, unsigned index);

/// Map a 2-D array linearly from [lo, hi] onto 256 colormap entries
/// (clamped; NaN maps to entry 0) and write an 8-bit RGB PNG. Rows follow
/// the first axis. Output bytes depend only on the input.
void export_png_heatmap(const LabeledArray& a, const std::filesystem::path& path, double lo, double hi,
                        Colormap map = Colormap::gray);

/// Geometry serialisation used by the native header and configs.
std::string geometry_to_json(const Geometry& g, int indent = -1);
Geometry geometry_from_json(std::string_view text);

}  // namespace tomo
