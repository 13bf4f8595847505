#pragma once

#include <filesystem>

#include "lakewatch/raster.hpp"

namespace lakewatch {

enum class SampleType { UInt8, Float32 };

/// Reads a single-band georeferenced GeoTIFF (stripped or tiled, any common
/// integer/float sample format). Validity comes from the GDAL nodata tag.
/// 8-bit files load as Scale::UInt8, everything else as linear power unless
/// the file carries a scale note written by write_raster.
///
/// Throws DataError: "unreadable file", "multi-band input",
/// "missing georeferencing".
RasterGrid load_raster(const std::filesystem::path& path);

/// Writes an uncompressed single-band GeoTIFF. UInt8 output rounds and clamps
/// to [0, 255]. The nodata tag is written when the grid has a nodata value.
void write_raster(const std::filesystem::path& path, const RasterGrid& grid, SampleType type);

}  // namespace lakewatch
