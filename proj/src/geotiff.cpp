#include "lakewatch/geotiff.hpp"

#include <tiffio.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "lakewatch/error.hpp"

namespace lakewatch {

namespace {

constexpr ttag_t kModelPixelScale = 33550;
constexpr ttag_t kModelTiepoint = 33922;
constexpr ttag_t kGeoKeyDirectory = 34735;
constexpr ttag_t kGeoDoubleParams = 34736;
constexpr ttag_t kGeoAsciiParams = 34737;

constexpr unsigned short kGTModelType = 1024;
constexpr unsigned short kGTRasterType = 1025;
constexpr unsigned short kGTCitation = 1026;
constexpr unsigned short kGeographicType = 2048;
constexpr unsigned short kProjectedCSType = 3072;

constexpr const char* kScalePrefix = "lakewatch:scale=";

TIFFExtendProc g_parent_extender = nullptr;

void geotiff_tag_extender(TIFF* tif) {
  static const TIFFFieldInfo fields[] = {
      {kModelPixelScale, TIFF_VARIABLE, TIFF_VARIABLE, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("ModelPixelScaleTag")},
      {kModelTiepoint, TIFF_VARIABLE, TIFF_VARIABLE, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("ModelTiepointTag")},
      {kGeoKeyDirectory, TIFF_VARIABLE, TIFF_VARIABLE, TIFF_SHORT, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("GeoKeyDirectoryTag")},
      {kGeoDoubleParams, TIFF_VARIABLE, TIFF_VARIABLE, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("GeoDoubleParamsTag")},
      {kGeoAsciiParams, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
       const_cast<char*>("GeoASCIIParamsTag")},
      {TIFFTAG_GDAL_NODATA, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
       const_cast<char*>("GDALNoDataValue")},
  };
  for (const auto& f : fields) {
    if (!TIFFFindField(tif, f.field_tag, TIFF_ANY)) TIFFMergeFieldInfo(tif, &f, 1);
  }
  if (g_parent_extender) g_parent_extender(tif);
}

thread_local std::string t_last_tiff_error;

void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  t_last_tiff_error = std::string(module ? module : "libtiff") + ": " + buf;
}

void tiff_warning_handler(const char*, const char*, va_list) {}

void init_libtiff() {
  static std::once_flag once;
  std::call_once(once, [] {
    g_parent_extender = TIFFSetTagExtender(geotiff_tag_extender);
    TIFFSetErrorHandler(tiff_error_handler);
    TIFFSetWarningHandler(tiff_warning_handler);
  });
}

struct TiffCloser {
  void operator()(TIFF* t) const { TIFFClose(t); }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

[[noreturn]] void unreadable(const std::filesystem::path& path, const std::string& detail) {
  throw DataError("unreadable file: " + path.string() + (detail.empty() ? "" : " (" + detail + ")"));
}

template <typename T>
void convert_block(const unsigned char* src, std::size_t count, float* dst) {
  for (std::size_t i = 0; i < count; ++i) {
    T v;
    std::memcpy(&v, src + i * sizeof(T), sizeof(T));
    dst[i] = static_cast<float>(v);
  }
}

using Converter = void (*)(const unsigned char*, std::size_t, float*);

Converter pick_converter(uint16_t bps, uint16_t fmt) {
  if (fmt == SAMPLEFORMAT_UINT) {
    if (bps == 8) return convert_block<uint8_t>;
    if (bps == 16) return convert_block<uint16_t>;
    if (bps == 32) return convert_block<uint32_t>;
  } else if (fmt == SAMPLEFORMAT_INT) {
    if (bps == 8) return convert_block<int8_t>;
    if (bps == 16) return convert_block<int16_t>;
    if (bps == 32) return convert_block<int32_t>;
  } else if (fmt == SAMPLEFORMAT_IEEEFP) {
    if (bps == 32) return convert_block<float>;
    if (bps == 64) return convert_block<double>;
  }
  return nullptr;
}

std::optional<float> parse_nodata(const char* text) {
  if (!text) return std::nullopt;
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
          s.end());
  if (s.empty()) return std::nullopt;
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); });
  if (lower == "nan" || lower == "-nan") return std::numeric_limits<float>::quiet_NaN();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) return std::nullopt;
  return static_cast<float>(v);
}

std::string format_nodata(float v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

RasterGrid load_raster(const std::filesystem::path& path) {
  init_libtiff();
  t_last_tiff_error.clear();
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) unreadable(path, "no such file");

  TiffPtr tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) unreadable(path, t_last_tiff_error);

  uint32_t width = 0, height = 0;
  uint16_t spp = 1, bps = 8, fmt = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
  if (!TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width) ||
      !TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height)) {
    unreadable(path, "missing dimensions");
  }
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &fmt);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
  if (spp != 1) {
    throw DataError("multi-band input: " + path.string() + " has " + std::to_string(spp) +
                    " bands");
  }
  if (width == 0 || height == 0) unreadable(path, "empty image");
  const Converter convert = pick_converter(bps, fmt);
  if (!convert) {
    unreadable(path, "unsupported sample format " + std::to_string(bps) + "-bit/" +
                         std::to_string(fmt));
  }

  // Georeferencing
  uint16_t n_scale = 0, n_tie = 0;
  double* scale = nullptr;
  double* tie = nullptr;
  if (!TIFFGetField(tif.get(), kModelPixelScale, &n_scale, &scale) || n_scale < 2 ||
      !TIFFGetField(tif.get(), kModelTiepoint, &n_tie, &tie) || n_tie < 6) {
    throw DataError("missing georeferencing: " + path.string());
  }
  const double sx = scale[0], sy = scale[1];
  if (!(sx > 0) || !(sy > 0) || std::abs(sx - sy) > 1e-9 * std::max(sx, sy)) {
    throw DataError("missing georeferencing: " + path.string() + " (non-square or invalid pixel scale)");
  }
  GeoReference geo;
  geo.pixel_size_m = sx;
  geo.origin_x = tie[3] - tie[0] * sx;
  geo.origin_y = tie[4] + tie[1] * sy;

  uint16_t n_keys = 0;
  uint16_t* keys = nullptr;
  std::string citation;
  bool pixel_is_point = false;
  if (TIFFGetField(tif.get(), kGeoKeyDirectory, &n_keys, &keys) && n_keys >= 4) {
    const std::size_t count = std::min<std::size_t>(keys[3], (n_keys - 4) / 4);
    char* ascii = nullptr;
    TIFFGetField(tif.get(), kGeoAsciiParams, &ascii);
    for (std::size_t k = 0; k < count; ++k) {
      const uint16_t* e = keys + 4 + 4 * k;
      const uint16_t id = e[0], loc = e[1], cnt = e[2], val = e[3];
      if (id == kProjectedCSType || id == kGeographicType) {
        if (loc == 0 && val != 0 && val != 32767) {
          if (id == kProjectedCSType || geo.crs_id.empty()) geo.crs_id = "EPSG:" + std::to_string(val);
        }
      } else if (id == kGTRasterType && loc == 0) {
        pixel_is_point = val == 2;
      } else if (id == kGTCitation && loc == kGeoAsciiParams && ascii) {
        const std::size_t len = std::strlen(ascii);
        if (val < len) {
          citation.assign(ascii + val, std::min<std::size_t>(cnt, len - val));
          while (!citation.empty() && (citation.back() == '|' || citation.back() == '\0')) citation.pop_back();
        }
      }
    }
  }
  if (geo.crs_id.empty()) geo.crs_id = citation.empty() ? "unknown" : citation;
  if (pixel_is_point) {
    geo.origin_x -= 0.5 * sx;
    geo.origin_y += 0.5 * sy;
  }

  char* nodata_text = nullptr;
  std::optional<float> nodata;
  if (TIFFGetField(tif.get(), TIFFTAG_GDAL_NODATA, &nodata_text)) nodata = parse_nodata(nodata_text);

  Scale grid_scale = (bps == 8 && fmt == SAMPLEFORMAT_UINT) ? Scale::UInt8 : Scale::LinearPower;
  char* desc = nullptr;
  if (TIFFGetField(tif.get(), TIFFTAG_IMAGEDESCRIPTION, &desc) && desc) {
    std::string d(desc);
    if (auto pos = d.find(kScalePrefix); pos != std::string::npos) {
      const std::string tag = d.substr(pos + std::strlen(kScalePrefix));
      if (tag.starts_with("dB")) grid_scale = Scale::Decibel;
      else if (tag.starts_with("linear")) grid_scale = Scale::LinearPower;
      else if (tag.starts_with("uint8")) grid_scale = Scale::UInt8;
    }
  }

  std::vector<float> data(static_cast<std::size_t>(width) * height);
  const std::size_t bytes_per_sample = bps / 8;
  if (TIFFIsTiled(tif.get())) {
    uint32_t tw = 0, th = 0;
    TIFFGetField(tif.get(), TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif.get(), TIFFTAG_TILELENGTH, &th);
    if (tw == 0 || th == 0) unreadable(path, "bad tile size");
    std::vector<unsigned char> tile(TIFFTileSize(tif.get()));
    std::vector<float> row(tw);
    for (uint32_t ty = 0; ty < height; ty += th) {
      for (uint32_t tx = 0; tx < width; tx += tw) {
        if (TIFFReadTile(tif.get(), tile.data(), tx, ty, 0, 0) < 0) {
          unreadable(path, t_last_tiff_error);
        }
        for (uint32_t r = 0; r < th && ty + r < height; ++r) {
          convert(tile.data() + static_cast<std::size_t>(r) * tw * bytes_per_sample, tw, row.data());
          const uint32_t n = std::min(tw, width - tx);
          std::copy_n(row.begin(), n, data.begin() + static_cast<std::size_t>(ty + r) * width + tx);
        }
      }
    }
  } else {
    std::vector<unsigned char> line(TIFFScanlineSize(tif.get()));
    for (uint32_t r = 0; r < height; ++r) {
      if (TIFFReadScanline(tif.get(), line.data(), r, 0) < 0) unreadable(path, t_last_tiff_error);
      convert(line.data(), width, data.data() + static_cast<std::size_t>(r) * width);
    }
  }

  return RasterGrid(width, height, std::move(geo), std::move(data), nodata, grid_scale);
}

void write_raster(const std::filesystem::path& path, const RasterGrid& grid, SampleType type) {
  init_libtiff();
  t_last_tiff_error.clear();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  TiffPtr tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw DataError("cannot write " + path.string() + ": " + t_last_tiff_error);

  const auto w = static_cast<uint32_t>(grid.width());
  const auto h = static_cast<uint32_t>(grid.height());
  TIFF* t = tif.get();
  TIFFSetField(t, TIFFTAG_IMAGEWIDTH, w);
  TIFFSetField(t, TIFFTAG_IMAGELENGTH, h);
  TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, uint16_t{1});
  TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, uint16_t(type == SampleType::UInt8 ? 8 : 32));
  TIFFSetField(t, TIFFTAG_SAMPLEFORMAT,
               uint16_t(type == SampleType::UInt8 ? SAMPLEFORMAT_UINT : SAMPLEFORMAT_IEEEFP));
  TIFFSetField(t, TIFFTAG_PHOTOMETRIC, uint16_t{PHOTOMETRIC_MINISBLACK});
  TIFFSetField(t, TIFFTAG_PLANARCONFIG, uint16_t{PLANARCONFIG_CONTIG});
  TIFFSetField(t, TIFFTAG_COMPRESSION, uint16_t{COMPRESSION_NONE});
  TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(t, 0));
  const std::string desc = std::string(kScalePrefix) + to_string(grid.scale());
  TIFFSetField(t, TIFFTAG_IMAGEDESCRIPTION, desc.c_str());

  const auto& geo = grid.geo();
  std::array<double, 3> pixel_scale{geo.pixel_size_m, geo.pixel_size_m, 0.0};
  std::array<double, 6> tiepoint{0.0, 0.0, 0.0, geo.origin_x, geo.origin_y, 0.0};
  TIFFSetField(t, kModelPixelScale, uint16_t{3}, pixel_scale.data());
  TIFFSetField(t, kModelTiepoint, uint16_t{6}, tiepoint.data());

  std::vector<uint16_t> keys{1, 1, 0, 0};
  std::string ascii;
  int epsg = 0;
  if (geo.crs_id.starts_with("EPSG:")) {
    std::from_chars(geo.crs_id.data() + 5, geo.crs_id.data() + geo.crs_id.size(), epsg);
  }
  const bool geographic = is_geographic_crs(geo.crs_id);
  keys.insert(keys.end(), {kGTModelType, 0, 1, uint16_t(geographic ? 2 : 1)});
  keys.insert(keys.end(), {kGTRasterType, 0, 1, 1});
  if (epsg > 0 && epsg < 65535) {
    keys.insert(keys.end(), {uint16_t(geographic ? kGeographicType : kProjectedCSType), 0, 1,
                             static_cast<uint16_t>(epsg)});
  } else if (!geo.crs_id.empty()) {
    ascii = geo.crs_id + "|";
    keys.insert(keys.end(), {kGTCitation, uint16_t(kGeoAsciiParams), uint16_t(ascii.size()), 0});
  }
  keys[3] = static_cast<uint16_t>((keys.size() - 4) / 4);
  TIFFSetField(t, kGeoKeyDirectory, static_cast<uint16_t>(keys.size()), keys.data());
  if (!ascii.empty()) TIFFSetField(t, kGeoAsciiParams, ascii.c_str());

  if (grid.nodata()) {
    const std::string nd = format_nodata(*grid.nodata());
    TIFFSetField(t, TIFFTAG_GDAL_NODATA, nd.c_str());
  }

  const auto data = grid.data();
  std::vector<unsigned char> line(static_cast<std::size_t>(w) * (type == SampleType::UInt8 ? 1 : 4));
  for (uint32_t r = 0; r < h; ++r) {
    const float* src = data.data() + static_cast<std::size_t>(r) * w;
    if (type == SampleType::UInt8) {
      for (uint32_t c = 0; c < w; ++c) {
        const float v = src[c];
        line[c] = std::isnan(v) ? 0 : static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
      }
    } else {
      std::memcpy(line.data(), src, line.size());
    }
    if (TIFFWriteScanline(t, line.data(), r, 0) < 0) {
      throw DataError("cannot write " + path.string() + ": " + t_last_tiff_error);
    }
  }
}

}  // namespace lakewatch
