#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "graspkit/common.hpp"

namespace graspkit {

/// Vacuum gauge pressure in kPa relative to ambient; negative is vacuum.
struct PressureReading {
  double gauge_pressure = 0.0;
};

inline constexpr double kSuctionThresholdKpa = -55.0;

/// Picked when the pressure is strictly below the threshold.
inline bool suction_picked(PressureReading p, double threshold_kpa = kSuctionThresholdKpa) {
  if (!std::isfinite(p.gauge_pressure)) throw InvalidArgument("pressure reading must be finite");
  return p.gauge_pressure < threshold_kpa;
}

/// Picked when the gripper stays strictly wider than closed + tolerance.
inline bool width_picked(double width_after_close, double fully_closed_width, double tolerance) {
  if (width_after_close < 0.0 || fully_closed_width < 0.0)
    throw InvalidArgument("gripper widths must be non-negative");
  return width_after_close > fully_closed_width + tolerance;
}

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  Raster<Rgb> pixels;
  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
};

struct Roi {
  int x = 0, y = 0, width = 0, height = 0;
};

enum class PickedWhen { Above, Below };

/// Redness check setup. The default `Below` means an object in front of the
/// red backdrop lowers the mean red value.
struct RednessCheckConfig {
  Roi roi;
  double r_threshold = 128.0;
  PickedWhen picked_when = PickedWhen::Below;
};

struct RednessResult {
  bool picked = false;
  double r_mean = 0.0;
};

inline RednessResult redness_picked(const RgbImage& image, const RednessCheckConfig& cfg) {
  const Roi& r = cfg.roi;
  if (r.width <= 0 || r.height <= 0) throw InvalidArgument("redness check: ROI is empty");
  if (r.x < 0 || r.y < 0 || r.x + r.width > image.width() || r.y + r.height > image.height())
    throw InvalidArgument("redness check: ROI outside the image");
  if (!(cfg.r_threshold >= 0.0 && cfg.r_threshold <= 255.0))
    throw InvalidArgument("redness check: threshold must be in [0, 255]");
  std::uint64_t sum = 0;
  for (int v = r.y; v < r.y + r.height; ++v)
    for (int u = r.x; u < r.x + r.width; ++u) sum += image.pixels(u, v)[0];
  const double mean = static_cast<double>(sum) / (static_cast<double>(r.width) * r.height);
  const bool picked = cfg.picked_when == PickedWhen::Above ? mean > cfg.r_threshold : mean < cfg.r_threshold;
  return {picked, mean};
}

// Binary PPM (P6, maxval 255).

inline RgbImage decode_ppm(const std::string& buf) {
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
      if (pos < buf.size() && buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    return buf.substr(start, pos - start);
  };
  if (token() != "P6") throw FormatError("PPM: expected binary P6 image");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw FormatError("PPM: malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw FormatError("PPM: only 8-bit images are supported");
  ++pos;
  if (buf.size() < pos || buf.size() - pos != static_cast<std::size_t>(w) * h * 3)
    throw FormatError("PPM: pixel data size does not match header");
  RgbImage img{Raster<Rgb>(w, h)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    for (int c = 0; c < 3; ++c) img.pixels.data()[i][c] = static_cast<std::uint8_t>(buf[pos + 3 * i + c]);
  return img;
}

inline std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  for (const auto& p : img.pixels.data())
    for (auto c : p) out.push_back(static_cast<char>(c));
  return out;
}

inline RgbImage load_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

}  // namespace graspkit
