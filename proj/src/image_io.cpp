#include "segkey/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "segkey/errors.hpp"

namespace segkey {

FeatureMap to_feature_map(const ImageU8& img) {
  std::vector<double> data(img.data.size());
  std::ranges::transform(img.data, data.begin(),
                         [](std::uint8_t v) { return v / 255.0; });
  return FeatureMap(img.channels, img.height, img.width, std::move(data));
}

namespace {

struct PnmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t payload_offset = 0;
};

// Parses "Px <w> <h> <maxval>" with '#' comments, followed by exactly one
// whitespace byte before the raster.
PnmHeader parse_header(const std::string& bytes, const std::string& magic,
                       const std::filesystem::path& path) {
  const std::string where = path.string() + ": ";
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) {
    throw ParseError(where + "expected " + magic + " header");
  }
  std::size_t pos = 2;
  auto next_number = [&]() -> std::size_t {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw ParseError(where + "malformed header");
    }
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (value > (1u << 24)) throw ParseError(where + "header value too large");
      ++pos;
    }
    return value;
  };
  PnmHeader header;
  header.width = next_number();
  header.height = next_number();
  const std::size_t maxval = next_number();
  if (header.width == 0 || header.height == 0) {
    throw ParseError(where + "zero image dimension");
  }
  if (maxval != 255) {
    throw ParseError(where + "unsupported maxval " + std::to_string(maxval));
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError(where + "truncated header");
  }
  header.payload_offset = pos + 1;
  return header;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << header;
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const ImageU8& img) {
  if (img.channels != 3) throw InvalidArgument("PPM requires 3 channels");
  const std::size_t plane = img.height * img.width;
  std::vector<std::uint8_t> interleaved(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      interleaved[3 * i + c] = img.data[c * plane + i];
  write_bytes(path,
              "P6\n" + std::to_string(img.width) + " " +
                  std::to_string(img.height) + "\n255\n",
              interleaved);
}

ImageU8 read_ppm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const PnmHeader header = parse_header(bytes, "P6", path);
  const std::size_t plane = header.width * header.height;
  if (bytes.size() - header.payload_offset < 3 * plane) {
    throw ParseError(path.string() + ": truncated pixel data");
  }
  ImageU8 img(3, header.height, header.width);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      img.data[c * plane + i] =
          static_cast<std::uint8_t>(bytes[header.payload_offset + 3 * i + c]);
  return img;
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  write_bytes(path,
              "P5\n" + std::to_string(labels.width) + " " +
                  std::to_string(labels.height) + "\n255\n",
              labels.data);
}

LabelMap read_pgm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const PnmHeader header = parse_header(bytes, "P5", path);
  const std::size_t plane = header.width * header.height;
  if (bytes.size() - header.payload_offset < plane) {
    throw ParseError(path.string() + ": truncated pixel data");
  }
  LabelMap labels(header.height, header.width);
  for (std::size_t i = 0; i < plane; ++i) {
    labels.data[i] = static_cast<std::uint8_t>(bytes[header.payload_offset + i]);
  }
  return labels;
}

namespace {

struct Tap {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

// Half-pixel-center sampling of a span [start, start+len) onto `out` points.
std::vector<Tap> bilinear_taps(std::size_t start, std::size_t len,
                               std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(len) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(len - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, len - 1);
    taps[d] = {start + lo, start + hi, src - static_cast<double>(lo)};
  }
  return taps;
}

std::vector<std::size_t> nearest_taps(std::size_t start, std::size_t len,
                                      std::size_t out) {
  std::vector<std::size_t> taps(out);
  for (std::size_t d = 0; d < out; ++d) {
    const std::size_t src = (2 * d + 1) * len / (2 * out);
    taps[d] = start + std::min(src, len - 1);
  }
  return taps;
}

void check_rect(std::size_t h, std::size_t w, std::size_t top, std::size_t left,
                std::size_t crop_h, std::size_t crop_w, std::size_t out_h,
                std::size_t out_w) {
  if (crop_h == 0 || crop_w == 0 || out_h == 0 || out_w == 0 ||
      top + crop_h > h || left + crop_w > w) {
    throw InvalidArgument("resample rectangle outside the image");
  }
}

}  // namespace

ImageU8 resample_bilinear(const ImageU8& img, std::size_t top, std::size_t left,
                          std::size_t crop_h, std::size_t crop_w,
                          std::size_t out_h, std::size_t out_w) {
  check_rect(img.height, img.width, top, left, crop_h, crop_w, out_h, out_w);
  const auto rows = bilinear_taps(top, crop_h, out_h);
  const auto cols = bilinear_taps(left, crop_w, out_w);
  ImageU8 out(img.channels, out_h, out_w);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const Tap& ry = rows[y];
      for (std::size_t x = 0; x < out_w; ++x) {
        const Tap& rx = cols[x];
        const double top_row = (1 - rx.frac) * img.at(c, ry.i0, rx.i0) +
                               rx.frac * img.at(c, ry.i0, rx.i1);
        const double bottom_row = (1 - rx.frac) * img.at(c, ry.i1, rx.i0) +
                                  rx.frac * img.at(c, ry.i1, rx.i1);
        const double v = (1 - ry.frac) * top_row + ry.frac * bottom_row;
        out.at(c, y, x) =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

LabelMap resample_nearest(const LabelMap& labels, std::size_t top,
                          std::size_t left, std::size_t crop_h,
                          std::size_t crop_w, std::size_t out_h,
                          std::size_t out_w) {
  check_rect(labels.height, labels.width, top, left, crop_h, crop_w, out_h,
             out_w);
  const auto rows = nearest_taps(top, crop_h, out_h);
  const auto cols = nearest_taps(left, crop_w, out_w);
  LabelMap out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x)
      out.at(y, x) = labels.at(rows[y], cols[x]);
  return out;
}

ImageU8 flip_horizontal(const ImageU8& img) {
  ImageU8 out(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

LabelMap flip_horizontal(const LabelMap& labels) {
  LabelMap out(labels.height, labels.width);
  for (std::size_t y = 0; y < labels.height; ++y)
    for (std::size_t x = 0; x < labels.width; ++x)
      out.at(y, x) = labels.at(y, labels.width - 1 - x);
  return out;
}

}  // namespace segkey
