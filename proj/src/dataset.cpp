#include "segkey/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "segkey/errors.hpp"
#include "segkey/key.hpp"

namespace segkey {

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

std::size_t DatasetManifest::count(Split split) const {
  switch (split) {
    case Split::kTrain: return n_train;
    case Split::kDev: return n_dev;
    case Split::kTest: return n_test;
  }
  return 0;
}

namespace {

using Color = std::array<int, 3>;

std::uint64_t sample_seed(std::uint64_t seed, Split split, std::size_t index) {
  SplitMix64 mix(seed);
  std::uint64_t s = mix.next_u64();
  s ^= (static_cast<std::uint64_t>(split) + 1) * 0xD1B54A32D192ED03ULL;
  SplitMix64 split_mix(s);
  return split_mix.next_u64() ^ (static_cast<std::uint64_t>(index) * 0x9E3779B97F4A7C15ULL);
}

// h in degrees, s and v in [0, 1].
Color hsv_color(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h + 360.0, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = v - c;
  return {static_cast<int>(std::lround(255.0 * (rgb[0] + m))),
          static_cast<int>(std::lround(255.0 * (rgb[1] + m))),
          static_cast<int>(std::lround(255.0 * (rgb[2] + m)))};
}

// Muted background tone.
Color background_color(RandomStream& rng) {
  const double h = rng.uniform(0.0, 360.0);
  const double s = rng.uniform(0.0, 0.25);
  const double v = rng.uniform(0.25, 0.75);
  return hsv_color(h, s, v);
}

// Saturated fill whose hue band depends on the class (red, green, blue
// centers with +-40 degree jitter).
Color shape_color(RandomStream& rng, int cls) {
  const double h = 120.0 * (cls - 1) + rng.uniform(-40.0, 40.0);
  const double s = rng.uniform(0.65, 1.0);
  const double v = rng.uniform(0.6, 1.0);
  return hsv_color(h, s, v);
}

int color_distance(const Color& a, const Color& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

struct Shape {
  int cls;
  double cx, cy, r;
  double half_w, half_h;  // rectangle
  std::array<double, 6> tri;  // triangle vertices
  Color color;

  bool covers(double x, double y) const {
    switch (cls) {
      case 1:
        return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
      case 2:
        return std::abs(x - cx) <= half_w && std::abs(y - cy) <= half_h;
      default: {
        auto edge = [&](int a, int b) {
          return (tri[2 * b] - tri[2 * a]) * (y - tri[2 * a + 1]) -
                 (tri[2 * b + 1] - tri[2 * a + 1]) * (x - tri[2 * a]);
        };
        const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
        return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      }
    }
  }
};

Shape random_shape(RandomStream& rng, double size, const Color& background) {
  Shape s{};
  s.cls = 1 + static_cast<int>(rng.uniform_below(3));
  s.r = rng.uniform(size / 8.0, size / 3.5);
  s.cx = rng.uniform(s.r * 0.5, size - s.r * 0.5);
  s.cy = rng.uniform(s.r * 0.5, size - s.r * 0.5);
  s.half_w = s.r * rng.uniform(0.6, 1.0);
  s.half_h = s.r * rng.uniform(0.6, 1.0);
  const double rot = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int v = 0; v < 3; ++v) {
    const double a = rot + v * 2.0 * std::numbers::pi / 3.0;
    s.tri[2 * v] = s.cx + 1.2 * s.r * std::cos(a);
    s.tri[2 * v + 1] = s.cy + 1.2 * s.r * std::sin(a);
  }
  do {
    s.color = shape_color(rng, s.cls);
  } while (color_distance(s.color, background) < 120);
  return s;
}

}  // namespace

SegSample generate_sample(std::uint64_t seed, Split split, std::size_t index,
                          std::size_t size) {
  if (size < 16) throw InvalidArgument("dataset image size must be >= 16");
  SplitMix64 rng(sample_seed(seed, split, index));
  const double s = static_cast<double>(size);

  for (;;) {
    const Color bg = background_color(rng);
    const double fx = rng.uniform(0.2, 0.8), fy = rng.uniform(0.2, 0.8);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(10.0, 30.0);

    const std::size_t n_shapes = 1 + rng.uniform_below(3);
    std::vector<Shape> shapes;
    for (std::size_t i = 0; i < n_shapes; ++i) shapes.push_back(random_shape(rng, s, bg));

    SegSample sample{ImageU8(3, size, size), LabelMap(size, size)};
    std::size_t background = 0;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double px = static_cast<double>(x) + 0.5;
        const double py = static_cast<double>(y) + 0.5;
        const Shape* top = nullptr;
        for (const Shape& sh : shapes) {
          if (sh.covers(px, py)) top = &sh;
        }
        const double texture = amp * std::sin(fx * px + fy * py + phase);
        for (std::size_t c = 0; c < 3; ++c) {
          const double noise = rng.uniform(-10.0, 10.0);
          const double base = top ? top->color[c] : bg[c] + texture;
          sample.image.at(c, y, x) = clamp_u8(base + noise);
        }
        sample.labels.at(y, x) = static_cast<std::uint8_t>(top ? top->cls : 0);
        if (!top) ++background;
      }
    }
    const double frac = static_cast<double>(background) / (s * s);
    if (frac >= kMinBackground && frac <= kMaxBackground) return sample;
  }
}

std::filesystem::path image_path(const std::filesystem::path& dir, Split split,
                                 std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "img_%05zu.ppm", index);
  return dir / split_name(split) / name;
}

std::filesystem::path label_path(const std::filesystem::path& dir, Split split,
                                 std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "lbl_%05zu.pgm", index);
  return dir / split_name(split) / name;
}

namespace {

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["size"] = m.size;
  j["num_classes"] = m.num_classes;
  j["class_names"] = m.class_names;
  j["splits"] = {{"train", m.n_train}, {"dev", m.n_dev}, {"test", m.n_test}};
  j["seed"] = m.seed;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

}  // namespace

DatasetManifest generate_dataset(const GenerateOptions& options,
                                 const std::filesystem::path& dir) {
  if (options.n_train == 0 || options.n_dev == 0 || options.n_test == 0) {
    throw InvalidArgument("every split needs at least one sample");
  }
  if (options.size < 16) throw InvalidArgument("dataset image size must be >= 16");
  DatasetManifest m;
  m.size = options.size;
  m.n_train = options.n_train;
  m.n_dev = options.n_dev;
  m.n_test = options.n_test;
  m.seed = options.seed;
  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    std::filesystem::create_directories(dir / split_name(split));
    for (std::size_t i = 0; i < m.count(split); ++i) {
      save_sample(image_path(dir, split, i), label_path(dir, split, i),
                  generate_sample(options.seed, split, i, options.size));
    }
  }
  write_manifest(dir, m);
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.version = j.at("version").get<int>();
    m.size = j.at("size").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.n_train = j.at("splits").at("train").get<std::size_t>();
    m.n_dev = j.at("splits").at("dev").get<std::size_t>();
    m.n_test = j.at("splits").at("test").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (m.n_train == 0 || m.n_dev == 0 || m.n_test == 0) {
    throw ParseError(path.string() + ": empty split");
  }
  if (m.class_names.size() != m.num_classes) {
    throw ParseError(path.string() + ": class name count does not match num_classes");
  }
  return m;
}

SegSample load_sample(const std::filesystem::path& image_file,
                      const std::filesystem::path& label_file,
                      std::size_t num_classes) {
  SegSample s{read_ppm(image_file), read_pgm(label_file)};
  if (s.image.height != s.labels.height || s.image.width != s.labels.width) {
    throw InvalidArgument(label_file.string() + ": label map size differs from " +
                          image_file.string());
  }
  for (std::uint8_t v : s.labels.data) {
    if (v >= num_classes) {
      throw InvalidArgument(label_file.string() + ": label value " +
                            std::to_string(v) + " >= " + std::to_string(num_classes));
    }
  }
  return s;
}

void save_sample(const std::filesystem::path& image_file,
                 const std::filesystem::path& label_file, const SegSample& s) {
  write_ppm(image_file, s.image);
  write_pgm(label_file, s.labels);
}

std::vector<SegSample> load_split(const std::filesystem::path& dir, Split split) {
  const DatasetManifest m = read_manifest(dir);
  std::vector<SegSample> out;
  out.reserve(m.count(split));
  for (std::size_t i = 0; i < m.count(split); ++i) {
    out.push_back(load_sample(image_path(dir, split, i), label_path(dir, split, i),
                              m.num_classes));
  }
  return out;
}

SegSample resize_sample(const SegSample& s, std::size_t new_size) {
  if (new_size == 0) throw InvalidArgument("resize target must be >= 1");
  return {resample_bilinear(s.image, 0, 0, s.image.height, s.image.width,
                            new_size, new_size),
          resample_nearest(s.labels, 0, 0, s.labels.height, s.labels.width,
                           new_size, new_size)};
}

}  // namespace segkey
