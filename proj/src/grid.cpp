#include "spectrack/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "spectrack/parallel.hpp"

namespace spectrack {

CoordinateField make_coordinate_field(int width, int height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("coordinate field needs positive dimensions, got " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  CoordinateField field;
  field.width = width;
  field.height = height;
  field.coords.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      field.coords[static_cast<std::size_t>(y) * width + x] = Vec2(field.x_of(x), field.y_of(y));
    }
  }
  return field;
}

Image::Image(int width, int height, int channels, bool with_opacity)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1) throw std::invalid_argument("image needs positive dimensions");
  if (channels != 1 && channels != 3) throw std::invalid_argument("image channels must be 1 or 3");
  intensity_.assign(pixel_count() * channels_, 0.0);
  if (with_opacity) opacity_.assign(pixel_count(), 0.0);
}

void Image::enable_opacity() {
  if (opacity_.empty()) opacity_.assign(pixel_count(), 0.0);
}

std::vector<double> Image::channel(int c) const {
  std::vector<double> out(pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = intensity_[i * channels_ + c];
  return out;
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("mse: image shapes differ");
  const auto ia = a.intensity();
  const auto ib = b.intensity();
  const double sum = parallel::chunked_sum(ia.size(), [&](std::size_t i) {
    const double d = ia[i] - ib[i];
    return d * d;
  });
  return sum / static_cast<double>(ia.size());
}

double psnr(const Image& a, const Image& b, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  const double err = mse(a, b);
  if (err == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / err));
}

namespace {

unsigned char to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

void write_bytes(const std::filesystem::path& path, const std::string& magic, int w, int h,
                 const std::vector<unsigned char>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << magic << "\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

void write_pnm(const Image& image, const std::filesystem::path& path) {
  const auto values = image.intensity();
  std::vector<unsigned char> bytes(values.size());
  std::transform(values.begin(), values.end(), bytes.begin(), to_byte);
  write_bytes(path, image.channels() == 3 ? "P6" : "P5", image.width(), image.height(), bytes);
}

void write_opacity_pgm(const Image& image, const std::filesystem::path& path) {
  if (!image.has_opacity()) throw std::invalid_argument("image has no opacity channel");
  const auto values = image.opacity();
  std::vector<unsigned char> bytes(values.size());
  std::transform(values.begin(), values.end(), bytes.begin(), to_byte);
  write_bytes(path, "P5", image.width(), image.height(), bytes);
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") {
    throw std::runtime_error(path.string() + ": unsupported netpbm magic '" + magic + "'");
  }
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (maxval != 255) throw std::runtime_error(path.string() + ": only maxval 255 is supported");
  const int channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  Image image(w, h, channels);
  auto values = image.intensity();
  if (magic == "P5" || magic == "P6") {
    std::vector<unsigned char> bytes(values.size());
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
      throw std::runtime_error(path.string() + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = bytes[i] / 255.0;
  } else {
    for (auto& v : values) {
      const std::string tok = next_token(in);
      if (tok.empty()) throw std::runtime_error(path.string() + ": truncated pixel data");
      v = std::stoi(tok) / 255.0;
    }
  }
  return image;
}

}  // namespace spectrack
