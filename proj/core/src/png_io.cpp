#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "shadowlab/dataio.hpp"
#include "shadowlab/error.hpp"

namespace shadowlab {

std::uint8_t quantize(float v) noexcept {
  const double clamped = v >= 0.0f ? std::min(static_cast<double>(v), 1.0) : 0.0;
  // Non-negative input, so std::round (half away from zero) is the rounding rule.
  return static_cast<std::uint8_t>(std::round(clamped * 255.0));
}

Image read_image(const std::filesystem::path& path) {
  const std::string name = path.string();
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, name.c_str())) {
    throw IoError(name, std::string("cannot read PNG: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(name, "corrupt PNG data: " + msg);
  }
  Image img(static_cast<int>(image.height), static_cast<int>(image.width), color ? 3 : 1);
  auto dst = img.samples();
  for (std::size_t i = 0; i < bytes.size(); ++i) dst[i] = static_cast<float>(bytes[i] / 255.0);
  return img;
}

void write_image(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) throw InvalidInput("write_image: empty image");
  const std::string name = path.string();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());

  std::vector<png_byte> bytes(img.size());
  auto src = img.samples();
  std::transform(src.begin(), src.end(), bytes.begin(), quantize);

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, name.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError(name, std::string("cannot write PNG: ") + image.message);
  }
}

}  // namespace shadowlab
