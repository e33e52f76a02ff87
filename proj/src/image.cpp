#include "evidistill/image.hpp"

#include <fstream>
#include <sstream>

#include "evidistill/error.hpp"

namespace evidistill {

std::string_view to_string(ImageFormat format) {
  switch (format) {
    case ImageFormat::Png: return "png";
    case ImageFormat::Jpeg: return "jpeg";
    case ImageFormat::Gif: return "gif";
    case ImageFormat::Bmp: return "bmp";
    case ImageFormat::Webp: return "webp";
    case ImageFormat::Tiff: return "tiff";
  }
  return "unknown";
}

std::optional<ImageFormat> sniff_image_format(std::string_view b) {
  auto starts = [&](std::string_view magic) { return b.substr(0, magic.size()) == magic; };
  if (starts("\x89PNG\r\n\x1a\n")) return ImageFormat::Png;
  if (starts("\xFF\xD8\xFF")) return ImageFormat::Jpeg;
  if (starts("GIF87a") || starts("GIF89a")) return ImageFormat::Gif;
  if (starts("BM") && b.size() >= 14) return ImageFormat::Bmp;
  if (starts("RIFF") && b.size() >= 12 && b.substr(8, 4) == "WEBP") return ImageFormat::Webp;
  if (starts(std::string_view("II*\0", 4)) || starts(std::string_view("MM\0*", 4))) return ImageFormat::Tiff;
  return std::nullopt;
}

std::string load_image(const ImageRef& image) {
  std::string bytes;
  if (image.is_inline()) {
    bytes = image.bytes;
  } else {
    std::ifstream in(image.path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UndecodableImage, "cannot read image " + image.path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    bytes = buf.str();
  }
  const std::string where = image.is_inline() ? std::string("<inline image>") : image.path.string();
  if (bytes.empty()) throw Error(ErrorCode::UndecodableImage, "empty image " + where);
  if (!sniff_image_format(bytes)) throw Error(ErrorCode::UndecodableImage, "unrecognised image format " + where);
  return bytes;
}

}  // namespace evidistill
