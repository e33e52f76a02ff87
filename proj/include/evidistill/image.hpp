#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "evidistill/types.hpp"

namespace evidistill {

enum class ImageFormat { Png, Jpeg, Gif, Bmp, Webp, Tiff };

std::string_view to_string(ImageFormat format);

// Identifies the container from its magic bytes.
std::optional<ImageFormat> sniff_image_format(std::string_view bytes);

// Reads the image and checks it is a recognised container. Throws
// UndecodableImage when the file is missing, empty or unrecognised.
std::string load_image(const ImageRef& image);

}  // namespace evidistill
