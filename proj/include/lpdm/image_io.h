#ifndef LPDM_IMAGE_IO_H
#define LPDM_IMAGE_IO_H

#include <string>
#include <vector>

#include "lpdm/tensor.h"

// 8-bit PNG in and out. Grayscale and paletted files are expanded to RGB and
// any alpha channel is dropped on read. Pixels map to the signed working
// range via v/127.5 - 1 and back via round(clamp(v,-1,1)*127.5 + 127.5).

namespace lpdm {

/// Interleaved 8-bit RGB rows, top to bottom.
struct ImageU8 {
    int h = 0, w = 0;
    std::vector<unsigned char> rgb;  // h*w*3
};

ImageU8 read_png(const std::string& path);                  // throws DataError
void write_png(const std::string& path, const ImageU8& im);  // throws DataError

Tensor decode_image(const ImageU8& im);    // 3xHxW in [-1,1]
ImageU8 encode_image(const Tensor& t);     // quantize back to 8-bit

Tensor read_image_tensor(const std::string& path);
void write_image_tensor(const std::string& path, const Tensor& t);

}  // namespace lpdm

#endif
