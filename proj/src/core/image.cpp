#include "image.hpp"

#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <png.h>
// jpeglib.h expects FILE and size_t to be declared first.
#include <jpeglib.h>

namespace dressswap {

ImageRGB::ImageRGB(std::size_t width, std::size_t height, Rgb fill)
    : width_(width), height_(height), bytes_(3 * width * height) {
  for (std::size_t i = 0; i < width * height; ++i) {
    bytes_[3 * i] = fill.r;
    bytes_[3 * i + 1] = fill.g;
    bytes_[3 * i + 2] = fill.b;
  }
}

ImageRGB::ImageRGB(std::size_t width, std::size_t height, std::vector<std::uint8_t> bytes)
    : width_(width), height_(height), bytes_(std::move(bytes)) {
  if (bytes_.size() != 3 * width * height) {
    fail(ErrorCode::shape_mismatch, "image buffer has " + std::to_string(bytes_.size()) +
                                        " bytes, expected 3*" + std::to_string(width) + "*" +
                                        std::to_string(height));
  }
}

namespace {

enum class Format { png, jpeg };

Format sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open image " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof sig);
  if (in.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return Format::png;
  if (in.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) {
    return Format::jpeg;
  }
  fail(ErrorCode::format, "unsupported image format (expected PNG or JPEG): " + path.string());
}

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
};

ImageRGB decode_png(const std::filesystem::path& path, bool header_only, ImageSize* size) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
    fail(ErrorCode::format, "corrupt PNG " + path.string() + ": " + png.image.message);
  }
  if (size != nullptr) *size = {png.image.width, png.image.height};
  if (header_only) return {};
  png.image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, bytes.data(), 0, nullptr)) {
    fail(ErrorCode::format, "corrupt PNG " + path.string() + ": " + png.image.message);
  }
  return ImageRGB(png.image.width, png.image.height, std::move(bytes));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

// No C++ objects with non-trivial destructors may be live between setjmp and
// a longjmp out of libjpeg, so the buffer is owned by the caller.
bool decode_jpeg_raw(std::FILE* file, bool header_only, ImageSize* size,
                     std::vector<std::uint8_t>* bytes, char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    std::memcpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  size->width = cinfo.image_width;
  size->height = cinfo.image_height;
  if (!header_only) {
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const std::size_t stride = static_cast<std::size_t>(cinfo.output_width) * 3;
    bytes->resize(stride * cinfo.output_height);
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = bytes->data() + cinfo.output_scanline * stride;
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
  }
  jpeg_destroy_decompress(&cinfo);
  return true;
}

ImageRGB decode_jpeg(const std::filesystem::path& path, bool header_only, ImageSize* size) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorCode::io, "cannot open image " + path.string());
  ImageSize local;
  std::vector<std::uint8_t> bytes;
  char message[JMSG_LENGTH_MAX] = {};
  if (!decode_jpeg_raw(file.get(), header_only, &local, &bytes, message)) {
    fail(ErrorCode::format, "corrupt JPEG " + path.string() + ": " + message);
  }
  if (size != nullptr) *size = local;
  if (header_only) return {};
  return ImageRGB(local.width, local.height, std::move(bytes));
}

}  // namespace

ImageRGB decode_image(const std::filesystem::path& path) {
  return sniff(path) == Format::png ? decode_png(path, false, nullptr)
                                    : decode_jpeg(path, false, nullptr);
}

ImageSize probe_image(const std::filesystem::path& path) {
  ImageSize size;
  if (sniff(path) == Format::png) {
    decode_png(path, true, &size);
  } else {
    decode_jpeg(path, true, &size);
  }
  return size;
}

void encode_png(const std::filesystem::path& path, const ImageRGB& image) {
  if (image.empty()) fail(ErrorCode::invalid_argument, "cannot encode an empty image");
  PngImage png;
  png.image.width = static_cast<png_uint_32>(image.width());
  png.image.height = static_cast<png_uint_32>(image.height());
  png.image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, image.bytes().data(), 0,
                               nullptr)) {
    fail(ErrorCode::io, "cannot write PNG " + path.string() + ": " + png.image.message);
  }
}

Tensor to_tensor(const ImageRGB& image) {
  const std::size_t w = image.width(), h = image.height();
  if (image.empty()) fail(ErrorCode::invalid_argument, "cannot convert an empty image");
  Tensor out({3, h, w});
  const auto& bytes = image.bytes();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < w * h; ++p) {
      out[c * w * h + p] = bytes[3 * p + c] / 255.0;
    }
  }
  return out;
}

ImageRGB from_tensor(const Tensor& tensor) {
  if (tensor.rank() != 3 || tensor.dim(0) != 3) {
    fail(ErrorCode::shape_mismatch, "from_tensor expects [3,H,W], got " +
                                        shape_to_string(tensor.shape()));
  }
  const std::size_t h = tensor.dim(1), w = tensor.dim(2);
  std::vector<std::uint8_t> bytes(3 * w * h);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < w * h; ++p) {
      const double v = tensor[c * w * h + p];
      if (!std::isfinite(v)) {
        fail(ErrorCode::numeric, "non-finite tensor value at channel " + std::to_string(c) +
                                     " pixel " + std::to_string(p));
      }
      const double clamped = std::min(1.0, std::max(0.0, v));
      bytes[3 * p + c] = static_cast<std::uint8_t>(std::lround(clamped * 255.0));
    }
  }
  return ImageRGB(w, h, std::move(bytes));
}

}  // namespace dressswap
