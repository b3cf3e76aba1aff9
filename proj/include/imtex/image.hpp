#pragma once

#include <png.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "imtex/tensor.hpp"

namespace imtex {

// 8-bit pixel grid, HWC interleaved, 1 or 3 channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  static Image filled(int h, int w, int c, std::uint8_t v) {
    Image im;
    im.height = h;
    im.width = w;
    im.channels = c;
    im.pixels.assign(static_cast<std::size_t>(h) * w * c, v);
    return im;
  }

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

inline std::optional<Image> read_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) return std::nullopt;
  png_byte header[8];
  if (std::fread(header, 1, 8, fp) != 8 || png_sig_cmp(header, 0, 8)) {
    std::fclose(fp);
    return std::nullopt;
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    std::fclose(fp);
    return std::nullopt;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(fp);
    return std::nullopt;
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if ((channels != 1 && channels != 3) || w == 0 || h == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return std::nullopt;
  }

  Image im;
  im.height = static_cast<int>(h);
  im.width = static_cast<int>(w);
  im.channels = channels;
  im.pixels.resize(static_cast<std::size_t>(h) * w * channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = im.pixels.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return im;
}

inline bool write_png(const std::string& path, const Image& im) {
  if (im.channels != 1 && im.channels != 3) return false;
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) return false;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) {
    std::fclose(fp);
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(im.width),
               static_cast<png_uint_32>(im.height), 8,
               im.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(im.height);
  for (int y = 0; y < im.height; ++y)
    rows[y] = const_cast<png_bytep>(
        im.pixels.data() + static_cast<std::size_t>(y) * im.width * im.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
  return true;
}

// Per-channel normalization constants. Defaults are the published constants
// of the pretrained vision backbone family (ImageNet mean/std); they are
// recorded in every checkpoint so preprocessing is reproducible.
struct ImageNorm {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
};

/// Normalized planar float image, shape (3, side, side).
template <typename T>
struct ImageTensor {
  Tensor<T> data;  // (3, S, S)
  ImageNorm norm;
};

namespace detail {

// Bilinear sample with half-pixel centers (align_corners = false).
template <typename T>
T bilinear_at(const Image& im, int c, double sy, double sx) {
  const int h = im.height, w = im.width;
  double fy = sy - 0.5, fx = sx - 0.5;
  int y0 = static_cast<int>(std::floor(fy));
  int x0 = static_cast<int>(std::floor(fx));
  const double wy = fy - y0, wx = fx - x0;
  const auto clampi = [](int v, int hi) {
    return v < 0 ? 0 : (v > hi ? hi : v);
  };
  const int y1 = clampi(y0 + 1, h - 1), x1 = clampi(x0 + 1, w - 1);
  y0 = clampi(y0, h - 1);
  x0 = clampi(x0, w - 1);
  const double v00 = im.at(y0, x0, c), v01 = im.at(y0, x1, c);
  const double v10 = im.at(y1, x0, c), v11 = im.at(y1, x1, c);
  const double top = v00 * (1.0 - wx) + v01 * wx;
  const double bot = v10 * (1.0 - wx) + v11 * wx;
  return static_cast<T>(top * (1.0 - wy) + bot * wy);
}

}  // namespace detail

/// Converts a pixel grid to the encoder input layout: grayscale promoted to
/// 3 channels, bilinear resize to side x side, values scaled to [0,1], then
/// per-channel (v - mean) / std. `side` must be divisible by 28
/// (patch size 4 x window size 7).
template <typename T>
ImageTensor<T> preprocess_image(const Image& im, int side,
                                const ImageNorm& norm = {}) {
  if (im.height < 1 || im.width < 1)
    throw DataError("preprocess_image: zero-area image");
  if (side < 1 || side % 28 != 0)
    throw UsageError("preprocess_image: side must be a positive multiple of 28");
  ImageTensor<T> out;
  out.norm = norm;
  out.data = Tensor<T>({3, side, side});
  const double scale_y = static_cast<double>(im.height) / side;
  const double scale_x = static_cast<double>(im.width) / side;
  for (int c = 0; c < 3; ++c) {
    const int src_c = im.channels == 1 ? 0 : c;
    const double mean = norm.mean[static_cast<std::size_t>(c)];
    const double inv_std = 1.0 / norm.std[static_cast<std::size_t>(c)];
    T* plane = out.data.ptr() + static_cast<std::size_t>(c) * side * side;
    for (int y = 0; y < side; ++y) {
      const double sy = (y + 0.5) * scale_y;
      for (int x = 0; x < side; ++x) {
        const double sx = (x + 0.5) * scale_x;
        const double v =
            static_cast<double>(detail::bilinear_at<T>(im, src_c, sy, sx)) /
            255.0;
        plane[static_cast<std::size_t>(y) * side + x] =
            static_cast<T>((v - mean) * inv_std);
      }
    }
  }
  return out;
}

}  // namespace imtex
