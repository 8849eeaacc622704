// Copyright 2026 The ivos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "ivos/errors.hpp"
#include "ivos/util.hpp"

namespace ivos {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

// Interleaved 8-bit RGB frame, row-major.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // 3 * height * width

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w) {
        if (h < 1 || w < 1) {
            throw std::invalid_argument("image dimensions must be positive");
        }
        data.assign(static_cast<std::size_t>(3) * h * w, 0);
    }

    Rgb at(int row, int col) const {
        const std::size_t i =
            3 * (static_cast<std::size_t>(row) * width + col);
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set(int row, int col, Rgb px) {
        const std::size_t i =
            3 * (static_cast<std::size_t>(row) * width + col);
        data[i] = px.r;
        data[i + 1] = px.g;
        data[i + 2] = px.b;
    }

    bool operator==(const RgbImage&) const = default;
};

// Palette-index image; index 0 is background by convention.
struct IndexedImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> indices;

    std::uint8_t at(int row, int col) const {
        return indices[static_cast<std::size_t>(row) * width + col];
    }

    bool operator==(const IndexedImage&) const = default;
};

namespace detail {

struct PngMemoryReader {
    const std::string* buffer;
    std::size_t offset = 0;
};

inline void png_memory_read(png_structp png, png_bytep out,
                            png_size_t length) {
    auto* reader =
        static_cast<PngMemoryReader*>(png_get_io_ptr(png));
    if (reader->offset + length > reader->buffer->size()) {
        png_error(png, "read past end of PNG buffer");
    }
    std::memcpy(out, reader->buffer->data() + reader->offset, length);
    reader->offset += length;
}

inline void png_memory_write(png_structp png, png_bytep data,
                             png_size_t length) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), length);
}

inline void png_memory_flush(png_structp) {}

struct PngReadHandle {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngReadHandle() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                     nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw DataError("cannot allocate PNG reader");
        }
    }
    ~PngReadHandle() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriteHandle {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngWriteHandle() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                      nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) {
            png_destroy_write_struct(&png, &info);
            throw DataError("cannot allocate PNG writer");
        }
    }
    ~PngWriteHandle() { png_destroy_write_struct(&png, &info); }
};

}  // namespace detail

inline RgbImage decode_png_rgb(const std::string& bytes) {
    detail::PngReadHandle h;
    detail::PngMemoryReader reader{&bytes};
    if (setjmp(png_jmpbuf(h.png))) {
        throw ParseError("corrupt PNG data");
    }
    png_set_read_fn(h.png, &reader, detail::png_memory_read);
    png_read_info(h.png, h.info);

    png_set_expand(h.png);
    png_set_strip_16(h.png);
    png_set_strip_alpha(h.png);
    png_set_gray_to_rgb(h.png);
    png_set_palette_to_rgb(h.png);
    png_read_update_info(h.png, h.info);

    const int height = static_cast<int>(png_get_image_height(h.png, h.info));
    const int width = static_cast<int>(png_get_image_width(h.png, h.info));
    RgbImage img(height, width);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int r = 0; r < height; ++r) {
        rows[static_cast<std::size_t>(r)] =
            img.data.data() + static_cast<std::size_t>(3) * width * r;
    }
    png_read_image(h.png, rows.data());
    png_read_end(h.png, nullptr);
    return img;
}

inline RgbImage read_png_rgb(const std::filesystem::path& path) {
    return decode_png_rgb(read_file(path));
}

inline std::string encode_png_rgb(const RgbImage& img) {
    detail::PngWriteHandle h;
    std::string out;
    if (setjmp(png_jmpbuf(h.png))) {
        throw DataError("PNG encode failed");
    }
    png_set_write_fn(h.png, &out, detail::png_memory_write,
                     detail::png_memory_flush);
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(h.png, h.info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int r = 0; r < img.height; ++r) {
        rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(
            img.data.data() + static_cast<std::size_t>(3) * img.width * r);
    }
    png_write_image(h.png, rows.data());
    png_write_end(h.png, nullptr);
    return out;
}

inline void write_png_rgb(const RgbImage& img,
                          const std::filesystem::path& path) {
    write_file_atomic(path, encode_png_rgb(img));
}

// Reads a paletted (or 8-bit grayscale) PNG as raw palette indices.
inline IndexedImage decode_png_indexed(const std::string& bytes) {
    detail::PngReadHandle h;
    detail::PngMemoryReader reader{&bytes};
    if (setjmp(png_jmpbuf(h.png))) {
        throw ParseError("corrupt PNG data");
    }
    png_set_read_fn(h.png, &reader, detail::png_memory_read);
    png_read_info(h.png, h.info);

    const png_byte color_type = png_get_color_type(h.png, h.info);
    if (color_type != PNG_COLOR_TYPE_PALETTE &&
        color_type != PNG_COLOR_TYPE_GRAY) {
        throw ParseError("mask PNG must be paletted or grayscale");
    }
    png_set_packing(h.png);  // expand 1/2/4-bit indices to one byte each
    if (color_type == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(h.png, h.info) == 16) {
        png_set_strip_16(h.png);
    }
    png_read_update_info(h.png, h.info);

    const int height = static_cast<int>(png_get_image_height(h.png, h.info));
    const int width = static_cast<int>(png_get_image_width(h.png, h.info));
    IndexedImage img;
    img.height = height;
    img.width = width;
    img.indices.assign(
        static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
        0);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int r = 0; r < height; ++r) {
        rows[static_cast<std::size_t>(r)] =
            img.indices.data() + static_cast<std::size_t>(width) * r;
    }
    png_read_image(h.png, rows.data());
    png_read_end(h.png, nullptr);
    return img;
}

inline IndexedImage read_png_indexed(const std::filesystem::path& path) {
    return decode_png_indexed(read_file(path));
}

inline std::string encode_png_indexed(const IndexedImage& img) {
    detail::PngWriteHandle h;
    std::string out;
    if (setjmp(png_jmpbuf(h.png))) {
        throw DataError("PNG encode failed");
    }
    png_set_write_fn(h.png, &out, detail::png_memory_write,
                     detail::png_memory_flush);
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed 256-entry palette; entry 0 is black background.
    png_color palette[256];
    for (int i = 0; i < 256; ++i) {
        palette[i].red = static_cast<png_byte>((i * 67) % 256);
        palette[i].green = static_cast<png_byte>((i * 131) % 256);
        palette[i].blue = static_cast<png_byte>((i * 199) % 256);
    }
    palette[0] = {0, 0, 0};
    png_set_PLTE(h.png, h.info, palette, 256);
    png_write_info(h.png, h.info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int r = 0; r < img.height; ++r) {
        rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(
            img.indices.data() + static_cast<std::size_t>(img.width) * r);
    }
    png_write_image(h.png, rows.data());
    png_write_end(h.png, nullptr);
    return out;
}

inline void write_png_indexed(const IndexedImage& img,
                              const std::filesystem::path& path) {
    write_file_atomic(path, encode_png_indexed(img));
}

}  // namespace ivos
