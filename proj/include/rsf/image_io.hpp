#pragma once

// PNG and JPEG codecs for 8-bit images and masks. Link against libpng and
// libjpeg (the rsf CMake target does this).

#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "image.hpp"

namespace rsf {

using Bytes = std::vector<std::uint8_t>;

inline std::uint8_t quantize8(double v)
{
    return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0));
}

namespace detail {

inline bool is_png(std::span<const std::uint8_t> b)
{
    return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

inline bool is_jpeg(std::span<const std::uint8_t> b)
{
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

struct Decoded {
    int width = 0, height = 0, channels = 0;
    Bytes pixels;
};

inline Decoded decode_png(std::span<const std::uint8_t> bytes)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw Error(std::string("cannot decode PNG: ") + img.message);
    if (img.format & PNG_FORMAT_FLAG_ALPHA) {
        png_image_free(&img);
        throw Error("PNG has an alpha channel; only 8-bit RGB or grayscale images are accepted");
    }
    if (img.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&img);
        throw Error("16-bit PNG is not supported; only 8-bit images are accepted");
    }
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    Decoded d{static_cast<int>(img.width), static_cast<int>(img.height), color ? 3 : 1, {}};
    d.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, d.pixels.data(), 0, nullptr))
        throw Error(std::string("cannot decode PNG: ") + img.message);
    return d;
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Only trivially destructible locals live in this frame between setjmp and
// the decode; `out` is owned by the caller.
inline bool decode_jpeg_raw(std::span<const std::uint8_t> bytes, Decoded* out, char* message)
{
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        std::snprintf(message, JMSG_LENGTH_MAX, "%s", jerr.message);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.num_components != 1)
        cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out->width = static_cast<int>(cinfo.output_width);
    out->height = static_cast<int>(cinfo.output_height);
    out->channels = cinfo.output_components;
    out->pixels.resize(static_cast<std::size_t>(out->width) * out->height * out->channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out->pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out->width * out->channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

inline Decoded decode_jpeg(std::span<const std::uint8_t> bytes)
{
    Decoded d;
    char message[JMSG_LENGTH_MAX] = {};
    if (!decode_jpeg_raw(bytes, &d, message))
        throw Error(std::string("cannot decode JPEG: ") + message);
    return d;
}

inline bool encode_jpeg_raw(const std::uint8_t* rgb, int width, int height, int quality, unsigned char** buffer,
                            unsigned long* size, char* message)
{
    jpeg_compress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        std::snprintf(message, JMSG_LENGTH_MAX, "%s", jerr.message);
        jpeg_destroy_compress(&cinfo);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, buffer, size);
    cinfo.image_width = static_cast<JDIMENSION>(width);
    cinfo.image_height = static_cast<JDIMENSION>(height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<std::uint8_t*>(rgb) + static_cast<std::size_t>(cinfo.next_scanline) * width * 3;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

inline Decoded decode_any(std::span<const std::uint8_t> bytes)
{
    if (is_png(bytes))
        return decode_png(bytes);
    if (is_jpeg(bytes))
        return decode_jpeg(bytes);
    throw Error("unrecognized image format (expected PNG or JPEG)");
}

inline Bytes encode_png_raw(const Bytes& pixels, int width, int height, int channels)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw Error(std::string("cannot encode PNG: ") + img.message);
    Bytes out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throw Error(std::string("cannot encode PNG: ") + img.message);
    out.resize(size);
    return out;
}

} // namespace detail

/// 8-bit RGB or grayscale (replicated) PNG/JPEG to an Image with values v/255.
inline Image decode_image(std::span<const std::uint8_t> bytes)
{
    auto d = detail::decode_any(bytes);
    if (d.width < 1 || d.height < 1)
        throw Error("decoded image is empty");
    Image img(d.width, d.height);
    auto& v = img.raw();
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c)
            v[i * 3 + c] = d.pixels[i * d.channels + (d.channels == 3 ? c : 0)] / 255.0;
    return img;
}

/// 8-bit grayscale mask with values v/255.
inline Mask decode_mask(std::span<const std::uint8_t> bytes)
{
    auto d = detail::decode_any(bytes);
    if (d.channels != 1)
        throw Error("mask must be an 8-bit grayscale image");
    Mask m(d.width, d.height);
    for (std::size_t i = 0; i < m.pixel_count(); ++i)
        m.raw()[i] = d.pixels[i] / 255.0;
    return m;
}

inline Bytes encode_png(const Image& img)
{
    Bytes px(img.raw().size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = quantize8(img.raw()[i]);
    return detail::encode_png_raw(px, img.width(), img.height(), 3);
}

inline Bytes encode_png(const Mask& mask)
{
    Bytes px(mask.raw().size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = quantize8(mask.raw()[i]);
    return detail::encode_png_raw(px, mask.width(), mask.height(), 1);
}

inline Bytes encode_jpeg(const Image& img, int quality = 95)
{
    Bytes px(img.raw().size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = quantize8(img.raw()[i]);
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    char message[JMSG_LENGTH_MAX] = {};
    bool ok = detail::encode_jpeg_raw(px.data(), img.width(), img.height(), quality, &buffer, &size, message);
    Bytes out;
    if (ok)
        out.assign(buffer, buffer + size);
    std::free(buffer);
    if (!ok)
        throw Error(std::string("cannot encode JPEG: ") + message);
    return out;
}

/// Values quantized to 8 bits and decoded back, as a PNG round trip would.
template <int C>
Planar<C> quantized(Planar<C> p)
{
    for (double& v : p.values())
        v = quantize8(v) / 255.0;
    return p;
}

inline Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string(), path.string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

/// Writes through a temporary file in the same directory and renames it over
/// the target.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + path.string(), path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error("write failed for " + path.string(), path.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text)
{
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                          text.size()));
}

inline Image read_image(const std::filesystem::path& path)
{
    auto bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what(), path.string());
    }
}

inline Mask read_mask(const std::filesystem::path& path)
{
    auto bytes = read_file(path);
    try {
        return decode_mask(bytes);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what(), path.string());
    }
}

/// PNG unless the extension says JPEG.
inline void write_image(const std::filesystem::path& path, const Image& img)
{
    auto ext = path.extension().string();
    for (auto& ch : ext)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".jpg" || ext == ".jpeg")
        write_file_atomic(path, encode_jpeg(img));
    else
        write_file_atomic(path, encode_png(img));
}

inline void write_mask(const std::filesystem::path& path, const Mask& mask)
{
    write_file_atomic(path, encode_png(mask));
}

} // namespace rsf
