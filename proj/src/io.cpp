#include <pyraflow/io.hpp>

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

namespace pyraflow {

namespace {

constexpr float kFloMagic = 202021.25f;
constexpr int kMaxDim = 1 << 16;

uint32_t float_bits(float f) {
    uint32_t b;
    std::memcpy(&b, &f, 4);
    return b;
}

float bits_float(uint32_t b) {
    float f;
    std::memcpy(&f, &b, 4);
    return f;
}

void put_u32le(std::ostream& out, uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32le(std::istream& in, uint32_t& v) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) return false;
    v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

// libpng error hook: stash the message and jump back to the caller's setjmp.
[[noreturn]] void png_error_hook(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err) *err = msg;
    longjmp(png_jmpbuf(png), 1);
}

void png_warning_hook(png_structp, png_const_charp) {}

struct RawPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<unsigned char> bytes;  // rows as stored (16-bit = big-endian)
    size_t stride = 0;
};

// No locals with destructors may live between setjmp and the reads below;
// everything non-trivial is owned by `out`, `err`, or the caller.
RawPng read_png_any(const std::string& path, bool to_8bit) {
    RawPng out;
    std::string err = "libpng failure";
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open: " + path);
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_hook,
                               png_warning_hook);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError(err + " in " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    if (to_8bit) {
        png_set_expand(png);    // palette -> rgb, gray<8 -> 8, tRNS -> alpha
        png_set_strip_16(png);
        png_set_strip_alpha(png);
    }
    const int passes = png_set_interlace_handling(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = png_get_bit_depth(png, info);
    out.channels = png_get_channels(png, info);
    out.stride = png_get_rowbytes(png, info);
    if (out.width <= 0 || out.height <= 0 || out.width > kMaxDim ||
        out.height > kMaxDim) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("implausible PNG dimensions in " + path);
    }
    out.bytes.resize(out.stride * out.height);
    for (int p = 0; p < passes; ++p)
        for (int y = 0; y < out.height; ++y)
            png_read_row(png, out.bytes.data() + static_cast<size_t>(y) * out.stride,
                         nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return out;
}

void write_png_any(const std::string& path, int width, int height, int channels,
                   int bit_depth, const unsigned char* bytes) {
    std::string err = "libpng failure";
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open for writing: " + path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_hook,
                                png_warning_hook);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError(err + " writing " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, width, height, bit_depth,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const size_t stride =
        static_cast<size_t>(width) * channels * (bit_depth / 8);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(bytes + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw IoError("close failed: " + path);
}

uint16_t quantize_component(Scalar flow_value) {
    const long q = std::lround(flow_value * 64.0) + 32768;
    return static_cast<uint16_t>(std::clamp(q, 0L, 65535L));
}

const std::array<std::array<int, 3>, 55>& color_wheel() {
    static const auto wheel = [] {
        std::array<std::array<int, 3>, 55> w{};
        const int ry = 15, yg = 6, gc = 4, cb = 11, bm = 13, mr = 6;
        int k = 0;
        for (int i = 0; i < ry; ++i) w[k++] = {255, 255 * i / ry, 0};
        for (int i = 0; i < yg; ++i) w[k++] = {255 - 255 * i / yg, 255, 0};
        for (int i = 0; i < gc; ++i) w[k++] = {0, 255, 255 * i / gc};
        for (int i = 0; i < cb; ++i) w[k++] = {0, 255 - 255 * i / cb, 255};
        for (int i = 0; i < bm; ++i) w[k++] = {255 * i / bm, 0, 255};
        for (int i = 0; i < mr; ++i) w[k++] = {255, 0, 255 - 255 * i / mr};
        return w;
    }();
    return wheel;
}

}  // namespace

FlowField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    size_t offset = 0;
    auto need_u32 = [&](const char* what) {
        uint32_t v = 0;
        if (!get_u32le(in, v))
            throw IoError(std::string(what) + " truncated at byte " +
                          std::to_string(offset) + " in " + path);
        offset += 4;
        return v;
    };
    const float magic = bits_float(need_u32("header"));
    if (magic != kFloMagic)
        throw IoError("bad magic at byte 0 in " + path);
    const auto width = static_cast<int32_t>(need_u32("header"));
    const auto height = static_cast<int32_t>(need_u32("header"));
    if (width <= 0 || height <= 0 || width > kMaxDim || height > kMaxDim)
        throw IoError("implausible dimensions " + std::to_string(width) + "x" +
                      std::to_string(height) + " at byte 4 in " + path);
    FlowField flow(height, width);
    for (size_t i = 0; i < flow.data.size(); ++i)
        flow.data[i] = bits_float(need_u32("payload"));
    if (in.peek() != std::ifstream::traits_type::eof())
        throw IoError("trailing bytes after payload at byte " +
                      std::to_string(offset) + " in " + path);
    return flow;
}

void write_flo(const FlowField& flow, const std::string& path) {
    if (flow.empty())
        throw std::invalid_argument("write_flo: empty flow");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    put_u32le(out, float_bits(kFloMagic));
    put_u32le(out, static_cast<uint32_t>(flow.width));
    put_u32le(out, static_cast<uint32_t>(flow.height));
    for (Scalar v : flow.data)
        put_u32le(out, float_bits(static_cast<float>(v)));
    if (!out) throw IoError("write failed: " + path);
}

RawPng16 read_png16_raw(const std::string& path) {
    RawPng raw = read_png_any(path, false);
    if (raw.bit_depth != 16)
        throw IoError("expected a 16-bit PNG: " + path);
    RawPng16 out;
    out.width = raw.width;
    out.height = raw.height;
    out.channels = raw.channels;
    out.samples.resize(static_cast<size_t>(raw.width) * raw.height * raw.channels);
    for (int y = 0; y < raw.height; ++y) {
        const unsigned char* row = raw.bytes.data() + y * raw.stride;
        for (int i = 0; i < raw.width * raw.channels; ++i)
            out.samples[static_cast<size_t>(y) * raw.width * raw.channels + i] =
                static_cast<uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
    }
    return out;
}

FlowWithValidity read_kitti_png(const std::string& path) {
    const RawPng16 raw = read_png16_raw(path);
    if (raw.channels != 3)
        throw IoError("expected a 3-channel flow PNG: " + path);
    FlowWithValidity out;
    out.flow = FlowField(raw.height, raw.width);
    out.valid = Mask(raw.height, raw.width);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x) {
            const size_t base = (static_cast<size_t>(y) * raw.width + x) * 3;
            if (raw.samples[base + 2] == 0) continue;
            out.valid.at(y, x) = 1;
            out.flow.u(y, x) = (raw.samples[base] - 32768.0) / 64.0;
            out.flow.v(y, x) = (raw.samples[base + 1] - 32768.0) / 64.0;
        }
    return out;
}

void write_kitti_png(const FlowField& flow, const Mask& valid,
                     const std::string& path) {
    if (flow.empty() || valid.height != flow.height || valid.width != flow.width)
        throw std::invalid_argument("write_kitti_png: shapes disagree");
    // Rows hold big-endian 16-bit samples, the byte order PNG stores.
    std::vector<unsigned char> bytes(static_cast<size_t>(flow.height) *
                                     flow.width * 3 * 2);
    size_t p = 0;
    auto put16 = [&](uint16_t v) {
        bytes[p++] = static_cast<unsigned char>(v >> 8);
        bytes[p++] = static_cast<unsigned char>(v & 0xff);
    };
    for (int y = 0; y < flow.height; ++y)
        for (int x = 0; x < flow.width; ++x) {
            put16(quantize_component(flow.u(y, x)));
            put16(quantize_component(flow.v(y, x)));
            put16(valid.at(y, x) ? 1 : 0);
        }
    write_png_any(path, flow.width, flow.height, 3, 16, bytes.data());
}

Image read_image_png(const std::string& path) {
    const RawPng raw = read_png_any(path, true);
    if (raw.channels != 1 && raw.channels != 3)
        throw IoError("expected a gray or RGB image: " + path);
    Image img(raw.height, raw.width, raw.channels);
    for (int y = 0; y < raw.height; ++y) {
        const unsigned char* row = raw.bytes.data() + y * raw.stride;
        for (int i = 0; i < raw.width * raw.channels; ++i)
            img.data[static_cast<size_t>(y) * raw.width * raw.channels + i] =
                row[i] / 255.0;
    }
    return img;
}

void write_image_png(const Image& img, const std::string& path) {
    if (img.empty() || (img.channels != 1 && img.channels != 3))
        throw std::invalid_argument("write_image_png: need 1 or 3 channels");
    std::vector<unsigned char> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i)
        bytes[i] = static_cast<unsigned char>(
            std::lround(255.0 * std::clamp(img.data[i], 0.0, 1.0)));
    write_png_any(path, img.width, img.height, img.channels, 8, bytes.data());
}

Mask read_mask_png(const std::string& path) {
    const RawPng raw = read_png_any(path, true);
    if (raw.channels != 1)
        throw IoError("expected a single-channel mask: " + path);
    Mask mask(raw.height, raw.width);
    for (int y = 0; y < raw.height; ++y) {
        const unsigned char* row = raw.bytes.data() + y * raw.stride;
        for (int x = 0; x < raw.width; ++x)
            mask.at(y, x) = row[x] ? 1 : 0;
    }
    return mask;
}

void write_mask_png(const Mask& mask, const std::string& path) {
    if (mask.data.empty())
        throw std::invalid_argument("write_mask_png: empty mask");
    std::vector<unsigned char> bytes(mask.data.size());
    for (size_t i = 0; i < mask.data.size(); ++i)
        bytes[i] = mask.data[i] ? 255 : 0;
    write_png_any(path, mask.width, mask.height, 1, 8, bytes.data());
}

Image colorize_flow(const FlowField& flow, Scalar max_mag) {
    if (flow.empty())
        throw std::invalid_argument("colorize_flow: empty flow");
    Scalar maxrad = max_mag;
    if (!(maxrad > 0.0)) {
        maxrad = 0.0;
        for (size_t i = 0; i < flow.data.size(); i += 2)
            maxrad = std::max(maxrad, std::hypot(flow.data[i], flow.data[i + 1]));
        if (maxrad == 0.0) maxrad = 1.0;
    }
    const auto& wheel = color_wheel();
    const int ncols = static_cast<int>(wheel.size());
    Image out(flow.height, flow.width, 3);
    for (int y = 0; y < flow.height; ++y)
        for (int x = 0; x < flow.width; ++x) {
            const Scalar fx = flow.u(y, x) / maxrad;
            const Scalar fy = flow.v(y, x) / maxrad;
            const Scalar rad = std::hypot(fx, fy);
            const Scalar angle = std::atan2(-fy, -fx) / std::numbers::pi;
            const Scalar fk = (angle + 1.0) / 2.0 * (ncols - 1);
            const int k0 = static_cast<int>(fk);
            const int k1 = (k0 + 1) % ncols;
            const Scalar f = fk - k0;
            for (int b = 0; b < 3; ++b) {
                Scalar col = (1.0 - f) * (wheel[k0][b] / 255.0) +
                             f * (wheel[k1][b] / 255.0);
                if (rad <= 1.0)
                    col = 1.0 - rad * (1.0 - col);
                else
                    col *= 0.75;
                out.at(y, x, b) = std::lround(255.0 * col) / 255.0;
            }
        }
    return out;
}

}  // namespace pyraflow
