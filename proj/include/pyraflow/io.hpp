#pragma once

#include <pyraflow/core.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pyraflow {

/// Raised for unreadable, unwritable, or malformed files. Messages carry the
/// byte offset at which parsing stopped when that is meaningful.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// .flo flow file: 4-byte float sentinel 202021.25, two int32 dims (width
/// first), then width*height interleaved (u,v) float32 pairs, row-major.
/// All fields little-endian. Values round-trip bit-exactly when they are
/// float32-representable (the format stores float32).
FlowField read_flo(const std::string& path);
void write_flo(const FlowField& flow, const std::string& path);

struct FlowWithValidity {
    FlowField flow;
    Mask valid;
};

/// 16-bit 3-channel PNG flow encoding: ch1 = round(u*64)+32768, ch2 likewise
/// for v (clamped to [0,65535]), ch3 nonzero marks valid. Decoding inverts at
/// valid pixels and leaves invalid pixels at flow 0. Representable range is
/// |component| < 512 px; quantization error is at most 1/128 px.
FlowWithValidity read_kitti_png(const std::string& path);
void write_kitti_png(const FlowField& flow, const Mask& valid,
                     const std::string& path);

/// Raw 16-bit PNG pixels (bit depth must be 16), for format-level checks and
/// tooling. Samples are returned in native order, channel-interleaved.
struct RawPng16 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint16_t> samples;
};
RawPng16 read_png16_raw(const std::string& path);

/// 8-bit PNG image IO. Scalars map to bytes as round(255*clamp(v,0,1)) on
/// write and byte/255 on read; 1 or 3 channels. Palette, low-bit-depth,
/// 16-bit, and alpha inputs are converted to plain 8-bit gray/RGB on read.
Image read_image_png(const std::string& path);
void write_image_png(const Image& img, const std::string& path);

/// Binary masks as 8-bit single-channel PNGs, 0 vs 255 on disk; any nonzero
/// byte reads back as set.
Mask read_mask_png(const std::string& path);
void write_mask_png(const Mask& mask, const std::string& path);

/// Direction-coded flow visualization on the standard 55-entry hue wheel.
/// Zero flow maps to white; saturation grows with magnitude up to max_mag;
/// beyond it colors are dimmed by 0.75. max_mag <= 0 uses the field's own
/// maximum magnitude (or 1 for an all-zero field). Returns a 3-channel image
/// with values quantized to multiples of 1/255.
Image colorize_flow(const FlowField& flow, Scalar max_mag = 0.0);

}  // namespace pyraflow
