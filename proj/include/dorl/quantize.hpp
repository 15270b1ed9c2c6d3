#pragma once

#include <cstdint>
#include <vector>

#include "dorl/errors.hpp"
#include "dorl/linalg.hpp"

namespace dorl {

/// Uniform quantization grid over a pre-declared transmission range.
/// The grid is anchored at v_min with spacing `precision`; the level count
/// is ceil((v_max - v_min) / precision), so a non-divisible range gets one
/// extra level rather than losing coverage.
struct QuantizerConfig {
    double v_min;
    double v_max;
    double precision;

    void validate() const {
        if (!(v_max > v_min)) throw BadParams("quantizer range requires v_max > v_min");
        if (!(precision > 0.0)) throw BadParams("quantizer precision must be positive");
        if (precision > v_max - v_min)
            throw BadParams("quantizer precision exceeds the transmission range");
    }

    bool operator==(const QuantizerConfig&) const = default;
};

std::int64_t level_count(const QuantizerConfig& cfg);

/// B = log2(ceil((v_max - v_min) / P)) bits per transmitted value.
double bits_for_precision(const QuantizerConfig& cfg);

/// A parameter vector after grid quantization, with exact bit accounting.
struct QuantizedMessage {
    std::vector<std::int64_t> levels;
    QuantizerConfig config;
    double bits_per_value;
    double total_bits;
    /// Number of components whose nearest level fell outside the grid and
    /// was clamped to an endpoint. Experiments treat nonzero counts as a
    /// sign the declared range was too narrow.
    int clamp_count;
};

/// Maps each component to the nearest grid level; exact midpoints round
/// toward the lower index. Values beyond the grid clamp to the nearest
/// endpoint and are tallied in clamp_count.
QuantizedMessage quantize(const Vec& v, const QuantizerConfig& cfg);

Vec dequantize(const QuantizedMessage& msg);

/// Canonical wire layout: u32 dim, f64 v_min, f64 v_max, f64 precision,
/// then dim u32 level indices, all little-endian. Only valid when the
/// level count fits in 32 bits; ultra-fine "lossless" configs are an
/// in-process device and are rejected here.
std::vector<std::uint8_t> serialize(const QuantizedMessage& msg);
QuantizedMessage deserialize(const std::vector<std::uint8_t>& bytes);

/// Fixed per-message framing in the canonical layout (dim + config fields).
inline constexpr std::size_t kWireHeaderBytes = 4 + 3 * 8;

/// Quantizer fine enough to be statistically invisible: 2^50 levels over
/// a symmetric range. Used wherever an experiment calls for lossless
/// transmission while keeping the single code path through the quantizer.
QuantizerConfig lossless_config(double half_range);

}  // namespace dorl
