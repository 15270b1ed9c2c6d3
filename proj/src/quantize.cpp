#include "dorl/quantize.hpp"

#include <cmath>
#include <cstring>

namespace dorl {

std::int64_t level_count(const QuantizerConfig& cfg) {
    cfg.validate();
    return static_cast<std::int64_t>(std::ceil((cfg.v_max - cfg.v_min) / cfg.precision));
}

double bits_for_precision(const QuantizerConfig& cfg) {
    return std::log2(static_cast<double>(level_count(cfg)));
}

QuantizedMessage quantize(const Vec& v, const QuantizerConfig& cfg) {
    const std::int64_t levels = level_count(cfg);
    QuantizedMessage msg;
    msg.config = cfg;
    msg.bits_per_value = std::log2(static_cast<double>(levels));
    msg.total_bits = static_cast<double>(v.size()) * msg.bits_per_value;
    msg.clamp_count = 0;
    msg.levels.reserve(v.size());
    for (double x : v) {
        if (!std::isfinite(x)) throw BadParams("cannot quantize a non-finite value");
        // Nearest level with midpoint ties toward the lower index.
        double t = (x - cfg.v_min) / cfg.precision;
        double idx = std::ceil(t - 0.5);
        std::int64_t i;
        if (idx < 0.0) {
            i = 0;
            ++msg.clamp_count;
        } else if (idx > static_cast<double>(levels - 1)) {
            i = levels - 1;
            ++msg.clamp_count;
        } else {
            i = static_cast<std::int64_t>(idx);
        }
        msg.levels.push_back(i);
    }
    return msg;
}

Vec dequantize(const QuantizedMessage& msg) {
    Vec out;
    out.reserve(msg.levels.size());
    for (std::int64_t i : msg.levels)
        out.push_back(msg.config.v_min + static_cast<double>(i) * msg.config.precision);
    return out;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t b = 0; b < sizeof(T); ++b)
        out.push_back(static_cast<std::uint8_t>((value >> (8 * b)) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    put_le(out, bits);
}

std::uint64_t get_le64(const std::uint8_t* p, int width) {
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const QuantizedMessage& msg) {
    if (level_count(msg.config) > 0xFFFFFFFFLL)
        throw BadParams("level count exceeds the u32 wire format");
    if (msg.levels.size() > 0xFFFFFFFFull) throw BadParams("message dimension exceeds u32");
    std::vector<std::uint8_t> out;
    out.reserve(kWireHeaderBytes + 4 * msg.levels.size());
    put_le(out, static_cast<std::uint32_t>(msg.levels.size()));
    put_f64(out, msg.config.v_min);
    put_f64(out, msg.config.v_max);
    put_f64(out, msg.config.precision);
    for (std::int64_t l : msg.levels) put_le(out, static_cast<std::uint32_t>(l));
    return out;
}

QuantizedMessage deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kWireHeaderBytes) throw BadParams("message truncated");
    const std::uint8_t* p = bytes.data();
    std::uint32_t dim = static_cast<std::uint32_t>(get_le64(p, 4));
    p += 4;
    double fields[3];
    for (double& f : fields) {
        std::uint64_t bits = get_le64(p, 8);
        std::memcpy(&f, &bits, 8);
        p += 8;
    }
    if (bytes.size() != kWireHeaderBytes + 4ull * dim) throw BadParams("message length mismatch");
    QuantizerConfig cfg{fields[0], fields[1], fields[2]};
    const std::int64_t levels = level_count(cfg);
    QuantizedMessage msg;
    msg.config = cfg;
    msg.bits_per_value = std::log2(static_cast<double>(levels));
    msg.total_bits = static_cast<double>(dim) * msg.bits_per_value;
    msg.clamp_count = 0;
    msg.levels.reserve(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
        auto lvl = static_cast<std::int64_t>(get_le64(p, 4));
        if (lvl >= levels) throw BadParams("level index out of grid");
        msg.levels.push_back(lvl);
        p += 4;
    }
    return msg;
}

QuantizerConfig lossless_config(double half_range) {
    if (!(half_range > 0.0)) throw BadParams("lossless range must be positive");
    const double levels = 1125899906842624.0;  // 2^50
    return QuantizerConfig{-half_range, half_range, 2.0 * half_range / levels};
}

}  // namespace dorl
