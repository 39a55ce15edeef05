#include "gridshed/checkpoint.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'H', 'E', 'D', 'C', 'K', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i)
        crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

class Cursor {
public:
    Cursor(const std::vector<std::uint8_t>& buf, std::size_t offset) : buf_(buf), pos_(offset) {}

    template <typename T>
    T take() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > buf_.size())
            throw CheckpointError("checkpoint truncated");
        std::uint64_t raw = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            raw |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        if constexpr (sizeof(T) == 8) return std::bit_cast<T>(raw);
        else if constexpr (sizeof(T) == 4) return std::bit_cast<T>(static_cast<std::uint32_t>(raw));
        else return std::bit_cast<T>(static_cast<std::uint8_t>(raw));
    }

    std::vector<double> take_doubles(std::uint64_t n, const char* what) {
        if (n > (buf_.size() - pos_) / 8)
            throw CheckpointError(std::string("checkpoint truncated reading ") + what);
        std::vector<double> out(n);
        for (std::uint64_t i = 0; i < n; ++i) out[i] = take<double>();
        return out;
    }

    std::size_t pos() const { return pos_; }

private:
    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_;
};

template <typename T>
void put(std::vector<std::uint8_t>& buf, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint64_t raw;
    if constexpr (sizeof(T) == 8) raw = std::bit_cast<std::uint64_t>(value);
    else if constexpr (sizeof(T) == 4) raw = std::bit_cast<std::uint32_t>(value);
    else raw = std::bit_cast<std::uint8_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf.push_back(static_cast<std::uint8_t>((raw >> (8 * i)) & 0xFFu));
}

void check_finite(const std::vector<double>& values, const char* what) {
    for (double v : values)
        if (!std::isfinite(v))
            throw CheckpointError(std::string("non-finite value in checkpoint ") + what);
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + sizeof(kMagic));
    put<std::uint32_t>(buf, kFormatVersion);
    put<std::uint8_t>(buf, ckpt.params.arch.kind == PolicyKind::linear ? 0 : 1);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(
        ckpt.params.arch.kind == PolicyKind::linear ? 0 : ckpt.params.arch.hidden_size));
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.params.input_dim));
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.params.output_dim));
    put<std::uint64_t>(buf, ckpt.params.theta.size());
    for (double v : ckpt.params.theta) put<double>(buf, v);
    put<std::uint64_t>(buf, ckpt.stats.count);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.stats.mean.size()));
    for (double v : ckpt.stats.mean) put<double>(buf, v);
    for (double v : ckpt.stats.m2) put<double>(buf, v);
    put<std::uint32_t>(buf, crc32(buf.data() + sizeof(kMagic), buf.size() - sizeof(kMagic)));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("short write to checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic) + 4 ||
        std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("not a checkpoint file: " + path.string());
    const std::size_t crc_pos = buf.size() - 4;
    const std::uint32_t stored_crc = static_cast<std::uint32_t>(buf[crc_pos]) |
                                     (static_cast<std::uint32_t>(buf[crc_pos + 1]) << 8) |
                                     (static_cast<std::uint32_t>(buf[crc_pos + 2]) << 16) |
                                     (static_cast<std::uint32_t>(buf[crc_pos + 3]) << 24);
    if (crc32(buf.data() + sizeof(kMagic), crc_pos - sizeof(kMagic)) != stored_crc)
        throw CheckpointError("checkpoint checksum mismatch: " + path.string());

    Cursor cur(buf, sizeof(kMagic));
    const auto version = cur.take<std::uint32_t>();
    if (version != kFormatVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    const auto kind = cur.take<std::uint8_t>();
    if (kind > 1) throw CheckpointError("unknown policy kind in checkpoint");
    ckpt.params.arch.kind = kind == 0 ? PolicyKind::linear : PolicyKind::lstm;
    const auto hidden = cur.take<std::uint32_t>();
    ckpt.params.arch.hidden_size = kind == 0 ? 32 : static_cast<int>(hidden);
    ckpt.params.input_dim = static_cast<int>(cur.take<std::uint32_t>());
    ckpt.params.output_dim = static_cast<int>(cur.take<std::uint32_t>());
    if (ckpt.params.input_dim <= 0 || ckpt.params.output_dim <= 0 ||
        (kind == 1 && hidden == 0))
        throw CheckpointError("invalid policy dimensions in checkpoint");

    const auto theta_len = cur.take<std::uint64_t>();
    std::size_t expected;
    try {
        expected = param_count(ckpt.params.arch, ckpt.params.input_dim, ckpt.params.output_dim);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("invalid architecture in checkpoint: ") + e.what());
    }
    if (theta_len != expected)
        throw CheckpointError("theta length does not match the declared architecture");
    ckpt.params.theta = cur.take_doubles(theta_len, "theta");

    ckpt.stats.count = cur.take<std::uint64_t>();
    const auto stats_dim = cur.take<std::uint32_t>();
    if (static_cast<int>(stats_dim) != ckpt.params.input_dim)
        throw CheckpointError("stats dimension does not match the policy input");
    ckpt.stats.mean = cur.take_doubles(stats_dim, "stats mean");
    ckpt.stats.m2 = cur.take_doubles(stats_dim, "stats m2");

    if (cur.pos() != crc_pos)
        throw CheckpointError("trailing bytes in checkpoint: " + path.string());

    check_finite(ckpt.params.theta, "theta");
    check_finite(ckpt.stats.mean, "stats mean");
    check_finite(ckpt.stats.m2, "stats m2");
    return ckpt;
}

} // namespace gridshed
