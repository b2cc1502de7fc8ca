#include "quanta/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace quanta {
namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0] | (p[1] << 8) | (p[2] << 16) |
                                      (static_cast<std::uint32_t>(p[3]) << 24));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::open_failed, "cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(buf.data()), size);
    if (!in) throw IoError(IoErrc::truncated, "short read on " + path);
    return buf;
}

void write_file(const std::string& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::write_failed, "cannot open " + path + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError(IoErrc::write_failed, "short write on " + path);
}

constexpr std::size_t kHeaderBytes = 20;  // magic + version + reserved/dtype + t + h + w

Shape3 parse_header(const std::vector<std::uint8_t>& buf, const char* magic,
                    std::uint16_t* second_field, const std::string& path) {
    if (buf.size() < kHeaderBytes)
        throw IoError(IoErrc::truncated, path + ": header truncated");
    if (std::memcmp(buf.data(), magic, 4) != 0)
        throw IoError(IoErrc::bad_magic, path + ": bad magic");
    const std::uint16_t version = get_u16(buf.data() + 4);
    if (version != 1)
        throw IoError(IoErrc::bad_version, path + ": unsupported version");
    *second_field = get_u16(buf.data() + 6);
    const Shape3 s{static_cast<std::int64_t>(get_u32(buf.data() + 8)),
                   static_cast<std::int64_t>(get_u32(buf.data() + 12)),
                   static_cast<std::int64_t>(get_u32(buf.data() + 16))};
    if (s.t < 1 || s.h < 1 || s.w < 1)
        throw IoError(IoErrc::truncated, path + ": degenerate shape");
    return s;
}

}  // namespace

BitVolume read_qbs(const std::string& path) {
    const auto buf = read_file(path);
    std::uint16_t reserved = 0;
    const Shape3 s = parse_header(buf, "QBS1", &reserved, path);
    const std::size_t payload = static_cast<std::size_t>(BitVolume::byte_size(s));
    if (buf.size() < kHeaderBytes + payload)
        throw IoError(IoErrc::truncated, path + ": payload truncated");
    if (buf.size() > kHeaderBytes + payload)
        throw IoError(IoErrc::trailing_data, path + ": trailing bytes after payload");
    std::vector<std::uint8_t> bits(buf.begin() + kHeaderBytes, buf.end());
    const int used = static_cast<int>(s.volume() & 7);
    if (used != 0 && (bits.back() >> used) != 0)
        throw IoError(IoErrc::nonzero_padding, path + ": nonzero padding bits");
    return BitVolume(s, std::move(bits));
}

BitVolume read_qbs_frames(const std::string& path, std::int64_t t0, std::int64_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::open_failed, "cannot open " + path);
    std::vector<std::uint8_t> head(kHeaderBytes);
    in.read(reinterpret_cast<char*>(head.data()), kHeaderBytes);
    if (!in) throw IoError(IoErrc::truncated, path + ": header truncated");
    std::uint16_t reserved = 0;
    const Shape3 s = parse_header(head, "QBS1", &reserved, path);
    if (t0 < 0 || count < 1 || t0 + count > s.t)
        throw std::invalid_argument("read_qbs_frames: frame range out of bounds");

    const std::int64_t frame_bits = s.h * s.w;
    const std::int64_t bit_lo = t0 * frame_bits;
    const std::int64_t bit_hi = (t0 + count) * frame_bits;
    const std::int64_t byte_lo = bit_lo / 8;
    const std::int64_t byte_hi = (bit_hi + 7) / 8;

    in.seekg(0, std::ios::end);
    const std::int64_t file_size = static_cast<std::int64_t>(in.tellg());
    if (file_size < static_cast<std::int64_t>(kHeaderBytes) + BitVolume::byte_size(s))
        throw IoError(IoErrc::truncated, path + ": payload truncated");

    std::vector<std::uint8_t> raw(static_cast<std::size_t>(byte_hi - byte_lo));
    in.seekg(static_cast<std::streamoff>(kHeaderBytes + byte_lo), std::ios::beg);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError(IoErrc::truncated, path + ": short frame-range read");

    // re-pack: frames are not byte-padded, so the range may start mid-byte
    BitVolume out(Shape3{count, s.h, s.w});
    const std::int64_t shift = bit_lo - byte_lo * 8;
    for (std::int64_t i = 0; i < count * frame_bits; ++i) {
        const std::int64_t b = i + shift;
        if ((raw[static_cast<std::size_t>(b >> 3)] >> (b & 7)) & 1) out.set_linear(i, 1);
    }
    return out;
}

void write_qbs(const BitVolume& v, const std::string& path) {
    std::string out;
    out.reserve(kHeaderBytes + v.bytes().size());
    out.append("QBS1", 4);
    put_u16(out, 1);  // version
    put_u16(out, 0);  // reserved
    put_u32(out, static_cast<std::uint32_t>(v.shape().t));
    put_u32(out, static_cast<std::uint32_t>(v.shape().h));
    put_u32(out, static_cast<std::uint32_t>(v.shape().w));
    out.append(reinterpret_cast<const char*>(v.bytes().data()), v.bytes().size());
    write_file(path, out.data(), out.size());
}

DenseVolume read_qds(const std::string& path) {
    const auto buf = read_file(path);
    std::uint16_t dtype = 0;
    const Shape3 s = parse_header(buf, "QDS1", &dtype, path);
    if (dtype != 0)
        throw IoError(IoErrc::unsupported_dtype, path + ": unsupported dtype code");
    const std::size_t payload = static_cast<std::size_t>(s.volume()) * 4;
    if (buf.size() < kHeaderBytes + payload)
        throw IoError(IoErrc::truncated, path + ": payload truncated");
    if (buf.size() > kHeaderBytes + payload)
        throw IoError(IoErrc::trailing_data, path + ": trailing bytes after payload");
    std::vector<float> values(static_cast<std::size_t>(s.volume()));
    std::memcpy(values.data(), buf.data() + kHeaderBytes, payload);
    for (const float f : values)
        if (!std::isfinite(f))
            throw IoError(IoErrc::non_finite_value, path + ": non-finite value in payload");
    return DenseVolume(s, std::move(values));
}

void write_qds(const DenseVolume& v, const std::string& path) {
    if (!v.all_finite())
        throw IoError(IoErrc::non_finite_value, path + ": refusing to write non-finite values");
    std::string out;
    out.reserve(kHeaderBytes + v.values().size() * 4);
    out.append("QDS1", 4);
    put_u16(out, 1);  // version
    put_u16(out, 0);  // dtype: float32 LE
    put_u32(out, static_cast<std::uint32_t>(v.shape().t));
    put_u32(out, static_cast<std::uint32_t>(v.shape().h));
    put_u32(out, static_cast<std::uint32_t>(v.shape().w));
    const std::size_t head = out.size();
    out.resize(head + v.values().size() * 4);
    std::memcpy(out.data() + head, v.values().data(), v.values().size() * 4);
    write_file(path, out.data(), out.size());
}

// ---------------------------------------------------------------------------
// PGM (P5)

namespace {

int pgm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos, const std::string& path) {
    // skips whitespace and '#' comments, reads one decimal token
    for (;;) {
        while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
        if (pos < buf.size() && buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    if (pos >= buf.size() || !std::isdigit(buf[pos]))
        throw IoError(IoErrc::bad_pgm, path + ": malformed PGM header");
    long v = 0;
    while (pos < buf.size() && std::isdigit(buf[pos])) {
        v = v * 10 + (buf[pos] - '0');
        if (v > 1 << 30) throw IoError(IoErrc::bad_pgm, path + ": header value overflow");
        ++pos;
    }
    return static_cast<int>(v);
}

struct PgmFrame {
    std::int64_t h = 0, w = 0;
    std::vector<float> values;  // scaled to [0,1]
};

PgmFrame read_pgm(const std::string& path) {
    const auto buf = read_file(path);
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5')
        throw IoError(IoErrc::bad_pgm, path + ": not a binary PGM (P5)");
    std::size_t pos = 2;
    PgmFrame f;
    f.w = pgm_token(buf, pos, path);
    f.h = pgm_token(buf, pos, path);
    const int maxval = pgm_token(buf, pos, path);
    if (maxval < 1 || maxval > 65535)
        throw IoError(IoErrc::bad_pgm, path + ": maxval out of range");
    if (pos >= buf.size() || !std::isspace(buf[pos]))
        throw IoError(IoErrc::bad_pgm, path + ": missing header terminator");
    ++pos;  // single whitespace after maxval
    const bool wide = maxval > 255;
    const std::size_t need = static_cast<std::size_t>(f.h * f.w) * (wide ? 2 : 1);
    if (buf.size() - pos < need)
        throw IoError(IoErrc::truncated, path + ": pixel data truncated");
    f.values.resize(static_cast<std::size_t>(f.h * f.w));
    const double scale = 1.0 / maxval;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        int raw;
        if (wide)
            raw = (buf[pos + 2 * i] << 8) | buf[pos + 2 * i + 1];  // PGM wide samples are big-endian
        else
            raw = buf[pos + i];
        f.values[i] = static_cast<float>(raw * scale);
    }
    return f;
}

}  // namespace

DenseVolume import_pgm_sequence(const std::vector<std::string>& paths) {
    if (paths.empty()) throw IoError(IoErrc::bad_pgm, "empty PGM sequence");
    std::vector<PgmFrame> frames;
    frames.reserve(paths.size());
    for (const auto& p : paths) frames.push_back(read_pgm(p));
    for (const auto& f : frames)
        if (f.h != frames[0].h || f.w != frames[0].w)
            throw IoError(IoErrc::dimension_mismatch, "PGM frames have mixed dimensions");
    const Shape3 s{static_cast<std::int64_t>(paths.size()), frames[0].h, frames[0].w};
    DenseVolume out(s);
    const std::int64_t frame = s.h * s.w;
    for (std::size_t t = 0; t < frames.size(); ++t)
        std::copy(frames[t].values.begin(), frames[t].values.end(),
                  out.values().begin() + static_cast<std::int64_t>(t) * frame);
    return out;
}

void export_pgm_frame(const DenseVolume& v, std::int64_t t, const std::string& path, int maxval) {
    if (t < 0 || t >= v.shape().t)
        throw IoError(IoErrc::dimension_mismatch, "frame index out of range");
    if (maxval < 1 || maxval > 65535)
        throw IoError(IoErrc::bad_pgm, "maxval out of range");
    std::string out = "P5\n" + std::to_string(v.shape().w) + " " + std::to_string(v.shape().h) +
                      "\n" + std::to_string(maxval) + "\n";
    const std::int64_t frame = v.shape().h * v.shape().w;
    const std::int64_t base = t * frame;
    const bool wide = maxval > 255;
    for (std::int64_t i = 0; i < frame; ++i) {
        const double clamped = std::clamp(static_cast<double>(v[base + i]), 0.0, 1.0);
        const int q = static_cast<int>(std::lround(clamped * maxval));
        if (wide) {
            out.push_back(static_cast<char>((q >> 8) & 0xff));
            out.push_back(static_cast<char>(q & 0xff));
        } else {
            out.push_back(static_cast<char>(q & 0xff));
        }
    }
    write_file(path, out.data(), out.size());
}

}  // namespace quanta
