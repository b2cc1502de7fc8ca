#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "quanta/core.hpp"

namespace quanta {

enum class IoErrc {
    open_failed,
    bad_magic,
    bad_version,
    unsupported_dtype,
    truncated,
    trailing_data,
    nonzero_padding,
    non_finite_value,
    bad_pgm,
    dimension_mismatch,
    write_failed,
    fingerprint_mismatch,
};

class IoError : public std::runtime_error {
public:
    IoError(IoErrc kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    IoErrc kind() const { return kind_; }

private:
    IoErrc kind_;
};

// QBS: "QBS1", version u16, reserved u16, t/h/w u32, all little-endian,
// then the packed bitstream (one contiguous stream, final byte zero-padded).
// QDS: "QDS1", version u16, dtype u16 (0 = float32 LE), t/h/w u32, then
// t*h*w float32 values. Byte-for-byte layout is documented in docs/formats.md.

BitVolume read_qbs(const std::string& path);
void write_qbs(const BitVolume& v, const std::string& path);

// Frames [t0, t0+count) without reading the rest of the file: frame r starts
// at bit offset r*h*w, so only the covering byte range is read and re-packed.
BitVolume read_qbs_frames(const std::string& path, std::int64_t t0, std::int64_t count);

DenseVolume read_qds(const std::string& path);
void write_qds(const DenseVolume& v, const std::string& path);

// binary PGM (P5), 8- or 16-bit, scaled to [0,1] by maxval
DenseVolume import_pgm_sequence(const std::vector<std::string>& paths);
void export_pgm_frame(const DenseVolume& v, std::int64_t t, const std::string& path,
                      int maxval = 65535);

}  // namespace quanta
