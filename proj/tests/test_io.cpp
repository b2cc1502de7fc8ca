#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "quanta/io.hpp"
#include "quanta/random.hpp"

using namespace quanta;

namespace {

std::filesystem::path tmp_dir() {
    const auto d = std::filesystem::temp_directory_path() / "quanta_io_test";
    std::filesystem::create_directories(d);
    return d;
}

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

BitVolume random_bits(const Shape3& s, double density, Rng& rng) {
    BitVolume v(s);
    for (std::int64_t i = 0; i < s.volume(); ++i)
        if (rng.next_double() < density) v.set_linear(i, 1);
    return v;
}

}  // namespace

TEST_CASE("QBS round-trip is byte-exact") {
    const auto dir = tmp_dir();
    Rng rng(1, 0);
    const BitVolume v = random_bits(Shape3{16, 32, 32}, 0.3, rng);
    const std::string a = (dir / "a.qbs").string();
    const std::string b = (dir / "b.qbs").string();
    write_qbs(v, a);
    const BitVolume r = read_qbs(a);
    CHECK(r.shape() == v.shape());
    CHECK(r.bytes() == v.bytes());
    write_qbs(r, b);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("QBS golden layout") {
    // 1x1x3 volume with bits (1, 0, 1): header + single payload byte 0b101
    const auto dir = tmp_dir();
    BitVolume v(Shape3{1, 1, 3});
    v.set(0, 0, 0, 1);
    v.set(0, 0, 2, 1);
    const std::string path = (dir / "golden.qbs").string();
    write_qbs(v, path);
    const std::vector<std::uint8_t> expected = {
        'Q', 'B', 'S', '1',       // magic
        1,  0,                    // version u16 LE
        0,  0,                    // reserved
        1,  0,  0,  0,            // t
        1,  0,  0,  0,            // h
        3,  0,  0,  0,            // w
        0b00000101,               // payload
    };
    CHECK(slurp(path) == expected);

    // a single-voxel volume is the 20-byte header plus one payload byte
    BitVolume one(Shape3{1, 1, 1});
    const std::string p1 = (dir / "one.qbs").string();
    write_qbs(one, p1);
    CHECK(std::filesystem::file_size(p1) == 21);
}

TEST_CASE("QBS error kinds are distinct") {
    const auto dir = tmp_dir();
    const std::string path = (dir / "bad.qbs").string();
    BitVolume v(Shape3{1, 2, 3});
    write_qbs(v, path);
    auto bytes = slurp(path);

    SUBCASE("bad magic") {
        auto b = bytes;
        b[0] = 'X';
        spit(path, b);
        try {
            read_qbs(path);
            FAIL("expected a throw");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrc::bad_magic);
        }
    }
    SUBCASE("truncated payload") {
        auto b = bytes;
        b.pop_back();
        spit(path, b);
        try {
            read_qbs(path);
            FAIL("expected a throw");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrc::truncated);
        }
    }
    SUBCASE("nonzero padding bits") {
        auto b = bytes;
        b.back() = 0b11000000;  // 6 voxels used, top 2 bits are padding
        spit(path, b);
        try {
            read_qbs(path);
            FAIL("expected a throw");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrc::nonzero_padding);
        }
    }
    SUBCASE("trailing bytes") {
        auto b = bytes;
        b.push_back(0);
        spit(path, b);
        try {
            read_qbs(path);
            FAIL("expected a throw");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrc::trailing_data);
        }
    }
    SUBCASE("missing file") {
        try {
            read_qbs((dir / "nope.qbs").string());
            FAIL("expected a throw");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrc::open_failed);
        }
    }
}

TEST_CASE("frame-range reads match crops of the full volume") {
    const auto dir = tmp_dir();
    Rng rng(21, 0);
    // h*w = 15 bits per frame: ranges start mid-byte on purpose
    const Shape3 s{11, 3, 5};
    const BitVolume v = random_bits(s, 0.45, rng);
    const std::string path = (dir / "ranges.qbs").string();
    write_qbs(v, path);

    for (std::int64_t t0 = 0; t0 < s.t; ++t0)
        for (std::int64_t count = 1; t0 + count <= s.t; ++count) {
            const BitVolume got = read_qbs_frames(path, t0, count);
            const BitVolume want = crop(v, CropSpec{t0, 0, 0, Shape3{count, s.h, s.w}});
            CHECK(got.bytes() == want.bytes());
        }
    CHECK_THROWS_AS(read_qbs_frames(path, 8, 4), std::invalid_argument);
    CHECK_THROWS_AS(read_qbs_frames(path, -1, 1), std::invalid_argument);
}

TEST_CASE("QDS round-trip and error kinds") {
    const auto dir = tmp_dir();
    Rng rng(2, 0);
    DenseVolume v(Shape3{3, 4, 5});
    for (std::int64_t i = 0; i < v.volume(); ++i)
        v[i] = static_cast<float>(rng.next_double() * 10.0 - 5.0);
    const std::string path = (dir / "a.qds").string();
    write_qds(v, path);
    const DenseVolume r = read_qds(path);
    CHECK(r.shape() == v.shape());
    CHECK(r.values() == v.values());

    auto bytes = slurp(path);
    SUBCASE("unsupported dtype") {
        auto b = bytes;
        b[6] = 7;  // dtype field
        spit(path, b);
        try {
            read_qds(path);
            FAIL("expected a throw");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrc::unsupported_dtype);
        }
    }
    SUBCASE("non-finite payload value") {
        auto b = bytes;
        // NaN: 0x7fc00000 little-endian into the first value
        b[20] = 0x00;
        b[21] = 0x00;
        b[22] = 0xc0;
        b[23] = 0x7f;
        spit(path, b);
        try {
            read_qds(path);
            FAIL("expected a throw");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrc::non_finite_value);
        }
    }
}

TEST_CASE("PGM import scales by maxval") {
    const auto dir = tmp_dir();
    const std::string path = (dir / "f.pgm").string();
    const std::vector<std::uint8_t> pgm = {'P', '5', '\n', '2', ' ', '2', '\n',
                                           '2', '5', '5', '\n', 0, 255, 128, 64};
    spit(path, pgm);
    const DenseVolume v = import_pgm_sequence({path});
    CHECK(v.shape() == Shape3{1, 2, 2});
    CHECK(v[0] == 0.0f);
    CHECK(v[1] == 1.0f);
    CHECK(v[2] == doctest::Approx(128.0 / 255.0));
    CHECK(v[3] == doctest::Approx(64.0 / 255.0));

    SUBCASE("two frames stack in path order") {
        const std::string p2 = (dir / "g.pgm").string();
        spit(p2, pgm);
        const DenseVolume w = import_pgm_sequence({path, p2});
        CHECK(w.shape().t == 2);
        CHECK(w.at(1, 0, 1) == 1.0f);
    }

    SUBCASE("non-P5 is rejected") {
        const std::string bad = (dir / "bad.pgm").string();
        spit(bad, {'P', '2', '\n'});
        CHECK_THROWS_AS(import_pgm_sequence({bad}), IoError);
    }

    SUBCASE("mixed dimensions are rejected") {
        const std::string other = (dir / "other.pgm").string();
        spit(other, {'P', '5', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 9});
        CHECK_THROWS_AS(import_pgm_sequence({path, other}), IoError);
    }
}

TEST_CASE("PGM export/import round-trip stays within the quantization bound") {
    const auto dir = tmp_dir();
    Rng rng(9, 0);
    DenseVolume v(Shape3{1, 6, 7});
    for (std::int64_t i = 0; i < v.volume(); ++i) v[i] = static_cast<float>(rng.next_double());

    for (const int maxval : {255, 65535}) {
        const std::string path = (dir / ("rt" + std::to_string(maxval) + ".pgm")).string();
        export_pgm_frame(v, 0, path, maxval);
        const DenseVolume r = import_pgm_sequence({path});
        for (std::int64_t i = 0; i < v.volume(); ++i)
            CHECK(std::fabs(r[i] - v[i]) <= 0.5 / maxval + 1e-7);
    }
}
