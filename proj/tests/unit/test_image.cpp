#include <doctest.h>

#include <fstream>
#include <random>

#include "copyscope/error.hpp"
#include "copyscope/image.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace copyscope;

namespace {

// 2x1 RGBA: opaque red, then fully transparent black.
constexpr unsigned char kRgbaPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0xf4, 0x22, 0x7f, 0x8a, 0x00, 0x00, 0x00,
    0x0f, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8, 0xcf, 0xc0, 0x00, 0x44, 0x0c, 0x0c, 0x00, 0x0c, 0xfc,
    0x01, 0xff, 0x5c, 0xfd, 0x14, 0x95, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

void write_bytes(const std::filesystem::path& p, const void* data, std::size_t n) {
    std::ofstream f(p, std::ios::binary);
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected copyscope::Error");
    return ErrorKind::InternalConsistency;
}

} // namespace

TEST_CASE("image invariants are enforced at construction") {
    CHECK_THROWS_AS(Image(0, 2, 3, std::uint8_t{0}), Error);
    CHECK_THROWS_AS(Image(2, 2, 2, std::uint8_t{0}), Error);
    CHECK_THROWS_AS(Image(2, 2, 3, std::vector<std::uint8_t>(11)), Error);
}

TEST_CASE("load_image decodes PNG and JPEG") {
    TempDir dir;

    SUBCASE("white 2x2 PNG") {
        save_png(Image(2, 2, 3, std::uint8_t{255}), dir / "white.png");
        const Image img = load_image(dir / "white.png");
        CHECK(img.width() == 2);
        CHECK(img.height() == 2);
        CHECK(img.channels() == 3);
        for (auto v : img.data()) CHECK(v == 255);
    }

    SUBCASE("near-black 1x1 JPEG stays within quantization of 0") {
        save_jpeg(Image(1, 1, 3, std::uint8_t{3}), dir / "dark.jpg");
        const Image img = load_image(dir / "dark.jpg");
        CHECK(img.width() == 1);
        CHECK(img.height() == 1);
        CHECK(img.channels() == 3);
        for (auto v : img.data()) CHECK(v <= 8);
    }

    SUBCASE("grayscale sources expand to three identical channels") {
        std::vector<std::uint8_t> px{0, 50, 100, 200};
        save_png(Image(2, 2, 1, px), dir / "gray.png");
        const Image img = load_image(dir / "gray.png");
        REQUIRE(img.channels() == 3);
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 2; ++x) {
                CHECK(img.at(x, y, 0) == px[static_cast<std::size_t>(y * 2 + x)]);
                CHECK(img.at(x, y, 1) == img.at(x, y, 0));
                CHECK(img.at(x, y, 2) == img.at(x, y, 0));
            }
        }
        save_jpeg(Image(4, 4, 1, std::uint8_t{128}), dir / "gray.jpg");
        const Image jpg = load_image(dir / "gray.jpg");
        REQUIRE(jpg.channels() == 3);
        CHECK(jpg.at(1, 1, 0) == jpg.at(1, 1, 2));
    }

    SUBCASE("alpha is composited over white") {
        write_bytes(dir / "rgba.png", kRgbaPng, sizeof kRgbaPng);
        const Image img = load_image(dir / "rgba.png");
        REQUIRE(img.channels() == 3);
        CHECK(img.at(0, 0, 0) == 255);
        CHECK(img.at(0, 0, 1) == 0);
        CHECK(img.at(0, 0, 2) == 0);
        CHECK(img.at(1, 0, 0) == 255);
        CHECK(img.at(1, 0, 1) == 255);
        CHECK(img.at(1, 0, 2) == 255);
    }

    SUBCASE("corrupt file is a decode error naming the path") {
        const char junk[] = "definitely not an image";
        write_bytes(dir / "broken.png", junk, sizeof junk);
        try {
            load_image(dir / "broken.png");
            FAIL("expected decode error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Decode);
            CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
        }
    }

    SUBCASE("truncated PNG is a decode error") {
        write_bytes(dir / "cut.png", kRgbaPng, 20);
        CHECK(kind_of([&] { load_image(dir / "cut.png"); }) == ErrorKind::Decode);
    }

    SUBCASE("missing file is an I/O error") {
        CHECK(kind_of([&] { load_image(dir / "absent.png"); }) == ErrorKind::Io);
    }
}

TEST_CASE("PNG decode -> encode -> decode is bit-identical") {
    TempDir dir;
    std::mt19937_64 rng(7);
    for (int i = 0; i < 5; ++i) {
        const Image src = oracle::random_image(rng, 13 + i, 7 + 2 * i, 3);
        save_png(src, dir / "a.png");
        const Image first = load_image(dir / "a.png");
        save_png(first, dir / "b.png");
        const Image second = load_image(dir / "b.png");
        CHECK(first == src);
        CHECK(second == first);
    }
}

TEST_CASE("to_grayscale uses integer BT.601 weights") {
    auto gray_of = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        return to_grayscale(Image(1, 1, 3, std::vector<std::uint8_t>{r, g, b})).at(0, 0);
    };
    CHECK(gray_of(255, 255, 255) == 255);
    CHECK(gray_of(255, 0, 0) == 76);
    CHECK(gray_of(0, 255, 0) == 150);
    CHECK(gray_of(0, 0, 255) == 29);
    CHECK(gray_of(0, 0, 0) == 0);

    std::mt19937_64 rng(3);
    const Image rgb = oracle::random_image(rng, 9, 5, 3);
    const Image once = to_grayscale(rgb);
    CHECK(once.channels() == 1);
    CHECK(to_grayscale(once) == once);
}

TEST_CASE("resize is bilinear with half-pixel centers") {
    SUBCASE("constant field is invariant") {
        const Image out = resize(Image(4, 4, 3, std::uint8_t{128}), 2, 2);
        CHECK(out.width() == 2);
        CHECK(out.height() == 2);
        for (auto v : out.data()) CHECK(v == 128);
    }
    SUBCASE("checkerboard collapses to its mean") {
        const Image board(2, 2, 1, std::vector<std::uint8_t>{0, 255, 255, 0});
        const Image out = resize(board, 1, 1);
        CHECK(std::abs(int(out.at(0, 0)) - 128) <= 1);
    }
    SUBCASE("same size is the identity") {
        std::mt19937_64 rng(11);
        const Image img = oracle::random_image(rng, 6, 5, 3);
        CHECK(resize(img, 6, 5) == img);
    }
    SUBCASE("zero dimension is an argument error") {
        const Image img(3, 3, 1, std::uint8_t{1});
        CHECK(kind_of([&] { resize(img, 0, 3); }) == ErrorKind::Argument);
        CHECK(kind_of([&] { resize(img, 3, 0); }) == ErrorKind::Argument);
    }
    SUBCASE("horizontal ramp upsampled by 2 interpolates between neighbours") {
        const Image ramp(2, 1, 1, std::vector<std::uint8_t>{0, 100});
        const Image out = resize(ramp, 4, 1);
        // centers map to -0.25, 0.25, 0.75, 1.25 -> clamp, 25, 75, clamp
        CHECK(out.at(0, 0) == 0);
        CHECK(out.at(1, 0) == 25);
        CHECK(out.at(2, 0) == 75);
        CHECK(out.at(3, 0) == 100);
    }
}

TEST_CASE("load_image_set orders by filename stem") {
    TempDir dir;
    save_png(Image(2, 2, 3, std::uint8_t{10}), dir / "b.png");
    save_png(Image(2, 2, 3, std::uint8_t{20}), dir / "a.png");
    save_jpeg(Image(2, 2, 3, std::uint8_t{30}), dir / "c.jpg");
    std::ofstream(dir / "notes.txt") << "ignored";

    for (unsigned threads : {1u, 4u}) {
        const ImageSet set = load_image_set(dir.path(), threads);
        REQUIRE(set.size() == 3);
        CHECK(set.labels == std::vector<std::string>{"a", "b", "c"});
        CHECK(set.images[0].at(0, 0) == 20);
        CHECK(set.images[1].at(0, 0) == 10);
    }
}

TEST_CASE("load_image_set reads a full batch of 100 images") {
    TempDir dir;
    for (int i = 0; i < 100; ++i) {
        save_png(Image(4, 4, 3, static_cast<std::uint8_t>(i)), dir / ("img_" + std::to_string(1000 + i) + ".png"));
    }
    const ImageSet set = load_image_set(dir.path(), 3);
    CHECK(set.size() == 100);
    CHECK(std::is_sorted(set.labels.begin(), set.labels.end()));
}

TEST_CASE("load_image_set error paths") {
    TempDir dir;
    CHECK(kind_of([&] { load_image_set(dir.path()); }) == ErrorKind::Dataset);
    CHECK(kind_of([&] { load_image_set(dir / "missing"); }) == ErrorKind::Dataset);

    save_png(Image(2, 2, 3, std::uint8_t{1}), dir / "good.png");
    std::ofstream(dir / "bad.jpg") << "garbage";
    CHECK(kind_of([&] { load_image_set(dir.path(), 2); }) == ErrorKind::Decode);
}
