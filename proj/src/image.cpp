#include "copyscope/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <csetjmp>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>

#include <jpeglib.h>
#include <png.h>

#include "copyscope/error.hpp"
#include "copyscope/parallel.hpp"

namespace copyscope {

namespace fs = std::filesystem;

Image::Image(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width <= 0 || height <= 0) fail(ErrorKind::Argument, "image dimensions must be positive");
    if (channels != 1 && channels != 3) fail(ErrorKind::Argument, "image must have 1 or 3 channels");
    if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
        fail(ErrorKind::Argument, "image data length does not match width*height*channels");
    }
}

Image::Image(int width, int height, int channels, std::uint8_t fill)
    : Image(width, height, channels,
            std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                          static_cast<std::size_t>(std::max(height, 0)) *
                                          static_cast<std::size_t>(std::max(channels, 0)),
                                      fill)) {}

namespace {

enum class Format { Png, Jpeg, Unknown };

Format sniff(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open image file: " + path.string());
    unsigned char magic[8] = {};
    in.read(reinterpret_cast<char*>(magic), sizeof magic);
    const auto got = in.gcount();
    static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (got >= 8 && std::memcmp(magic, png_sig, 8) == 0) return Format::Png;
    if (got >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) return Format::Jpeg;
    return Format::Unknown;
}

Image decode_png(const fs::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(ErrorKind::Decode, "failed to decode PNG " + path.string() + ": " + msg);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
    png_color white{255, 255, 255};
    if (!png_image_finish_read(&png, &white, buffer.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(ErrorKind::Decode, "failed to decode PNG " + path.string() + ": " + msg);
    }
    const int w = static_cast<int>(png.width);
    const int h = static_cast<int>(png.height);
    png_image_free(&png);
    return Image(w, h, 3, std::move(buffer));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Kept free of non-trivially destructible locals between setjmp and longjmp.
bool decode_jpeg_raw(std::FILE* file, std::vector<std::uint8_t>& out, int& w, int& h, char* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        std::strncpy(message, jerr.message, JMSG_LENGTH_MAX);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    const std::size_t stride = static_cast<std::size_t>(w) * 3;
    out.resize(stride * static_cast<std::size_t>(h));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.data() + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

Image decode_jpeg(const fs::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) fail(ErrorKind::Io, "cannot open image file: " + path.string());
    std::vector<std::uint8_t> data;
    int w = 0;
    int h = 0;
    char message[JMSG_LENGTH_MAX] = {};
    if (!decode_jpeg_raw(file.get(), data, w, h, message)) {
        fail(ErrorKind::Decode, "failed to decode JPEG " + path.string() + ": " + message);
    }
    return Image(w, h, 3, std::move(data));
}

bool encode_jpeg_raw(std::FILE* file, const std::uint8_t* pixels, int w, int h, int channels, int quality,
                     char* message) {
    jpeg_compress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        std::strncpy(message, jerr.message, JMSG_LENGTH_MAX);
        jpeg_destroy_compress(&cinfo);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, file);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = channels;
    cinfo.in_color_space = channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = static_cast<std::size_t>(w) * static_cast<std::size_t>(channels);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPROW>(pixels + stride * cinfo.next_scanline);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

bool is_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::uint8_t round_clamp(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

} // namespace

Image load_image(const fs::path& path) {
    switch (sniff(path)) {
        case Format::Png: return decode_png(path);
        case Format::Jpeg: return decode_jpeg(path);
        case Format::Unknown: break;
    }
    fail(ErrorKind::Decode, "unsupported or corrupt image format: " + path.string());
}

ImageSet load_image_set(const fs::path& dir, unsigned threads) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) fail(ErrorKind::Dataset, "image directory not found: " + dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_extension(entry.path())) files.push_back(entry.path());
    }
    if (files.empty()) fail(ErrorKind::Dataset, "no images found in " + dir.string());

    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        const auto sa = a.stem().string();
        const auto sb = b.stem().string();
        if (sa != sb) return sa < sb;
        return a.filename().string() < b.filename().string();
    });

    std::vector<std::optional<Image>> decoded(files.size());
    parallel_for(files.size(), threads, [&](std::size_t i) { decoded[i] = load_image(files[i]); });

    ImageSet set;
    set.images.reserve(files.size());
    set.labels.reserve(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        set.images.push_back(std::move(*decoded[i]));
        set.labels.push_back(files[i].stem().string());
    }
    return set;
}

void save_png(const Image& img, const fs::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width());
    png.height = static_cast<png_uint_32>(img.height());
    png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, img.data().data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(ErrorKind::Io, "failed to write PNG " + path.string() + ": " + msg);
    }
}

void save_jpeg(const Image& img, const fs::path& path, int quality) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) fail(ErrorKind::Io, "cannot create file: " + path.string());
    char message[JMSG_LENGTH_MAX] = {};
    if (!encode_jpeg_raw(file.get(), img.data().data(), img.width(), img.height(), img.channels(), quality,
                         message)) {
        fail(ErrorKind::Io, "failed to write JPEG " + path.string() + ": " + message);
    }
}

Image to_grayscale(const Image& img) {
    if (img.channels() == 1) return img;
    const auto src = img.data();
    std::vector<std::uint8_t> out(img.pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const unsigned r = src[3 * i];
        const unsigned g = src[3 * i + 1];
        const unsigned b = src[3 * i + 2];
        out[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    }
    return Image(img.width(), img.height(), 1, std::move(out));
}

Image to_rgb(const Image& img) {
    if (img.channels() == 3) return img;
    const auto src = img.data();
    std::vector<std::uint8_t> out(img.pixel_count() * 3);
    for (std::size_t i = 0; i < src.size(); ++i) {
        out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = src[i];
    }
    return Image(img.width(), img.height(), 3, std::move(out));
}

Image extract_channel(const Image& img, int c) {
    if (c < 0 || c >= img.channels()) fail(ErrorKind::Argument, "channel index out of range");
    const auto src = img.data();
    const auto stride = static_cast<std::size_t>(img.channels());
    std::vector<std::uint8_t> out(img.pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i * stride + static_cast<std::size_t>(c)];
    return Image(img.width(), img.height(), 1, std::move(out));
}

Image resize(const Image& img, int width, int height) {
    if (width < 1 || height < 1) fail(ErrorKind::Argument, "resize target dimensions must be >= 1");
    if (width == img.width() && height == img.height()) return img;

    struct Tap {
        int lo;
        int hi;
        double frac;
    };
    auto taps = [](int dst, int src) {
        std::vector<Tap> t(static_cast<std::size_t>(dst));
        const double scale = static_cast<double>(src) / dst;
        for (int i = 0; i < dst; ++i) {
            double pos = (i + 0.5) * scale - 0.5;
            pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
            const int lo = static_cast<int>(std::floor(pos));
            const int hi = std::min(lo + 1, src - 1);
            t[static_cast<std::size_t>(i)] = {lo, hi, pos - lo};
        }
        return t;
    };
    const auto xt = taps(width, img.width());
    const auto yt = taps(height, img.height());
    const int ch = img.channels();

    std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height * ch);
    std::size_t k = 0;
    for (int y = 0; y < height; ++y) {
        const Tap& ty = yt[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
            const Tap& tx = xt[static_cast<std::size_t>(x)];
            for (int c = 0; c < ch; ++c) {
                const double top = img.at(tx.lo, ty.lo, c) * (1.0 - tx.frac) + img.at(tx.hi, ty.lo, c) * tx.frac;
                const double bot = img.at(tx.lo, ty.hi, c) * (1.0 - tx.frac) + img.at(tx.hi, ty.hi, c) * tx.frac;
                out[k++] = round_clamp(top * (1.0 - ty.frac) + bot * ty.frac);
            }
        }
    }
    return Image(width, height, ch, std::move(out));
}

} // namespace copyscope
