#include "sketchinpaint/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

namespace {

void write_bytes(const std::string& path, int channels, int h, int w, const std::vector<unsigned char>& buf) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
        throw Error("write_png: " + path + ": " + img.message);
    }
}

unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

Grid read_png(const std::string& path, int channels) {
    if (channels != 1 && channels != 3) {
        throw ParameterError("channels", "read_png supports 1 or 3 channels");
    }
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw IngestionError(path, 0, std::string("cannot read PNG: ") + img.message);
    }
    img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IngestionError(path, 0, std::string("cannot decode PNG: ") + img.message);
    }
    const int h = static_cast<int>(img.height);
    const int w = static_cast<int>(img.width);
    Grid out(1, channels, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                out.at(0, c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0;
            }
        }
    }
    return out;
}

void write_png(const std::string& path, const Grid& image) {
    if (image.n() != 1 || (image.c() != 1 && image.c() != 3)) {
        throw ShapeError("write_png: expected (1, 1 or 3, H, W), got " + image.shape_str());
    }
    const int c = image.c();
    std::vector<unsigned char> buf(static_cast<std::size_t>(c) * image.h() * image.w());
    for (int y = 0; y < image.h(); ++y) {
        for (int x = 0; x < image.w(); ++x) {
            for (int k = 0; k < c; ++k) {
                buf[(static_cast<std::size_t>(y) * image.w() + x) * c + k] = to_byte(image.at(0, k, y, x));
            }
        }
    }
    write_bytes(path, c, image.h(), image.w(), buf);
}

void write_png_bytes(const std::string& path, const Grid& bytes) {
    if (bytes.n() != 1 || bytes.c() != 1) {
        throw ShapeError("write_png_bytes: expected (1, 1, H, W), got " + bytes.shape_str());
    }
    std::vector<unsigned char> buf(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        buf[i] = static_cast<unsigned char>(std::clamp(bytes[i], 0.0, 255.0));
    }
    write_bytes(path, 1, bytes.h(), bytes.w(), buf);
}

}  // namespace sketchinpaint
