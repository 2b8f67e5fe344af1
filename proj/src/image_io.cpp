#include "kfr/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "kfr/errors.hpp"

namespace kfr::io {

namespace {

std::string lower_ext(const std::string& path) {
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos) return {};
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// Skips whitespace and '#' comment lines between PNM header tokens.
int next_pnm_int(std::istream& in, const std::string& path) {
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw ParseError(path + ": truncated header");
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) throw ParseError(path + ": malformed header");
    return value;
}

ImageBuffer load_pnm(const std::string& path, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path + ": cannot open");
    char magic[2];
    in.read(magic, 2);
    const int width = next_pnm_int(in, path);
    const int height = next_pnm_int(in, path);
    const int maxval = next_pnm_int(in, path);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
        throw ParseError(path + ": unsupported PNM dimensions or maxval");
    in.get();  // the single whitespace byte after maxval

    ImageBuffer img = ImageBuffer::make(width, height, channels);
    std::vector<std::uint8_t> raw(img.data.size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError(path + ": truncated pixel data");
    const float inv = 1.0f / static_cast<float>(maxval);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.data[i] = static_cast<float>(raw[i]) * inv;
    return img;
}

// PFM scanlines are stored bottom-to-top; a negative scale marks
// little-endian payloads.
ImageBuffer load_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path + ": cannot open");
    std::string magic;
    in >> magic;
    const int channels = magic == "PF" ? 3 : magic == "Pf" ? 1 : 0;
    if (channels == 0) throw ParseError(path + ": not a PFM file");
    int width = 0, height = 0;
    double scale = 0.0;
    if (!(in >> width >> height >> scale) || width <= 0 || height <= 0)
        throw ParseError(path + ": malformed PFM header");
    if (scale >= 0.0) throw ParseError(path + ": big-endian PFM not supported");
    in.get();

    ImageBuffer img = ImageBuffer::make(width, height, channels);
    const std::size_t row_floats = static_cast<std::size_t>(width) * channels;
    std::vector<float> row(row_floats);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row_floats * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(row_floats * sizeof(float)))
            throw ParseError(path + ": truncated PFM data");
        std::memcpy(img.data.data() + static_cast<std::size_t>(y) * row_floats,
                    row.data(), row_floats * sizeof(float));
    }
    return img;
}

void save_pnm(const std::string& path, const ImageBuffer& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot write");
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> raw(img.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const float v = std::min(std::max(img.data[i], 0.0f), 1.0f);
        raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError(path + ": write failed");
}

void save_pfm(const std::string& path, const ImageBuffer& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot write");
    out << (img.channels == 1 ? "Pf" : "PF") << "\n"
        << img.width << " " << img.height << "\n-1.0\n";
    const std::size_t row_floats = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = img.height - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(img.data.data() +
                                                static_cast<std::size_t>(y) * row_floats),
                  static_cast<std::streamsize>(row_floats * sizeof(float)));
    if (!out) throw IoError(path + ": write failed");
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw MissingFile(path + ": cannot open");
    char magic[2] = {0, 0};
    probe.read(magic, 2);
    probe.close();
    if (magic[0] == 'P' && magic[1] == '6') return load_pnm(path, 3);
    if (magic[0] == 'P' && magic[1] == '5') return load_pnm(path, 1);
    if (magic[0] == 'P' && (magic[1] == 'F' || magic[1] == 'f')) return load_pfm(path);
    throw ParseError(path + ": unrecognized image format (expected PPM/PGM/PFM)");
}

void save_image(const std::string& path, const ImageBuffer& img) {
    if (img.empty()) throw IoError(path + ": refusing to write empty image");
    if (img.channels != 1 && img.channels != 3)
        throw IoError(path + ": only 1- or 3-channel images supported");
    const std::string ext = lower_ext(path);
    if (ext == "pfm")
        save_pfm(path, img);
    else if (ext == "ppm" || ext == "pgm")
        save_pnm(path, img);
    else
        throw IoError(path + ": unsupported output extension ." + ext);
}

LandmarkSet load_landmarks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path + ": cannot open");
    LandmarkSet lms;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Point2 p;
        if (!(ls >> p.x >> p.y))
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected \"x y\"");
        lms.points.push_back(p);
    }
    lms.validate();
    return lms;
}

void save_landmarks(const std::string& path, const LandmarkSet& lms) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot write");
    char buf[96];
    for (const Point2& p : lms.points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", p.x, p.y);
        out << buf;
    }
    if (!out) throw IoError(path + ": write failed");
}

}  // namespace kfr::io
