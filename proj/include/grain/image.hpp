#pragma once

// Image-domain value types and their on-disk formats.  Depth images are
// 16-bit binary PGM, action images 8-bit binary PPM, both row-major with a
// comment line carrying the cm-per-pixel scale so datasets round-trip
// byte-exactly.
//
// Image row 0 is the top of the frame and corresponds to the uphill edge
// (largest y); columns increase with +x.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace grain {

struct DepthImage {
    int width = 0;
    int height = 0;
    double m_per_px = 1.0; // cm per pixel
    std::vector<float> values; // [-1, 1], row-major

    float& at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
    float at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }

    static DepthImage zeros(int w, int h, double m_per_px) {
        DepthImage img;
        img.width = w;
        img.height = h;
        img.m_per_px = m_per_px;
        img.values.assign(static_cast<size_t>(w) * h, -1.0f);
        return img;
    }

    void validate() const {
        if (values.size() != static_cast<size_t>(width) * height)
            throw std::invalid_argument("DepthImage: size mismatch");
        for (float v : values)
            if (!(v >= -1.0f && v <= 1.0f))
                throw std::invalid_argument("DepthImage: value outside [-1, 1]");
    }
};

struct ActionImage {
    int width = 0;
    int height = 0;
    double m_per_px = 1.0;
    std::vector<float> rgb; // 3 channels interleaved, [0, 1]

    float& at(int row, int col, int ch) {
        return rgb[(static_cast<size_t>(row) * width + col) * 3 + ch];
    }
    float at(int row, int col, int ch) const {
        return rgb[(static_cast<size_t>(row) * width + col) * 3 + ch];
    }

    static ActionImage zeros(int w, int h, double m_per_px) {
        ActionImage img;
        img.width = w;
        img.height = h;
        img.m_per_px = m_per_px;
        img.rgb.assign(static_cast<size_t>(w) * h * 3, 0.0f);
        return img;
    }

    int nonzero_pixels() const {
        int n = 0;
        for (size_t i = 0; i < rgb.size(); i += 3)
            if (rgb[i] != 0.0f || rgb[i + 1] != 0.0f || rgb[i + 2] != 0.0f) ++n;
        return n;
    }
};

struct DeltaImage {
    int width = 0;
    int height = 0;
    double m_per_px = 1.0;
    std::vector<float> values; // [-2, 2]

    float& at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
    float at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }

    static DeltaImage zeros(int w, int h, double m_per_px) {
        DeltaImage img;
        img.width = w;
        img.height = h;
        img.m_per_px = m_per_px;
        img.values.assign(static_cast<size_t>(w) * h, 0.0f);
        return img;
    }

    // img_t - img_s, elementwise.
    static DeltaImage diff(const DepthImage& to, const DepthImage& from) {
        DeltaImage d = zeros(to.width, to.height, to.m_per_px);
        for (size_t i = 0; i < d.values.size(); ++i)
            d.values[i] = to.values[i] - from.values[i];
        return d;
    }
};

// clamp(img + delta) into a valid DepthImage
inline DepthImage apply_delta(const DepthImage& img, const DeltaImage& delta) {
    if (img.width != delta.width || img.height != delta.height)
        throw std::invalid_argument("apply_delta: shape mismatch");
    DepthImage out = img;
    for (size_t i = 0; i < out.values.size(); ++i) {
        float v = img.values[i] + delta.values[i];
        out.values[i] = v < -1.0f ? -1.0f : (v > 1.0f ? 1.0f : v);
    }
    return out;
}

using PixelSet = std::set<std::pair<int, int>>; // (row, col)

// ---------------------------------------------------------------------------
// PGM / PPM serialization
// ---------------------------------------------------------------------------

namespace detail {

inline void write_header(std::ostream& os, const char* magic, int w, int h,
                         double m_per_px, int maxval) {
    os << magic << "\n# m_per_px " << m_per_px << "\n" << w << " " << h << "\n"
       << maxval << "\n";
}

inline void read_header(std::istream& is, const char* magic, int& w, int& h,
                        double& m_per_px, int& maxval) {
    std::string tok;
    is >> tok;
    if (tok != magic) throw std::runtime_error("image read: bad magic");
    m_per_px = 1.0;
    // optional comment lines, one of which carries m_per_px
    while (is >> std::ws && is.peek() == '#') {
        std::string line;
        std::getline(is, line);
        std::istringstream ls(line.substr(1));
        std::string key;
        if (ls >> key && key == "m_per_px") ls >> m_per_px;
    }
    is >> w >> h >> maxval;
    is.get(); // single whitespace before binary data
}

}  // namespace detail

// Depth and delta images share the 16-bit PGM container; `lo`/`hi` give the
// value range mapped onto [0, 65535].
inline void write_pgm16(const std::string& path, const std::vector<float>& values,
                        int w, int h, double m_per_px, float lo, float hi) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm16: cannot open " + path);
    detail::write_header(os, "P5", w, h, m_per_px, 65535);
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 2);
    for (size_t i = 0; i < values.size(); ++i) {
        float t = (values[i] - lo) / (hi - lo);
        t = t < 0.0f ? 0.0f : (t > 1.0f ? 1.0f : t);
        const auto u = static_cast<std::uint16_t>(std::lround(t * 65535.0f));
        buf[2 * i] = static_cast<unsigned char>(u >> 8); // big-endian per PGM
        buf[2 * i + 1] = static_cast<unsigned char>(u & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<float> read_pgm16(const std::string& path, int& w, int& h,
                                     double& m_per_px, float lo, float hi) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_pgm16: cannot open " + path);
    int maxval = 0;
    detail::read_header(is, "P5", w, h, m_per_px, maxval);
    if (maxval != 65535) throw std::runtime_error("read_pgm16: expected 16-bit PGM");
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 2);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("read_pgm16: truncated file");
    std::vector<float> values(static_cast<size_t>(w) * h);
    for (size_t i = 0; i < values.size(); ++i) {
        const std::uint16_t u = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
        values[i] = lo + (hi - lo) * (static_cast<float>(u) / 65535.0f);
    }
    return values;
}

inline void save_depth(const std::string& path, const DepthImage& img) {
    write_pgm16(path, img.values, img.width, img.height, img.m_per_px, -1.0f, 1.0f);
}

inline DepthImage load_depth(const std::string& path) {
    DepthImage img;
    img.values = read_pgm16(path, img.width, img.height, img.m_per_px, -1.0f, 1.0f);
    return img;
}

inline void save_delta(const std::string& path, const DeltaImage& img) {
    write_pgm16(path, img.values, img.width, img.height, img.m_per_px, -2.0f, 2.0f);
}

inline DeltaImage load_delta(const std::string& path) {
    DeltaImage img;
    img.values = read_pgm16(path, img.width, img.height, img.m_per_px, -2.0f, 2.0f);
    return img;
}

inline void save_action(const std::string& path, const ActionImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_action: cannot open " + path);
    detail::write_header(os, "P6", img.width, img.height, img.m_per_px, 255);
    std::vector<unsigned char> buf(img.rgb.size());
    for (size_t i = 0; i < img.rgb.size(); ++i) {
        float t = img.rgb[i];
        t = t < 0.0f ? 0.0f : (t > 1.0f ? 1.0f : t);
        buf[i] = static_cast<unsigned char>(std::lround(t * 255.0f));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline ActionImage load_action(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_action: cannot open " + path);
    ActionImage img;
    int maxval = 0;
    detail::read_header(is, "P6", img.width, img.height, img.m_per_px, maxval);
    if (maxval != 255) throw std::runtime_error("load_action: expected 8-bit PPM");
    std::vector<unsigned char> buf(static_cast<size_t>(img.width) * img.height * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("load_action: truncated file");
    img.rgb.resize(buf.size());
    for (size_t i = 0; i < buf.size(); ++i)
        img.rgb[i] = static_cast<float>(buf[i]) / 255.0f;
    return img;
}

}  // namespace grain
