#include "radifusion/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "radifusion/error.hpp"

namespace radif {

namespace {

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error::runtime("truncated tensor file while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_rdf1(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error::runtime("cannot open " + path + " for writing");
    os.write("RDF1", 4);
    put_u32le(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put_u32le(os, static_cast<std::uint32_t>(d));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        const float f = static_cast<float>(t[i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32le(os, u);
    }
    if (!os) throw Error::runtime("write failed for " + path);
}

Tensor read_rdf1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error::runtime("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "RDF1", 4) != 0)
        throw Error::runtime(path + " is not an RDF1 tensor file");
    const std::uint32_t rank = get_u32le(is, "rank");
    if (rank == 0 || rank > 8) throw Error::runtime(path + ": unsupported tensor rank " + std::to_string(rank));
    std::vector<int> shape;
    std::int64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = get_u32le(is, "extent");
        if (d == 0 || d > (1u << 30)) throw Error::runtime(path + ": bad tensor extent");
        shape.push_back(static_cast<int>(d));
        n *= d;
    }
    Tensor t(shape);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::uint32_t u = get_u32le(is, "data");
        float f;
        std::memcpy(&f, &u, 4);
        t[i] = static_cast<double>(f);
    }
    return t;
}

namespace {

// Skips PGM whitespace and '#' comments, then parses one unsigned integer.
int pgm_int(std::istream& is, const std::string& path) {
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = is.get();
    }
    if (c == EOF || !std::isdigit(c)) throw Error::runtime(path + ": malformed PGM header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}

} // namespace

Tensor read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error::runtime("cannot open " + path);
    char p, kind;
    is.get(p);
    is.get(kind);
    if (!is || p != 'P' || (kind != '2' && kind != '5')) throw Error::runtime(path + ": not a P2/P5 PGM file");
    const int w = pgm_int(is, path);
    const int h = pgm_int(is, path);
    const int maxval = pgm_int(is, path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw Error::runtime(path + ": bad PGM dimensions");
    Tensor img({h, w});
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    if (kind == '2') {
        for (std::int64_t i = 0; i < n; ++i) img[i] = static_cast<double>(pgm_int(is, path));
    } else {
        // exactly one whitespace byte separates maxval from raster; pgm_int
        // already consumed it
        if (maxval < 256) {
            std::vector<unsigned char> buf(static_cast<std::size_t>(n));
            if (!is.read(reinterpret_cast<char*>(buf.data()), n)) throw Error::runtime(path + ": truncated PGM raster");
            for (std::int64_t i = 0; i < n; ++i) img[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]);
        } else {
            std::vector<unsigned char> buf(static_cast<std::size_t>(2 * n));
            if (!is.read(reinterpret_cast<char*>(buf.data()), 2 * n))
                throw Error::runtime(path + ": truncated PGM raster");
            for (std::int64_t i = 0; i < n; ++i)
                img[i] = static_cast<double>((static_cast<int>(buf[static_cast<std::size_t>(2 * i)]) << 8) |
                                             static_cast<int>(buf[static_cast<std::size_t>(2 * i + 1)]));
        }
    }
    return img;
}

void write_pgm(const std::string& path, const Tensor& img) {
    if (img.rank() != 2) throw Error::validation("write_pgm expects an [H,W] tensor, got " + shape_str(img.shape()));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error::runtime("cannot open " + path + " for writing");
    const int h = img.dim(0), w = img.dim(1);
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.size()));
    for (std::int64_t i = 0; i < img.size(); ++i) {
        const double v = std::round(img[i]);
        buf[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw Error::runtime("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error::runtime("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error::runtime("cannot open " + path + " for writing");
    os << contents;
    if (!os) throw Error::runtime("write failed for " + path);
}

} // namespace radif
