#include "holo/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace holo {

static_assert(std::endian::native == std::endian::little,
              "serialized formats assume a little-endian host");

void OpticalParams::validate() const {
    require(wavelength_um > 0.0, "BadParams", "wavelength_um must be > 0");
    require(pixel_pitch_um > 0.0, "BadParams", "pixel_pitch_um must be > 0");
    require(refractive_index >= 1.0, "BadParams", "refractive_index must be >= 1");
}

ComplexField::ComplexField(int w, int h, const OpticalParams& p, cplx fill)
    : width(w), height(h), params(p), data(static_cast<size_t>(w) * h, fill) {
    require(w >= 2 && h >= 2, "BadDims", "field dimensions must be >= 2");
    p.validate();
}

void ComplexField::validate() const {
    require(width >= 2 && height >= 2, "BadDims", "field dimensions must be >= 2");
    params.validate();
    require(data.size() == static_cast<size_t>(width) * height, "BadDims",
            "data length does not match width*height");
    for (const cplx& v : data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            fail("NonFiniteValue", "field contains a non-finite value");
}

RealImage::RealImage(int w, int h, int c, double fill)
    : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {
    require(w >= 1 && h >= 1, "BadDims", "image dimensions must be >= 1");
    require(c == 1 || c == 3, "BadDims", "channels must be 1 or 3");
}

void RealImage::validate() const {
    require(channels == 1 || channels == 3, "BadDims", "channels must be 1 or 3");
    require(data.size() == static_cast<size_t>(width) * height * channels, "BadDims",
            "data length does not match width*height*channels");
    for (double v : data) {
        if (!std::isfinite(v)) fail("NonFiniteValue", "image contains a non-finite value");
        if (v < 0.0) fail("NegativeIntensity", "intensity image contains a negative value");
    }
}

void ZStack::validate() const {
    require(planes.size() == z_positions_um.size(), "BadDims",
            "plane count does not match z position count");
    for (size_t i = 1; i < z_positions_um.size(); ++i)
        require(z_positions_um[i] > z_positions_um[i - 1], "BadZList",
                "z positions must be strictly increasing");
    for (size_t i = 1; i < planes.size(); ++i)
        require(planes[i].width == planes[0].width && planes[i].height == planes[0].height &&
                    planes[i].channels == planes[0].channels,
                "BadDims", "all stack planes must share dimensions");
}

RealImage intensity(const ComplexField& field) {
    RealImage out(field.width, field.height, 1);
    for (size_t i = 0; i < field.data.size(); ++i) {
        const cplx& v = field.data[i];
        out.data[i] = v.real() * v.real() + v.imag() * v.imag();
    }
    return out;
}

RealImage amplitude(const ComplexField& field) {
    RealImage out(field.width, field.height, 1);
    for (size_t i = 0; i < field.data.size(); ++i) out.data[i] = std::abs(field.data[i]);
    return out;
}

double image_mean(const RealImage& img) {
    double s = 0.0;
    for (double v : img.data) s += v;
    return s / static_cast<double>(img.data.size());
}

RealImage normalize_background(const RealImage& img) {
    double m = image_mean(img);
    if (m <= 1e-15) fail("ZeroBackground", "image mean is zero or negative");
    RealImage out = img;
    for (double& v : out.data) v /= m;
    return out;
}

ComplexField pad_to(const ComplexField& field, int w, int h, cplx fill) {
    if (w < field.width || h < field.height)
        fail("ShrinkNotAllowed", "pad_to target is smaller than the field");
    ComplexField out(w, h, field.params, fill);
    const int ox = (w - field.width) / 2;
    const int oy = (h - field.height) / 2;
    for (int y = 0; y < field.height; ++y)
        for (int x = 0; x < field.width; ++x) out.at(x + ox, y + oy) = field.at(x, y);
    return out;
}

ComplexField center_crop(const ComplexField& field, int w, int h) {
    require(w <= field.width && h <= field.height, "BadDims", "crop larger than field");
    ComplexField out(w, h, field.params);
    const int ox = (field.width - w) / 2;
    const int oy = (field.height - h) / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = field.at(x + ox, y + oy);
    return out;
}

double field_energy(const ComplexField& field) {
    double s = 0.0;
    for (const cplx& v : field.data) s += v.real() * v.real() + v.imag() * v.imag();
    return s;
}

RealImage extract_channel(const RealImage& img, int c) {
    require(c >= 0 && c < img.channels, "BadDims", "channel out of range");
    RealImage out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(x, y) = img.at(x, y, c);
    return out;
}

namespace {

constexpr char kCfldMagic[4] = {'C', 'F', 'L', 'D'};
constexpr uint32_t kCfldVersion = 1;

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
    uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(const std::vector<uint8_t>& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) fail("TruncatedPayload", "unexpected end of data");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::vector<uint8_t> save_cfld(const ComplexField& field) {
    field.validate();
    std::vector<uint8_t> out;
    out.reserve(36 + field.data.size() * 16);
    out.insert(out.end(), kCfldMagic, kCfldMagic + 4);
    put<uint32_t>(out, kCfldVersion);
    put<uint32_t>(out, static_cast<uint32_t>(field.width));
    put<uint32_t>(out, static_cast<uint32_t>(field.height));
    put<double>(out, field.params.wavelength_um);
    put<double>(out, field.params.pixel_pitch_um);
    put<double>(out, field.params.refractive_index);
    for (const cplx& v : field.data) {
        put<double>(out, v.real());
        put<double>(out, v.imag());
    }
    return out;
}

ComplexField load_cfld(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCfldMagic, 4) != 0)
        fail("BadMagic", "not a CFLD file");
    size_t pos = 4;
    uint32_t version = get<uint32_t>(bytes, pos);
    if (version != kCfldVersion) fail("SchemaMismatch", "unsupported CFLD version");
    uint32_t w = get<uint32_t>(bytes, pos);
    uint32_t h = get<uint32_t>(bytes, pos);
    OpticalParams p;
    p.wavelength_um = get<double>(bytes, pos);
    p.pixel_pitch_um = get<double>(bytes, pos);
    p.refractive_index = get<double>(bytes, pos);
    if (w < 2 || h < 2) fail("BadDims", "CFLD dimensions must be >= 2");
    size_t count = static_cast<size_t>(w) * h;
    if (bytes.size() - pos < count * 16) fail("TruncatedPayload", "CFLD payload shorter than header claims");
    ComplexField field(static_cast<int>(w), static_cast<int>(h), p);
    for (size_t i = 0; i < count; ++i) {
        double re = get<double>(bytes, pos);
        double im = get<double>(bytes, pos);
        if (!std::isfinite(re) || !std::isfinite(im))
            fail("NonFiniteValue", "CFLD payload contains a non-finite value");
        field.data[i] = cplx(re, im);
    }
    return field;
}

void save_cfld_file(const ComplexField& field, const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = save_cfld(field);
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_runtime("IoError", "cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail_runtime("IoError", "write failed: " + path.string());
}

ComplexField load_cfld_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("IoError", "cannot open: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return load_cfld(bytes);
}

void save_pnm(const RealImage& img, const std::filesystem::path& path) {
    img.validate();
    double mx = 0.0;
    for (double v : img.data) mx = std::max(mx, v);
    const double scale = mx > 0.0 ? 65535.0 / mx : 0.0;
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_runtime("IoError", "cannot open for writing: " + path.string());
    f << (img.channels == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * img.channels * 2);
    for (int y = 0; y < img.height; ++y) {
        size_t o = 0;
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double v = img.at(x, y, c) * scale;
                uint16_t q = static_cast<uint16_t>(std::clamp(std::lround(v), 0l, 65535l));
                row[o++] = static_cast<uint8_t>(q >> 8);  // PNM 16-bit samples are MSB first
                row[o++] = static_cast<uint8_t>(q & 0xff);
            }
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) fail_runtime("IoError", "write failed: " + path.string());
}

RealImage load_pnm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("IoError", "cannot open: " + path.string());
    std::string magic;
    f >> magic;
    int channels;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else fail("BadMagic", "not a binary PGM/PPM file: " + path.string());
    long w = 0, h = 0, maxval = 0;
    // header tokens may be separated by whitespace and '#' comments
    auto next_int = [&f, &path]() {
        long v;
        while (true) {
            f >> std::ws;
            if (f.peek() == '#') {
                std::string line;
                std::getline(f, line);
                continue;
            }
            if (!(f >> v)) fail("TruncatedPayload", "bad PNM header: " + path.string());
            return v;
        }
    };
    w = next_int();
    h = next_int();
    maxval = next_int();
    require(w >= 1 && h >= 1, "BadDims", "bad PNM dimensions");
    require(maxval > 0 && maxval <= 65535, "SchemaMismatch", "unsupported PNM maxval");
    f.get();  // single whitespace after maxval
    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    RealImage img(static_cast<int>(w), static_cast<int>(h), channels);
    std::vector<uint8_t> buf(static_cast<size_t>(w) * h * channels * bytes_per_sample);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() != static_cast<std::streamsize>(buf.size()))
        fail("TruncatedPayload", "PNM payload shorter than header claims: " + path.string());
    for (size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = bytes_per_sample == 2
                          ? static_cast<double>((static_cast<uint16_t>(buf[2 * i]) << 8) | buf[2 * i + 1])
                          : static_cast<double>(buf[i]);
    }
    return img;
}

}  // namespace holo
