#include "lungkit/raster.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lungkit {

namespace fs = std::filesystem;

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double v = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<std::uint8_t>(std::floor(v + 0.5));  // round half up
}

namespace {

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

// Token-based PGM header reader: whitespace-separated fields, '#' comments.
struct PgmCursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    int next_int(const std::string& what) {
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) ++pos;
        if (pos == start)
            throw std::runtime_error("malformed header: expected " + what);
        return std::stoi(std::string(bytes.begin() + start, bytes.begin() + pos));
    }
};

Raster load_pgm(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
    PgmCursor cur{bytes, 2};  // skip "P5"
    const int w = cur.next_int("width");
    const int h = cur.next_int("height");
    const int maxval = cur.next_int("maxval");
    if (w <= 0 || h <= 0)
        throw std::runtime_error("zero-area image: " + path.string());
    if (maxval != 255)
        throw std::runtime_error("bit depth other than 8 (maxval " + std::to_string(maxval) +
                                 "): " + path.string());
    ++cur.pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(w) * h;
    if (bytes.size() < cur.pos + need)
        throw std::runtime_error("malformed header: pixel payload truncated: " + path.string());
    Raster img(w, h);
    std::memcpy(img.data.data(), bytes.data() + cur.pos, need);
    return img;
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

Raster load_png(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
    std::size_t pos = 8;  // signature already checked
    int w = 0, h = 0, depth = 0, color = 0, interlace = 0;
    bool have_ihdr = false;
    std::vector<std::uint8_t> idat;

    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size())
            throw std::runtime_error("malformed header: truncated PNG chunk: " + path.string());
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const std::uint8_t* data = &bytes[pos + 8];
        const std::uint32_t stored_crc = be32(&bytes[pos + 8 + len]);
        const std::uint32_t crc =
            crc32(crc32(0L, &bytes[pos + 4], 4), data, len);
        if (crc != stored_crc)
            throw std::runtime_error("malformed header: PNG chunk CRC mismatch: " + path.string());

        if (std::strncmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("malformed header: bad IHDR: " + path.string());
            w = static_cast<int>(be32(data));
            h = static_cast<int>(be32(data + 4));
            depth = data[8];
            color = data[9];
            interlace = data[12];
            have_ihdr = true;
        } else if (std::strncmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::strncmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }

    if (!have_ihdr) throw std::runtime_error("malformed header: no IHDR: " + path.string());
    if (w <= 0 || h <= 0) throw std::runtime_error("zero-area image: " + path.string());
    if (depth != 8)
        throw std::runtime_error("bit depth other than 8 (depth " + std::to_string(depth) +
                                 "): " + path.string());
    int channels = 0;
    switch (color) {
        case 0: channels = 1; break;  // gray
        case 2: channels = 3; break;  // RGB
        case 4: channels = 2; break;  // gray + alpha
        case 6: channels = 4; break;  // RGBA
        default:
            throw std::runtime_error("malformed header: unsupported PNG color type " +
                                     std::to_string(color) + ": " + path.string());
    }
    if (interlace != 0)
        throw std::runtime_error("malformed header: interlaced PNG not supported: " + path.string());

    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    std::vector<std::uint8_t> raw((stride + 1) * h);
    uLongf out_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        out_len != raw.size())
        throw std::runtime_error("malformed header: PNG inflate failed: " + path.string());

    // Undo per-row filters in place.
    std::vector<std::uint8_t> prev(stride, 0);
    Raster img(w, h);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * y];
        std::uint8_t* row = &raw[(stride + 1) * y + 1];
        if (filter > 4)
            throw std::runtime_error("malformed header: bad PNG filter: " + path.string());
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= static_cast<std::size_t>(channels) ? row[i - channels] : 0;
            const int up = prev[i];
            const int ul = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
            int add = 0;
            switch (filter) {
                case 1: add = left; break;
                case 2: add = up; break;
                case 3: add = (left + up) / 2; break;
                case 4: add = paeth(left, up, ul); break;
                default: break;
            }
            row[i] = static_cast<std::uint8_t>((row[i] + add) & 0xff);
        }
        std::copy(row, row + stride, prev.begin());

        for (int x = 0; x < w; ++x) {
            const std::uint8_t* px = row + static_cast<std::size_t>(x) * channels;
            std::uint8_t v = 0;
            switch (channels) {
                case 1: v = px[0]; break;
                case 2: v = px[0]; break;  // gray, ignore alpha
                case 3: v = luma(px[0], px[1], px[2]); break;
                case 4: v = luma(px[0], px[1], px[2]); break;
            }
            img.at(x, y) = v;
        }
    }
    return img;
}

const std::uint8_t kPngSig[8] = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a};

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm" || ext == ".png";
}

}  // namespace

Raster load_image(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
        return load_pgm(bytes, path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
        return load_png(bytes, path);
    throw std::runtime_error("malformed header: not a P5 PGM or PNG file: " + path.string());
}

void save_image(const Raster& img, const fs::path& path) {
    if (img.width <= 0 || img.height <= 0 ||
        img.data.size() != static_cast<std::size_t>(img.width) * img.height)
        throw std::runtime_error("invalid raster dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
}

void save_image(const BinaryMask& mask, const fs::path& path) {
    Raster img(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) img.data[i] = mask.bits[i] ? 255 : 0;
    save_image(img, path);
}

namespace {

DatasetManifest manifest_from_csv(const fs::path& csv) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("missing file: " + csv.string());
    DatasetManifest m;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset: " + csv.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "path,label")
        throw std::runtime_error("malformed header: expected `path,label`, got `" + line + "`");
    const fs::path base = csv.parent_path();
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw std::runtime_error("malformed row (no comma): " + line);
        const std::string p = line.substr(0, comma);
        const std::string tok = line.substr(comma + 1);
        int label;
        if (tok == "0") label = 0;
        else if (tok == "1") label = 1;
        else throw std::runtime_error("unknown label token: " + tok);
        fs::path full = fs::path(p).is_absolute() ? fs::path(p) : base / p;
        m.entries.push_back({full.generic_string(), label});
    }
    return m;
}

DatasetManifest manifest_from_directory(const fs::path& root) {
    DatasetManifest m;
    const std::pair<const char*, int> classes[] = {{"cancerous", 1}, {"normal", 0}};
    for (const auto& [sub, label] : classes) {
        const fs::path dir = root / sub;
        if (!fs::is_directory(dir)) continue;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && has_image_extension(e.path()))
                m.entries.push_back({e.path().generic_string(), label});
        }
    }
    return m;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& root) {
    DatasetManifest m;
    if (fs::is_directory(root)) {
        m = manifest_from_directory(root);
    } else if (fs::exists(root)) {
        m = manifest_from_csv(root);
    } else {
        throw std::runtime_error("missing file: " + root.string());
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    std::set<std::string> seen;
    for (const auto& e : m.entries) {
        if (!seen.insert(e.path).second)
            throw std::runtime_error("duplicate path: " + e.path);
        (e.label ? m.count_positive : m.count_negative)++;
    }
    if (m.entries.empty()) throw std::runtime_error("empty dataset: " + root.string());
    return m;
}

}  // namespace lungkit
