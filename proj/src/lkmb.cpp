#include "lungkit/lkmb.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lungkit {

static_assert(std::endian::native == std::endian::little,
              "bundle I/O writes raw memory and assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'L', 'K', 'M', 'B'};

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32" || dtype == "i32") return 4;
    if (dtype == "f64") return 8;
    throw std::runtime_error("bundle: unknown dtype \"" + dtype + "\"");
}

template <typename T>
void append_raw(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

}  // namespace

void LkmbWriter::add_blob(const std::string& name, const std::string& dtype,
                          const std::vector<int>& shape, const void* data, std::size_t bytes) {
    std::size_t count = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("bundle: negative dimension");
        count *= static_cast<std::size_t>(d);
    }
    if (count * dtype_size(dtype) != bytes)
        throw std::invalid_argument("bundle: blob size does not match its shape");
    for (const Entry& e : entries_)
        if (e.name == name) throw std::invalid_argument("bundle: duplicate blob name \"" + name + "\"");
    entries_.push_back({name, dtype, shape});
    const char* p = static_cast<const char*>(data);
    blobs_.emplace_back(p, p + bytes);
}

void LkmbWriter::write(const std::string& path) const {
    nlohmann::ordered_json header = meta;
    nlohmann::ordered_json index = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const Entry& e = entries_[i];
        nlohmann::ordered_json rec;
        rec["name"] = e.name;
        rec["dtype"] = e.dtype;
        rec["shape"] = e.shape;
        rec["offset"] = offset;
        rec["length"] = static_cast<std::uint64_t>(blobs_[i].size());
        index.push_back(std::move(rec));
        offset += blobs_[i].size();
    }
    header["tensors"] = std::move(index);
    const std::string header_text = header.dump();

    std::string out;
    out.append(kMagic, 4);
    append_raw<std::uint32_t>(out, kLkmbVersion);
    append_raw<std::uint64_t>(out, static_cast<std::uint64_t>(header_text.size()));
    out += header_text;
    for (const auto& blob : blobs_) out.append(blob.data(), blob.size());

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("bundle: cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("bundle: write failed: " + path);
}

std::size_t LkmbBlobView::element_count() const {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    return count;
}

std::vector<float> LkmbBlobView::as_f32() const {
    if (dtype != "f32") throw std::runtime_error("bundle: blob is not f32");
    std::vector<float> out(element_count());
    std::memcpy(out.data(), data, bytes);
    return out;
}

std::vector<double> LkmbBlobView::as_f64() const {
    if (dtype != "f64") throw std::runtime_error("bundle: blob is not f64");
    std::vector<double> out(element_count());
    std::memcpy(out.data(), data, bytes);
    return out;
}

std::vector<std::int32_t> LkmbBlobView::as_i32() const {
    if (dtype != "i32") throw std::runtime_error("bundle: blob is not i32");
    std::vector<std::int32_t> out(element_count());
    std::memcpy(out.data(), data, bytes);
    return out;
}

bool LkmbBundle::has_blob(const std::string& name) const {
    for (const auto& rec : header.at("tensors"))
        if (rec.at("name").get<std::string>() == name) return true;
    return false;
}

LkmbBlobView LkmbBundle::blob(const std::string& name) const {
    for (const auto& rec : header.at("tensors")) {
        if (rec.at("name").get<std::string>() != name) continue;
        LkmbBlobView v;
        v.dtype = rec.at("dtype").get<std::string>();
        v.shape = rec.at("shape").get<std::vector<int>>();
        const auto offset = rec.at("offset").get<std::uint64_t>();
        const auto length = rec.at("length").get<std::uint64_t>();
        if (offset + length > payload_.size())
            throw std::runtime_error("truncated payload");
        if (v.element_count() * dtype_size(v.dtype) != length)
            throw std::runtime_error("shape table inconsistent with blob length");
        v.data = payload_.data() + offset;
        v.bytes = static_cast<std::size_t>(length);
        return v;
    }
    throw std::runtime_error("bundle: no blob named \"" + name + "\"");
}

std::vector<std::string> LkmbBundle::blob_names() const {
    std::vector<std::string> out;
    for (const auto& rec : header.at("tensors")) out.push_back(rec.at("name").get<std::string>());
    return out;
}

LkmbBundle read_lkmb(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("bundle: missing file: " + path);
    std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 4) != 0)
        throw std::runtime_error("magic mismatch");
    std::uint32_t version = 0;
    std::memcpy(&version, raw.data() + 4, 4);
    if (version != kLkmbVersion)
        throw std::runtime_error("version unsupported: " + std::to_string(version));
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, raw.data() + 8, 8);
    if (16 + header_len > raw.size()) throw std::runtime_error("truncated payload");

    LkmbBundle bundle;
    bundle.header = nlohmann::ordered_json::parse(
        raw.data() + 16, raw.data() + 16 + header_len, nullptr, true);
    if (!bundle.header.contains("tensors") || !bundle.header["tensors"].is_array())
        throw std::runtime_error("bundle: header lacks a tensor index");
    bundle.payload_.assign(raw.begin() + 16 + static_cast<std::ptrdiff_t>(header_len), raw.end());

    // validate the whole index up front so corrupt files fail on load
    std::uint64_t end = 0;
    for (const auto& rec : bundle.header["tensors"]) {
        const auto offset = rec.at("offset").get<std::uint64_t>();
        const auto length = rec.at("length").get<std::uint64_t>();
        std::size_t count = 1;
        for (int d : rec.at("shape").get<std::vector<int>>()) count *= static_cast<std::size_t>(d);
        if (count * dtype_size(rec.at("dtype").get<std::string>()) != length)
            throw std::runtime_error("shape table inconsistent with blob length");
        if (offset + length > bundle.payload_.size()) throw std::runtime_error("truncated payload");
        end = std::max(end, offset + length);
    }
    return bundle;
}

}  // namespace lungkit
