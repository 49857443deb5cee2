#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lungkit {

// Model bundle container: "LKMB" magic, u32 format version, u64 header
// length, UTF-8 JSON header, then concatenated raw little-endian blobs.
// The header's "tensors" array maps each name to dtype, shape, and its
// byte offset/length inside the blob section.

inline constexpr std::uint32_t kLkmbVersion = 1;

class LkmbWriter {
   public:
    /// Header fields other than "tensors"; insertion order is preserved
    /// in the written file.
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();

    void add_blob(const std::string& name, const std::string& dtype,
                  const std::vector<int>& shape, const void* data, std::size_t bytes);
    void write(const std::string& path) const;

   private:
    struct Entry {
        std::string name, dtype;
        std::vector<int> shape;
    };
    std::vector<Entry> entries_;
    std::vector<std::vector<char>> blobs_;
};

struct LkmbBlobView {
    std::string dtype;
    std::vector<int> shape;
    const char* data = nullptr;
    std::size_t bytes = 0;

    std::size_t element_count() const;
    std::vector<float> as_f32() const;
    std::vector<double> as_f64() const;
    std::vector<std::int32_t> as_i32() const;
};

class LkmbBundle {
   public:
    nlohmann::ordered_json header;

    bool has_blob(const std::string& name) const;
    LkmbBlobView blob(const std::string& name) const;  // throws if absent
    std::vector<std::string> blob_names() const;       // file order

   private:
    friend LkmbBundle read_lkmb(const std::string& path);
    std::vector<char> payload_;
};

LkmbBundle read_lkmb(const std::string& path);

}  // namespace lungkit
