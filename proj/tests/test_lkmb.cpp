#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <vector>

#include "lungkit/lkmb.hpp"
#include "support/tmpdir.hpp"

using namespace lungkit;
using testsupport::TempDir;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("bundle round-trips blobs of every dtype") {
    TempDir dir("lkmb");
    const std::vector<float> f{1.5f, -2.25f, 3.75f, 0.f, 42.f, -0.5f};
    const std::vector<double> d{1.0, -2.5, 1e-300};
    const std::vector<std::int32_t> i{-7, 0, 2000000000};

    LkmbWriter w;
    w.meta["model"] = "demo";
    w.meta["nested"] = {{"k", 5}};
    w.add_blob("weights", "f32", {2, 3}, f.data(), f.size() * sizeof(float));
    w.add_blob("values", "f64", {3}, d.data(), d.size() * sizeof(double));
    w.add_blob("ids", "i32", {3, 1}, i.data(), i.size() * sizeof(std::int32_t));
    w.write((dir / "a.lkmb").string());

    const LkmbBundle b = read_lkmb((dir / "a.lkmb").string());
    CHECK(b.header.at("model") == "demo");
    CHECK(b.header.at("nested").at("k") == 5);
    CHECK(b.blob_names() == std::vector<std::string>{"weights", "values", "ids"});
    CHECK(b.has_blob("weights"));
    CHECK(!b.has_blob("missing"));

    const LkmbBlobView wv = b.blob("weights");
    CHECK(wv.dtype == "f32");
    CHECK(wv.shape == std::vector<int>{2, 3});
    CHECK(wv.element_count() == 6);
    CHECK(wv.as_f32() == f);
    CHECK(b.blob("values").as_f64() == d);
    CHECK(b.blob("ids").as_i32() == i);
    CHECK_THROWS_AS(b.blob("missing"), std::runtime_error);
}

TEST_CASE("file layout: magic, version, header length, then blobs") {
    TempDir dir("layout");
    const float v = 1.0f;
    LkmbWriter w;
    w.meta["model"] = "x";
    w.add_blob("t", "f32", {1}, &v, sizeof v);
    w.write((dir / "l.lkmb").string());

    const auto bytes = slurp(dir / "l.lkmb");
    REQUIRE(bytes.size() > 16);
    CHECK(std::memcmp(bytes.data(), "LKMB", 4) == 0);
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 4, 4);
    CHECK(version == 1);
    std::uint64_t hlen;
    std::memcpy(&hlen, bytes.data() + 8, 8);
    CHECK(16 + hlen + sizeof v == bytes.size());

    // header parses as JSON with meta keys before the tensor index
    const std::string header(bytes.data() + 16, static_cast<std::size_t>(hlen));
    const auto j = nlohmann::ordered_json::parse(header);
    CHECK(j.begin().key() == "model");
    REQUIRE(j.contains("tensors"));
    CHECK(j["tensors"][0]["name"] == "t");
    CHECK(j["tensors"][0]["dtype"] == "f32");
    CHECK(j["tensors"][0]["offset"] == 0);
    CHECK(j["tensors"][0]["length"] == 4);
}

TEST_CASE("writing twice produces identical bytes") {
    TempDir dir("det");
    const std::vector<double> d{3.14159, -2.71828};
    for (const char* name : {"p.lkmb", "q.lkmb"}) {
        LkmbWriter w;
        w.meta["model"] = "same";
        w.add_blob("d", "f64", {2}, d.data(), d.size() * sizeof(double));
        w.write((dir / name).string());
    }
    CHECK(slurp(dir / "p.lkmb") == slurp(dir / "q.lkmb"));
}

TEST_CASE("writer validates shapes and duplicate names") {
    const float v[2] = {1, 2};
    LkmbWriter w;
    CHECK_THROWS_AS(w.add_blob("bad", "f32", {3}, v, sizeof v), std::invalid_argument);
    w.add_blob("a", "f32", {2}, v, sizeof v);
    CHECK_THROWS_AS(w.add_blob("a", "f32", {2}, v, sizeof v), std::invalid_argument);
}

TEST_CASE("reader rejects corrupted files") {
    TempDir dir("bad");
    const float v = 2.0f;
    LkmbWriter w;
    w.meta["model"] = "x";
    w.add_blob("t", "f32", {1}, &v, sizeof v);
    w.write((dir / "ok.lkmb").string());
    const auto good = slurp(dir / "ok.lkmb");

    auto bad = good;
    bad[0] = 'X';
    spit(dir / "magic.lkmb", bad);
    CHECK_THROWS_WITH_AS(read_lkmb((dir / "magic.lkmb").string()),
                         doctest::Contains("magic mismatch"), std::runtime_error);

    bad = good;
    bad[4] = 9;  // version field
    spit(dir / "ver.lkmb", bad);
    CHECK_THROWS_WITH_AS(read_lkmb((dir / "ver.lkmb").string()),
                         doctest::Contains("version unsupported"), std::runtime_error);

    bad = good;
    bad.pop_back();
    spit(dir / "trunc.lkmb", bad);
    CHECK_THROWS_WITH_AS(read_lkmb((dir / "trunc.lkmb").string()),
                         doctest::Contains("truncated"), std::runtime_error);

    CHECK_THROWS_AS(read_lkmb((dir / "absent.lkmb").string()), std::runtime_error);
}

TEST_CASE("reader rejects an index that disagrees with the payload") {
    TempDir dir("shape");
    const auto make_file = [&](const std::vector<int>& shape) {
        const float v[2] = {1, 2};
        LkmbWriter w;
        w.meta["model"] = "x";
        w.add_blob("t", "f32", {2}, v, sizeof v);
        w.write((dir / "f.lkmb").string());
        // rewrite the header with a lying shape but the same payload
        auto bytes = slurp(dir / "f.lkmb");
        std::uint64_t hlen;
        std::memcpy(&hlen, bytes.data() + 8, 8);
        auto j = nlohmann::ordered_json::parse(
            std::string(bytes.data() + 16, static_cast<std::size_t>(hlen)));
        j["tensors"][0]["shape"] = shape;
        const std::string edited = j.dump();
        std::vector<char> out(bytes.begin(), bytes.begin() + 8);
        std::uint64_t new_len = edited.size();
        out.resize(16);
        std::memcpy(out.data() + 8, &new_len, 8);
        out.insert(out.end(), edited.begin(), edited.end());
        out.insert(out.end(), bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen), bytes.end());
        spit(dir / "f.lkmb", out);
    };
    make_file({3});
    CHECK_THROWS_WITH_AS(read_lkmb((dir / "f.lkmb").string()),
                         doctest::Contains("shape table inconsistent"), std::runtime_error);
}
