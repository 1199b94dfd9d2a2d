#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tcjepa/checkpoint.hpp"
#include "tcjepa/rng.hpp"

using namespace tcjepa;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const char* name) {
    return (fs::temp_directory_path() / name).string();
}

std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const std::vector<unsigned char>& b) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

ckpt::Store sample_store() {
    ckpt::Store s;
    Rng rng(3);
    Tensor<float> w({4, 3});
    for (auto& v : w.data) v = float(rng.uniform(-1, 1));
    Tensor<double> d({2, 2}, {1.5, -2.5, 0.0, 1e-30});
    ckpt::put_tensor(s, "model.w", w);
    ckpt::put_tensor(s, "model.d", d);
    ckpt::put_vector<double>(s, "opt.m", {0.1, 0.2, 0.3});
    ckpt::put_u64(s, "meta.step", 4711);
    return s;
}

}  // namespace

TEST_CASE("round trip preserves values bit-exactly") {
    std::string path = tmp_path("tcjepa_ckpt_rt.bin");
    ckpt::Store s = sample_store();
    ckpt::save(path, s);
    ckpt::Store l = ckpt::load(path);
    CHECK(l.size() == s.size());

    Tensor<float> w({4, 3});
    ckpt::load_tensor(l, "model.w", w);
    Tensor<float> orig({4, 3});
    ckpt::load_tensor(s, "model.w", orig);
    CHECK(w.data == orig.data);

    Tensor<double> d({2, 2});
    ckpt::load_tensor(l, "model.d", d);
    CHECK(d.data == std::vector<double>{1.5, -2.5, 0.0, 1e-30});
    CHECK(ckpt::get_vector<double>(l, "opt.m") == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(ckpt::get_u64(l, "meta.step") == 4711);
    fs::remove(path);
}

TEST_CASE("save -> load -> save is byte-identical") {
    std::string p1 = tmp_path("tcjepa_ckpt_a.bin");
    std::string p2 = tmp_path("tcjepa_ckpt_b.bin");
    ckpt::save(p1, sample_store());
    ckpt::save(p2, ckpt::load(p1));
    CHECK(read_all(p1) == read_all(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("corruption anywhere is detected by the trailing CRC") {
    std::string path = tmp_path("tcjepa_ckpt_crc.bin");
    ckpt::save(path, sample_store());
    auto bytes = read_all(path);
    // flip one bit in several regions: magic, directory, payload
    for (size_t pos : {size_t(1), bytes.size() / 2, bytes.size() - 8}) {
        auto bad = bytes;
        bad[pos] ^= 0x10;
        write_all(path, bad);
        CHECK_THROWS_AS(ckpt::load(path), CheckpointError);
    }
    // flipping the stored CRC itself is also a mismatch
    auto bad = bytes;
    bad[bytes.size() - 1] ^= 0xff;
    write_all(path, bad);
    CHECK_THROWS_AS(ckpt::load(path), CheckpointError);
    fs::remove(path);
}

TEST_CASE("truncated files are rejected") {
    std::string path = tmp_path("tcjepa_ckpt_trunc.bin");
    ckpt::save(path, sample_store());
    auto bytes = read_all(path);
    for (size_t keep : {size_t(0), size_t(3), size_t(11), bytes.size() / 2}) {
        auto cut = bytes;
        cut.resize(keep);
        write_all(path, cut);
        CHECK_THROWS_AS(ckpt::load(path), CheckpointError);
    }
    fs::remove(path);
}

TEST_CASE("lookup errors: missing entry, dtype mismatch, shape mismatch") {
    ckpt::Store s = sample_store();
    Tensor<float> w({4, 3});
    CHECK_THROWS_AS(ckpt::load_tensor(s, "nope", w), CheckpointError);
    Tensor<double> wrong_type({4, 3});
    CHECK_THROWS_AS(ckpt::load_tensor(s, "model.w", wrong_type), CheckpointError);
    Tensor<float> wrong_shape({2, 2});
    CHECK_THROWS_AS(ckpt::load_tensor(s, "model.w", wrong_shape), CheckpointError);
    CHECK_THROWS_AS(ckpt::get_u64(s, "opt.m"), CheckpointError);  // not a scalar
    CHECK_THROWS_AS(ckpt::load("/nonexistent/dir/x.bin"), CheckpointError);
}

TEST_CASE("empty store round trips") {
    std::string path = tmp_path("tcjepa_ckpt_empty.bin");
    ckpt::save(path, {});
    CHECK(ckpt::load(path).empty());
    fs::remove(path);
}
