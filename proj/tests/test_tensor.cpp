#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>

#include "rnsde/rng.hpp"
#include "rnsde/tensor.hpp"

using namespace rnsde;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("shape accounting and accessors") {
    Tensor t({2, 3}, 1.5f);
    CHECK(t.size() == 6);
    t.at(1, 2) = 7.0f;
    CHECK(t[5] == 7.0f);
    CHECK(t.all_finite());
    t[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("tensor container round trip") {
    const std::string path = (fs::temp_directory_path() / "rnsde_t.rnt").string();
    Rng rng(1);
    Tensor t({3, 5, 7});
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    save_tensor(path, t);
    Tensor back = load_tensor(path);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
    fs::remove(path);
}

TEST_CASE("param store round trip with metadata") {
    const std::string path = (fs::temp_directory_path() / "rnsde_p.rnt").string();
    ParamStore store;
    store.add("a.w", Tensor({2, 2}, 0.25f));
    store.add("b", Tensor({3}, -1.0f));
    save_params(path, store, {{"kind", "test"}, {"n", "3"}});

    ParamStore loaded;
    std::map<std::string, std::string> meta;
    load_params(path, loaded, &meta);
    CHECK(meta.at("kind") == "test");
    CHECK(loaded.entry("a.w").value.data == store.entry("a.w").value.data);
    CHECK(loaded.entry("b").value.shape == std::vector<int>{3});
    fs::remove(path);
}

TEST_CASE("identical files hash identically, different files differently") {
    const auto p1 = (fs::temp_directory_path() / "rnsde_h1.bin").string();
    const auto p2 = (fs::temp_directory_path() / "rnsde_h2.bin").string();
    std::ofstream(p1) << "same bytes";
    std::ofstream(p2) << "same bytes";
    CHECK(fnv1a_file(p1) == fnv1a_file(p2));
    std::ofstream(p2) << "other bytes";
    CHECK(fnv1a_file(p1) != fnv1a_file(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("png export produces a signed png file") {
    const auto path = (fs::temp_directory_path() / "rnsde_img.png").string();
    Tensor img({16, 16});
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) img.at(i, j) = static_cast<float>(i + j) / 30.0f;
    export_png(path, img);
    std::ifstream in(path, std::ios::binary);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    CHECK(sig[0] == 0x89);
    CHECK(sig[1] == 'P');
    CHECK(sig[2] == 'N');
    CHECK(sig[3] == 'G');
    fs::remove(path);
}

TEST_CASE("rng streams are reproducible and forkable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
    Rng c(42);
    Rng f1 = c.fork(1);
    Rng c2(42);
    Rng f2 = c2.fork(1);
    CHECK(f1.normal() == f2.normal());
    CHECK(f1.normal() != Rng(42).normal());  // forked stream differs from parent's
}

TEST_SUITE_END();
