#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "curvematch/curve_io.hpp"
#include "curvematch/field_io.hpp"

using namespace curvematch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("curvematch_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void put(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

} // namespace

TEST_CASE("vector CSV round-trips exactly") {
    TempDir tmp;
    VectorList vecs = {{0.1, -0.2},
                       {1.0 / 3.0, 2.0 * M_PI},
                       {-1.2345678901234567e-8, 9.876543210987654e12},
                       {0.0, -0.0}};
    const std::string path = tmp.file("v.csv");
    write_vectors(vecs, path);
    const VectorList back = read_vectors(path);
    REQUIRE(back.size() == vecs.size());
    for (size_t i = 0; i < vecs.size(); ++i) {
        CHECK(back[i].x == vecs[i].x);
        CHECK(back[i].y == vecs[i].y);
    }
}

TEST_CASE("curve CSV round-trips exactly and validates") {
    TempDir tmp;
    ParticleCurve curve;
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss(3.0, 0.7);
    for (int i = 0; i < 50; ++i) curve.points.push_back({gauss(rng), gauss(rng)});
    const std::string path = tmp.file("c.csv");
    write_curve(curve, path);
    const ParticleCurve back = read_curve(path);
    REQUIRE(back.size() == curve.size());
    for (size_t i = 0; i < curve.size(); ++i)
        CHECK(norm_inf(back[i] - curve[i]) == 0.0);

    const std::string head = [&] {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        return line;
    }();
    CHECK(head == "x,y");
}

TEST_CASE("parse errors carry the path and line number") {
    TempDir tmp;

    SECTION("missing file") {
        CHECK_THROWS_WITH(read_curve(tmp.file("absent.csv")),
                          Catch::Matchers::ContainsSubstring("absent.csv"));
    }
    SECTION("bad header") {
        put(tmp.file("h.csv"), "a,b\n1,2\n");
        CHECK_THROWS_WITH(read_vectors(tmp.file("h.csv")),
                          Catch::Matchers::ContainsSubstring(":1:"));
    }
    SECTION("empty file") {
        put(tmp.file("e.csv"), "");
        CHECK_THROWS_AS(read_vectors(tmp.file("e.csv")), ParseError);
    }
    SECTION("malformed row") {
        put(tmp.file("m.csv"), "x,y\n1.0,2.0\nnope\n");
        CHECK_THROWS_WITH(read_vectors(tmp.file("m.csv")),
                          Catch::Matchers::ContainsSubstring(":3:"));
    }
    SECTION("trailing junk on a row") {
        put(tmp.file("j.csv"), "x,y\n1.0,2.0junk\n");
        CHECK_THROWS_WITH(read_vectors(tmp.file("j.csv")),
                          Catch::Matchers::ContainsSubstring(":2:"));
    }
    SECTION("non-finite value") {
        put(tmp.file("n.csv"), "x,y\nnan,2.0\n");
        CHECK_THROWS_WITH(read_vectors(tmp.file("n.csv")),
                          Catch::Matchers::ContainsSubstring("non-finite"));
    }
    SECTION("curve with too few points") {
        put(tmp.file("few.csv"), "x,y\n1.0,2.0\n3.0,4.0\n");
        CHECK_THROWS_WITH(read_curve(tmp.file("few.csv")),
                          Catch::Matchers::ContainsSubstring("at least 3"));
    }
}

TEST_CASE("CRLF line endings and blank lines are tolerated") {
    TempDir tmp;
    put(tmp.file("crlf.csv"), "x,y\r\n1.5,2.5\r\n\r\n3.5,4.5\r\n");
    const VectorList v = read_vectors(tmp.file("crlf.csv"));
    REQUIRE(v.size() == 2);
    CHECK(v[0].x == 1.5);
    CHECK(v[1].y == 4.5);
}

TEST_CASE("atomic writes never leave a temp file behind") {
    TempDir tmp;
    const std::string path = tmp.file("out.csv");
    write_vectors({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}}, path);
    CHECK(fs::exists(path));
    size_t entries = 0;
    for (const auto& entry : fs::directory_iterator(tmp.path)) {
        (void)entry;
        ++entries;
    }
    CHECK(entries == 1);
}

TEST_CASE("field files round-trip bitwise") {
    TempDir tmp;
    const MeshConfig cfg(16, 12, 2.0 * M_PI, 3.0);
    MeshField f(cfg);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int j = 0; j < cfg.my; ++j)
        for (int i = 0; i < cfg.mx; ++i)
            f.set(i, j, {gauss(rng), gauss(rng)});

    const std::string path = tmp.file("u.field");
    write_field(f, path);
    const MeshField back = read_field(path);
    REQUIRE(back.config() == cfg);
    for (int j = 0; j < cfg.my; ++j)
        for (int i = 0; i < cfg.mx; ++i)
            CHECK(norm_inf(back.at(i, j) - f.at(i, j)) == 0.0);
}

TEST_CASE("field reader rejects foreign and truncated files") {
    TempDir tmp;
    put(tmp.file("bad.field"), "something-else 4 4 1 1\n");
    CHECK_THROWS_WITH(read_field(tmp.file("bad.field")),
                      Catch::Matchers::ContainsSubstring("not a curvematch field"));

    const MeshConfig cfg = MeshConfig::square(8, 1.0);
    write_field(MeshField(cfg), tmp.file("ok.field"));
    // Chop the last bytes off a valid file.
    const auto size = fs::file_size(tmp.file("ok.field"));
    fs::resize_file(tmp.file("ok.field"), size - 16);
    CHECK_THROWS_WITH(read_field(tmp.file("ok.field")),
                      Catch::Matchers::ContainsSubstring("truncated"));
}
