#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "tomo/error.hpp"
#include "tomo/io.hpp"

using namespace tomo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("tomo_io_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void dump(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

LabeledArray random_array(std::vector<std::string> labels, std::vector<std::size_t> shape, std::uint64_t seed) {
    LabeledArray a(ArraySpec(std::move(labels), std::move(shape)));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1e3);
    for (double& v : a.values()) v = n(rng);
    return a;
}

bool bitwise_equal(const LabeledArray& a, const LabeledArray& b) {
    return a.labels() == b.labels() && a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

AcquisitionGeometry sample_geometry() {
    ParallelPlacement p;
    p.rotation_axis_position = Vec3{0.1234567890123, -1.0 / 3.0, 0.0};
    return make_parallel_geometry(3, Panel{{5, 4}, {0.1, 0.7}, PanelOrigin::top_right},
                                  AngleList{golden_angles(3), AngleUnit::degree}, p);
}

}  // namespace

TEST_CASE("native container") {
    const auto dir = scratch("native");
    SUBCASE("round trip without geometry") {
        const auto a = random_array({"x", "y", "z"}, {3, 4, 5}, 1);
        write_native(a, dir / "a.bin");
        const auto b = read_native(dir / "a.bin");
        CHECK(bitwise_equal(a, b));
        CHECK_FALSE(b.geometry().has_value());
    }
    SUBCASE("round trip with geometry") {
        const auto ag = sample_geometry();
        LabeledArray a{Geometry(ag)};
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (double& v : a.values()) v = u(rng);
        a[0] = -0.0;
        a[1] = std::numeric_limits<double>::denorm_min();
        a[2] = std::numeric_limits<double>::infinity();
        write_native(a, dir / "g.bin");
        const auto b = read_native(dir / "g.bin");
        CHECK(bitwise_equal(a, b));
        REQUIRE(b.geometry().has_value());
        CHECK(std::get<AcquisitionGeometry>(*b.geometry()) == ag);

        const auto ig = make_image_geometry(3, 2, 4, 0.3);
        LabeledArray c{Geometry(ig), 2.5};
        write_native(c, dir / "i.bin");
        CHECK(std::get<ImageGeometry>(*read_native(dir / "i.bin").geometry()) == ig);
    }
    SUBCASE("layout") {
        const auto a = random_array({"x"}, {2}, 3);
        write_native(a, dir / "l.bin");
        const auto bytes = slurp(dir / "l.bin");
        std::uint64_t hlen = 0;
        for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
        CHECK(bytes.size() == 8 + hlen + 16);
        const std::string header = bytes.substr(8, hlen);
        CHECK(header.find("\"dtype\":\"f64\"") != std::string::npos);
        CHECK(header.find("\"byte_order\":\"little\"") != std::string::npos);
        CHECK(header.find("\"geometry\":null") != std::string::npos);
        double first = 0.0;
        std::memcpy(&first, bytes.data() + 8 + hlen, 8);
        CHECK(first == a[0]);
    }
    SUBCASE("corrupt files are rejected") {
        const auto a = random_array({"x", "y"}, {4, 4}, 4);
        write_native(a, dir / "c.bin");
        const auto good = slurp(dir / "c.bin");
        auto replace = [&](const std::string& from, const std::string& to) {
            std::string s = good;
            const auto at = s.find(from);
            REQUIRE(at != std::string::npos);
            s.replace(at, from.size(), to);
            return s;
        };
        dump(dir / "bo.bin", replace("\"little\"", "\"bigend\""));
        CHECK_THROWS_AS(read_native(dir / "bo.bin"), IoError);
        dump(dir / "dt.bin", replace("\"f64\"", "\"f32\""));
        CHECK_THROWS_AS(read_native(dir / "dt.bin"), IoError);
        dump(dir / "sv.bin", replace("\"schema_version\":1", "\"schema_version\":7"));
        CHECK_THROWS_AS(read_native(dir / "sv.bin"), IoError);
        dump(dir / "tr.bin", good.substr(0, good.size() - 3));
        CHECK_THROWS_AS(read_native(dir / "tr.bin"), IoError);
        dump(dir / "extra.bin", good + "x");
        CHECK_THROWS_AS(read_native(dir / "extra.bin"), IoError);
        std::string flipped = good;
        flipped[flipped.size() - 1] ^= 0x01;
        dump(dir / "crc.bin", flipped);
        CHECK_THROWS_AS(read_native(dir / "crc.bin"), IoError);
        dump(dir / "short.bin", "abc");
        CHECK_THROWS_AS(read_native(dir / "short.bin"), IoError);
        CHECK_THROWS_AS(read_native(dir / "missing.bin"), IoError);
    }
    SUBCASE("writes are deterministic") {
        const auto a = random_array({"x", "y"}, {6, 3}, 5);
        write_native(a, dir / "d1.bin");
        write_native(a, dir / "d2.bin");
        CHECK(slurp(dir / "d1.bin") == slurp(dir / "d2.bin"));
    }
}

TEST_CASE("geometry JSON") {
    const auto ag = sample_geometry();
    const auto text = geometry_to_json(ag, 2);
    CHECK(std::get<AcquisitionGeometry>(geometry_from_json(text)) == ag);
    CHECK_THROWS_AS(geometry_from_json("{\"type\":\"weird\"}"), GeometryError);
    CHECK_THROWS_AS(geometry_from_json("not json"), GeometryError);
}

TEST_CASE("TIFF stacks") {
    const auto dir = scratch("tiff");
    SUBCASE("naming and round trip") {
        auto a = random_array({"angle", "vertical", "horizontal"}, {4, 8, 8}, 6);
        const auto files = write_tiff_stack(a, dir / "s", "angle");
        REQUIRE(files.size() == 4);
        CHECK(files[0].filename() == "slice_0000.tiff");
        CHECK(files[3].filename() == "slice_0003.tiff");
        const auto b = read_tiff_stack(dir / "s", {"angle", "vertical", "horizontal"});
        CHECK(b.shape() == a.shape());
        for (std::size_t i = 0; i < a.size(); ++i) {
            // Oracle: float32 rounding is at most half an ulp of the value.
            const float f = static_cast<float>(a[i]);
            CHECK(b[i] == static_cast<double>(f));
            CHECK(std::abs(b[i] - a[i]) <= std::abs(a[i]) * 0x1p-24);
        }
    }
    SUBCASE("stacking over an inner axis") {
        auto a = random_array({"vertical", "angle", "horizontal"}, {3, 5, 2}, 7);
        write_tiff_stack(a, dir / "inner", "angle", "proj");
        const auto b = read_tiff_stack(dir / "inner" / "proj_*.tiff", {"angle", "vertical", "horizontal"});
        CHECK(b.shape() == std::vector<std::size_t>{5, 3, 2});
        CHECK(b.at({4, 2, 1}) == static_cast<double>(static_cast<float>(a.at({2, 4, 1}))));
    }
    SUBCASE("numeric ordering beats lexical ordering") {
        auto a = random_array({"angle", "vertical", "horizontal"}, {12, 2, 3}, 8);
        write_tiff_stack(a, dir / "order", "angle");
        // Rename to unpadded indices so lexical order would put 10 before 2.
        for (std::size_t i = 0; i < 12; ++i) {
            char from[32];
            std::snprintf(from, sizeof from, "slice_%04zu.tiff", i);
            fs::rename(dir / "order" / from, dir / "order" / ("p" + std::to_string(i) + ".tif"));
        }
        const auto b = read_tiff_stack(dir / "order", {"angle", "vertical", "horizontal"});
        for (std::size_t k = 0; k < 12; ++k) CHECK(b.at({k, 1, 2}) == static_cast<double>(static_cast<float>(a.at({k, 1, 2}))));
    }
    SUBCASE("186 golden-angle projections") {
        LabeledArray a(ArraySpec({"angle", "vertical", "horizontal"}, {186, 6, 5}), 0.25);
        write_tiff_stack(a, dir / "golden", "angle");
        const auto ag = make_parallel_geometry(3, Panel{{5, 6}, {1.0, 1.0}, PanelOrigin::bottom_left},
                                               AngleList{golden_angles(186), AngleUnit::degree});
        const auto b = read_tiff_stack(dir / "golden", {"angle", "vertical", "horizontal"}, Geometry(ag));
        CHECK(b.shape() == std::vector<std::size_t>{186, 6, 5});
        CHECK(b.geometry().has_value());
    }
    SUBCASE("2-D arrays give one-row images") {
        const auto a = random_array({"angle", "horizontal"}, {3, 7}, 4);
        write_tiff_stack(a, dir / "rows", "angle");
        const auto b = read_tiff_stack(dir / "rows", {"angle", "vertical", "horizontal"});
        REQUIRE(b.shape() == std::vector<std::size_t>{3, 1, 7});
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.data()[i] == static_cast<double>(static_cast<float>(a.data()[i])));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(write_tiff_stack(random_array({"x"}, {2}, 1), dir / "bad", "x"), ShapeError);
        auto a = random_array({"angle", "vertical", "horizontal"}, {2, 4, 4}, 9);
        write_tiff_stack(a, dir / "mixed", "angle");
        auto b = random_array({"angle", "vertical", "horizontal"}, {1, 3, 4}, 9);
        write_tiff_stack(b, dir / "other", "angle", "z");
        fs::copy_file(dir / "other" / "z_0000.tiff", dir / "mixed" / "slice_0002.tiff");
        CHECK_THROWS_AS(read_tiff_stack(dir / "mixed", {"angle", "vertical", "horizontal"}), IoError);

        write_tiff_stack(a, dir / "names", "angle");
        fs::copy_file(dir / "names" / "slice_0000.tiff", dir / "names" / "dark.tiff");
        CHECK_THROWS_AS(read_tiff_stack(dir / "names", {"angle", "vertical", "horizontal"}), IoError);
        CHECK_THROWS_AS(read_tiff_stack(dir / "nothing_here", {"a", "b", "c"}), IoError);
        CHECK_THROWS_AS(read_tiff_stack(dir / "mixed", {"a", "b"}), ShapeError);
    }
}

TEST_CASE("PNG heatmaps") {
    const auto dir = scratch("png");
    LabeledArray a(ArraySpec({"horizontal_y", "horizontal_x"}, {20, 30}));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = -0.02 + 0.14 * static_cast<double>(i) / static_cast<double>(a.size());
    SUBCASE("deterministic bytes") {
        export_png_heatmap(a, dir / "a.png", -0.01, 0.11);
        export_png_heatmap(a, dir / "b.png", -0.01, 0.11);
        const auto bytes = slurp(dir / "a.png");
        CHECK(bytes == slurp(dir / "b.png"));
        CHECK(bytes.substr(1, 3) == "PNG");
        export_png_heatmap(a, dir / "c.png", -0.01, 0.11, Colormap::hot);
        CHECK(slurp(dir / "c.png") != bytes);
    }
    SUBCASE("constant input at lo") {
        LabeledArray c(ArraySpec({"y", "x"}, {4, 4}), -0.01);
        LabeledArray d(ArraySpec({"y", "x"}, {4, 4}), -5.0);
        export_png_heatmap(c, dir / "c.png", -0.01, 0.11);
        export_png_heatmap(d, dir / "d.png", -0.01, 0.11);
        // Clamping maps both to entry 0, so the files are identical.
        CHECK(slurp(dir / "c.png") == slurp(dir / "d.png"));
        CHECK(colormap_entry(Colormap::gray, 0) == std::array<unsigned char, 3>{0, 0, 0});
        CHECK(colormap_entry(Colormap::hot, 255) == std::array<unsigned char, 3>{255, 255, 255});
    }
    SUBCASE("2-D arrays give one-row images") {
        const auto a = random_array({"angle", "horizontal"}, {3, 7}, 4);
        write_tiff_stack(a, dir / "rows", "angle");
        const auto b = read_tiff_stack(dir / "rows", {"angle", "vertical", "horizontal"});
        REQUIRE(b.shape() == std::vector<std::size_t>{3, 1, 7});
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.data()[i] == static_cast<double>(static_cast<float>(a.data()[i])));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(export_png_heatmap(random_array({"x"}, {3}, 1), dir / "e.png", 0, 1), ShapeError);
        CHECK_THROWS_AS(export_png_heatmap(a, dir / "e.png", 1, 1), DomainError);
        CHECK_THROWS_AS(export_png_heatmap(a, dir / "no" / "such" / "e.png", 0, 1), IoError);
        CHECK(parse_colormap("hot") == Colormap::hot);
        CHECK_THROWS_AS(parse_colormap("jet"), DomainError);
    }
}
