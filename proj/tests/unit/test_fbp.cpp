#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "tomo/data_container.hpp"
#include "tomo/error.hpp"
#include "tomo/fbp.hpp"
#include "tomo/parallel.hpp"
#include "tomo/projector.hpp"
#include "tomo/sim.hpp"

using namespace tomo;

namespace {

constexpr double pi = std::numbers::pi;

AcquisitionGeometry parallel2d(std::size_t views, std::size_t bins, double range = 180.0) {
    return make_parallel_geometry(2, Panel{{bins, 1}, {1.0, 1.0}, PanelOrigin::bottom_left},
                                  AngleList{linspace(0.0, range, views, false), AngleUnit::degree});
}

// Line integrals of a uniform disk, sampled at detector pixel centres.
LabeledArray disk_sinogram(const AcquisitionGeometry& ag, double mu, double radius) {
    LabeledArray s{Geometry(ag)};
    const std::size_t bins = ag.panel.num_pixels[0];
    for (std::size_t a = 0; a < ag.angles.size(); ++a)
        for (std::size_t c = 0; c < bins; ++c) {
            const double u = static_cast<double>(c) - 0.5 * static_cast<double>(bins - 1);
            s.at({a, c}) = std::abs(u) < radius ? 2.0 * mu * std::sqrt(radius * radius - u * u) : 0.0;
        }
    return s;
}

struct RingMeans {
    double inside = 0.0;
    double outside = 0.0;
};

RingMeans ring_means(const LabeledArray& img, double radius) {
    const std::size_t ny = img.shape()[0], nx = img.shape()[1];
    double in = 0.0, out = 0.0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const double x = static_cast<double>(i) + 0.5 - 0.5 * static_cast<double>(nx);
            const double y = static_cast<double>(j) + 0.5 - 0.5 * static_cast<double>(ny);
            const double r = std::hypot(x, y);
            if (r < 0.9 * radius) {
                in += img.at({j, i});
                ++nin;
            } else if (r > 1.1 * radius && r < 0.5 * static_cast<double>(nx)) {
                out += img.at({j, i});
                ++nout;
            }
        }
    return {in / static_cast<double>(nin), out / static_cast<double>(nout)};
}

}  // namespace

TEST_CASE("filter response") {
    SUBCASE("padding") {
        CHECK(padded_length(1) == 64);
        CHECK(padded_length(100) == 1024);
        CHECK(padded_length(256) == 2048);
        CHECK(padded_length(257) == 4096);
        for (std::size_t n = 1; n < 600; n += 7) CHECK(padded_length(n) >= 2 * n);
    }
    SUBCASE("DC removal for every window") {
        for (auto kind : {FilterKind::ram_lak, FilterKind::shepp_logan, FilterKind::cosine, FilterKind::hann,
                          FilterKind::hamming}) {
            const auto h = filter_response(FilterSpec{kind, 1.0}, 512, 1.0);
            CHECK(h[0] == 0.0);
        }
        // A DC row over the padded period filters to zero everywhere.
        std::vector<double> row(padded_length(40), 3.0);
        filter_row_circular(row, FilterSpec{}, 1.0);
        double mean = 0.0;
        for (double v : row) {
            CHECK(std::abs(v) <= 1e-10);
            mean += v / static_cast<double>(row.size());
        }
        CHECK(std::abs(mean) <= 1e-10);
    }
    SUBCASE("ramp shape") {
        // The band-limited ramp approaches |f| / d^2 away from DC.
        const std::size_t p = 1024;
        const auto h = filter_response(FilterSpec{}, p, 2.0);
        for (std::size_t k : {64u, 200u, 400u}) {
            const double f = static_cast<double>(k) / static_cast<double>(p);
            CHECK(h[k] == doctest::Approx(f / 4.0).epsilon(2e-3));
        }
        CHECK(h[p / 2] == doctest::Approx(0.5 / 4.0).epsilon(1e-3));
    }
    SUBCASE("windows and cutoff") {
        const std::size_t p = 256;
        const auto ramp = filter_response(FilterSpec{}, p, 1.0);
        const auto hann = filter_response(FilterSpec{FilterKind::hann, 1.0}, p, 1.0);
        const auto cut = filter_response(FilterSpec{FilterKind::ram_lak, 0.5}, p, 1.0);
        CHECK(hann[p / 2] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(hann[p / 4] == doctest::Approx(0.5 * ramp[p / 4]).epsilon(1e-12));
        for (std::size_t k = 0; k <= p / 2; ++k) {
            CHECK(hann[k] <= ramp[k] + 1e-15);
            if (k > p / 4) CHECK(cut[k] == 0.0);
            else CHECK(cut[k] == ramp[k]);
        }
    }
    SUBCASE("invalid cutoff and names") {
        CHECK_THROWS_AS(filter_response(FilterSpec{FilterKind::ram_lak, 0.0}, 64, 1.0), DomainError);
        CHECK_THROWS_AS(filter_response(FilterSpec{FilterKind::ram_lak, 1.5}, 64, 1.0), DomainError);
        CHECK(parse_filter_kind("shepp-logan") == FilterKind::shepp_logan);
        CHECK_THROWS_AS(parse_filter_kind("butterworth"), DomainError);
    }
}

TEST_CASE("angular weights") {
    SUBCASE("uniform half circle") {
        std::vector<double> a;
        for (int i = 0; i < 180; ++i) a.push_back(i * pi / 180.0);
        const auto w = angular_weights(a);
        CHECK_FALSE(w.limited_angle);
        for (double v : w.weights) CHECK(v == doctest::Approx(pi / 180.0).epsilon(1e-12));
    }
    SUBCASE("full circle splits the weight between opposing views") {
        std::vector<double> a;
        for (int i = 0; i < 360; ++i) a.push_back(i * pi / 180.0);
        const auto w = angular_weights(a);
        double sum = 0.0;
        for (double v : w.weights) sum += v;
        CHECK(sum == doctest::Approx(pi).epsilon(1e-12));
    }
    SUBCASE("golden angles sum to the covered half circle") {
        for (std::size_t n : {2u, 15u, 186u, 1000u}) {
            const auto deg = golden_angles(n);
            std::vector<double> a;
            for (double d : deg) a.push_back(d * pi / 180.0);
            const auto w = angular_weights(a);
            double sum = 0.0;
            for (double v : w.weights) {
                CHECK(v > 0.0);
                sum += v;
            }
            if (n >= 15) CHECK_FALSE(w.limited_angle);
            CHECK(std::abs(sum - pi) <= 1e-9);
        }
    }
    SUBCASE("half-gap rule on an irregular list") {
        const std::vector<double> deg{0.0, 10.0, 40.0, 100.0, 150.0};
        std::vector<double> a;
        for (double d : deg) a.push_back(d * pi / 180.0);
        const auto w = angular_weights(a);
        const std::vector<double> expect{(30.0 + 10.0) / 2, (10.0 + 30.0) / 2, (30.0 + 60.0) / 2,
                                         (60.0 + 50.0) / 2, (50.0 + 30.0) / 2};
        for (std::size_t i = 0; i < deg.size(); ++i)
            CHECK(w.weights[i] == doctest::Approx(expect[i] * pi / 180.0).epsilon(1e-12));
    }
    SUBCASE("limited angle is flagged") {
        std::vector<double> a;
        for (int i = 0; i < 90; ++i) a.push_back(i * pi / 180.0);
        CHECK(angular_weights(a).limited_angle);
    }
}

TEST_CASE("FBP recovers a uniform disk") {
    const double mu = 0.05;
    const double radius = 0.4 * 256.0 * 0.5;
    const auto ag = parallel2d(360, 256);
    const auto ig = default_image_geometry(ag);
    const auto rec = fbp_parallel(disk_sinogram(ag, mu, radius), ig);
    const auto m = ring_means(rec, radius);
    MESSAGE("interior " << m.inside << " exterior " << m.outside);
    CHECK(std::abs(m.inside - mu) <= 0.02 * mu);
    CHECK(std::abs(m.outside) <= 0.002);
}

TEST_CASE("FBP scaling follows pixel and voxel sizes") {
    const double mu = 0.05;
    const double pixel = 0.5;
    auto ag = make_parallel_geometry(2, Panel{{128, 1}, {pixel, pixel}, PanelOrigin::bottom_left},
                                     AngleList{linspace(0.0, 180.0, 180, false), AngleUnit::degree});
    const auto ig = default_image_geometry(ag);
    const double radius = 20.0;  // world units
    LabeledArray s{Geometry(ag)};
    for (std::size_t a = 0; a < 180; ++a)
        for (std::size_t c = 0; c < 128; ++c) {
            const double u = (static_cast<double>(c) - 63.5) * pixel;
            s.at({a, c}) = std::abs(u) < radius ? 2.0 * mu * std::sqrt(radius * radius - u * u) : 0.0;
        }
    const auto rec = fbp_parallel(s, ig);
    const auto m = ring_means(rec, radius / pixel);
    MESSAGE("interior " << m.inside << " exterior " << m.outside);
    CHECK(std::abs(m.inside - mu) <= 0.02 * mu);
}

TEST_CASE("FBP properties") {
    const auto ag = parallel2d(60, 48);
    const auto ig = default_image_geometry(ag);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LabeledArray s{Geometry(ag)};
    for (double& v : s.values()) v = u(rng);

    SUBCASE("linearity") {
        const auto r1 = fbp_parallel(s, ig);
        const auto r2 = fbp_parallel(3.7 * s, ig);
        double err = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < r1.size(); ++i) {
            err = std::max(err, std::abs(r2[i] - 3.7 * r1[i]));
            ref = std::max(ref, std::abs(3.7 * r1[i]));
        }
        CHECK(err <= 1e-12 * ref);
    }
    SUBCASE("zero sinogram") {
        const auto r = fbp_parallel(LabeledArray{Geometry(ag)}, ig);
        for (double v : r.values()) CHECK(v == 0.0);
    }
    SUBCASE("thread count does not change the result") {
        set_num_threads(1);
        const auto r1 = fbp_parallel(s, ig, FilterSpec{FilterKind::hann, 0.8});
        set_num_threads(4);
        const auto r4 = fbp_parallel(s, ig, FilterSpec{FilterKind::hann, 0.8});
        set_num_threads(0);
        CHECK(r1 == r4);
    }
    SUBCASE("non-parallel geometry is rejected") {
        ConePlacement cp;
        cp.source_position = {0.0, -200.0, 0.0};
        cp.detector_position = {0.0, 100.0, 0.0};
        const auto fan = make_cone_geometry(2, cp, Panel{{48, 1}, {1.0, 1.0}, PanelOrigin::bottom_left},
                                            AngleList{linspace(0.0, 360.0, 60, false), AngleUnit::degree});
        CHECK_THROWS_AS(fbp_parallel(LabeledArray{Geometry(fan)}, ig), GeometryError);
        CHECK_THROWS_AS(fbp_parallel(LabeledArray::vector({1.0, 2.0}, "horizontal"), ig), GeometryError);
    }
    SUBCASE("limited angle is reported but computed") {
        const auto short_scan = parallel2d(30, 48, 90.0);
        FbpReport report;
        const auto r = fbp_parallel(LabeledArray{Geometry(short_scan), 1.0}, ig, FilterSpec{}, &report);
        CHECK(report.limited_angle);
        CHECK(r.size() == ig.num_voxels());
    }
}

TEST_CASE("FBP of 3-D parallel data matches slice-wise 2-D reconstruction") {
    const auto ag3 = make_parallel_geometry(3, Panel{{32, 4}, {1.0, 1.0}, PanelOrigin::bottom_left},
                                            AngleList{linspace(0.0, 180.0, 40, false), AngleUnit::degree});
    const auto ag2 = parallel2d(40, 32);
    const auto ig3 = default_image_geometry(ag3);
    const auto ig2 = default_image_geometry(ag2);
    const auto x3 = make_phantom(SheppLogan3D{}, ig3);
    const auto p3 = projector(ig3, ag3).direct(DataContainer(x3)).array();
    const auto r3 = fbp_parallel(p3, ig3);
    for (std::size_t v = 0; v < 4; ++v) {
        LabeledArray s2{Geometry(ag2)};
        for (std::size_t a = 0; a < 40; ++a)
            for (std::size_t c = 0; c < 32; ++c) s2.at({a, c}) = p3.at({a, v, c});
        const auto r2 = fbp_parallel(s2, ig2);
        double err = 0.0;
        for (std::size_t j = 0; j < 32; ++j)
            for (std::size_t i = 0; i < 32; ++i) err = std::max(err, std::abs(r3.at({v, j, i}) - r2.at({j, i})));
        CHECK(err <= 1e-12);
    }
}

TEST_CASE("fewer views give a lower PSNR on the wire phantom") {
    const auto ig = make_image_geometry(128, 128);
    const auto truth = make_phantom(WireInCylinder{}, ig);
    double psnr[2];
    int k = 0;
    for (std::size_t views : {15u, 90u}) {
        const auto ag = parallel2d(views, 128);
        const auto sino = projector(ig, ag).direct(DataContainer(truth)).array();
        psnr[k++] = metrics(fbp_parallel(sino, ig), truth).psnr;
    }
    MESSAGE("15 views " << psnr[0] << " dB, 90 views " << psnr[1] << " dB");
    CHECK(psnr[0] < psnr[1]);
}
