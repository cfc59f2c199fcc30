#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "tomo/error.hpp"
#include "tomo/sim.hpp"

using namespace tomo;

namespace {

// Independent centre-in rasterisation of the ten-ellipse table.
double shepp_logan_oracle(double u, double v) {
    struct E {
        double A, a, b, x, y, t;
    };
    static const E table[] = {{1, .69, .92, 0, 0, 0},           {-.8, .6624, .874, 0, -.0184, 0},
                              {-.2, .11, .31, .22, 0, -18},     {-.2, .16, .41, -.22, 0, 18},
                              {.1, .21, .25, 0, .35, 0},        {.1, .046, .046, 0, .1, 0},
                              {.1, .046, .046, 0, -.1, 0},      {.1, .046, .023, -.08, -.605, 0},
                              {.1, .023, .023, 0, -.606, 0},    {.1, .023, .046, .06, -.605, 0}};
    double s = 0.0;
    for (const auto& e : table) {
        const double t = e.t * std::numbers::pi / 180.0;
        const double xr = std::cos(t) * (u - e.x) + std::sin(t) * (v - e.y);
        const double yr = -std::sin(t) * (u - e.x) + std::cos(t) * (v - e.y);
        if (std::pow(xr / e.a, 2) + std::pow(yr / e.b, 2) <= 1.0) s += e.A;
    }
    return s;
}

}  // namespace

TEST_CASE("disk phantom") {
    const auto ig = make_image_geometry(64, 64);
    const auto d = make_phantom(Disk{1.0, 0.4}, ig);
    const double r = 0.4 * 64.0;
    std::size_t inside = 0;
    for (std::size_t j = 0; j < 64; ++j)
        for (std::size_t i = 0; i < 64; ++i) {
            const double x = static_cast<double>(i) - 31.5, y = static_cast<double>(j) - 31.5;
            const double expect = x * x + y * y <= r * r ? 1.0 : 0.0;
            CHECK(d.at({j, i}) == expect);
            inside += expect == 1.0;
        }
    // Area of the disk in cells, up to the boundary layer.
    CHECK(std::abs(static_cast<double>(inside) - std::numbers::pi * r * r) < 2.0 * std::numbers::pi * r);
    CHECK(d.geometry().has_value());

    SUBCASE("3-D disk is a vertical cylinder") {
        const auto c = make_phantom(Disk{0.5, 0.25}, make_image_geometry(16, 16, 5));
        for (std::size_t k = 1; k < 5; ++k)
            for (std::size_t j = 0; j < 16; ++j)
                for (std::size_t i = 0; i < 16; ++i) CHECK(c.at({k, j, i}) == c.at({0, j, i}));
        CHECK(c.max() == 0.5);
    }
    SUBCASE("invalid parameters") {
        CHECK_THROWS_AS(make_phantom(Disk{1.0, 0.6}, ig), DomainError);
        CHECK_THROWS_AS(make_phantom(Disk{1.0, 0.0}, ig), DomainError);
        CHECK_THROWS_AS(make_phantom(Disk{NAN, 0.3}, ig), DomainError);
    }
}

TEST_CASE("Shepp-Logan phantoms") {
    SUBCASE("2x2 grid") {
        const auto ig = make_image_geometry(2, 2);
        const auto a = make_phantom(SheppLogan2D{}, ig);
        const auto b = make_phantom(SheppLogan2D{}, ig);
        CHECK(a == b);
        for (double v : a.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
    }
    SUBCASE("matches an independent rasterisation") {
        const std::size_t n = 96;
        const auto ig = make_image_geometry(n, n, 0, 0.25);
        const auto a = make_phantom(SheppLogan2D{}, ig);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n) * 2.0 - 1.0;
                const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(n) * 2.0 - 1.0;
                CHECK(a.at({j, i}) == doctest::Approx(shepp_logan_oracle(u, v)).epsilon(1e-12));
            }
        CHECK(a.max() == doctest::Approx(1.0));
        CHECK(a.min() == doctest::Approx(0.0));
    }
    SUBCASE("3-D") {
        const auto ig = make_image_geometry(32, 32, 32);
        const auto a = make_phantom(SheppLogan3D{}, ig);
        CHECK(a == make_phantom(SheppLogan3D{}, ig));
        CHECK(a.at({16, 16, 16}) == doctest::Approx(0.2));
        CHECK(a.at({0, 0, 0}) == 0.0);
        CHECK(a.max() <= 1.0 + 1e-12);
        // The outer skull ellipsoid reaches further than the inner one.
        CHECK(a.at({16, 30, 16}) == doctest::Approx(1.0));
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(make_phantom(SheppLogan2D{}, make_image_geometry(8, 8, 8)), GeometryError);
        CHECK_THROWS_AS(make_phantom(SheppLogan3D{}, make_image_geometry(8, 8)), GeometryError);
    }
}

TEST_CASE("wire in cylinder") {
    const auto ig = make_image_geometry(100, 100);
    const WireInCylinder spec;
    const auto w = make_phantom(spec, ig);
    std::size_t wire = 0, cyl = 0, air = 0;
    for (double v : w.values()) {
        if (v == spec.wire_value) ++wire;
        else if (v == spec.cylinder_value) ++cyl;
        else if (v == 0.0) ++air;
    }
    CHECK(wire + cyl + air == w.size());
    CHECK(wire > 0);
    CHECK(cyl > 10 * wire);
    CHECK(w.at({50, 50}) == spec.cylinder_value);
    CHECK(w.at({50, 65}) == spec.wire_value);
    CHECK_THROWS_AS(make_phantom(WireInCylinder{0.03, 0.1, 0.2, 0.05, 0.2}, ig), DomainError);
}

TEST_CASE("gaussian noise") {
    const auto ig = make_image_geometry(1000, 1000);
    const LabeledArray zero{Geometry(ig)};
    SUBCASE("sigma zero leaves data unchanged") {
        const auto x = make_phantom(SheppLogan2D{}, make_image_geometry(32, 32));
        CHECK(add_noise(x, GaussianNoise{0.0}, 1).data == x);
    }
    SUBCASE("sample statistics") {
        const auto r = add_noise(zero, GaussianNoise{0.1}, 42);
        double s = 0.0, s2 = 0.0;
        for (double v : r.data.values()) {
            s += v;
            s2 += v * v;
        }
        const double n = static_cast<double>(r.data.size());
        const double mean = s / n;
        const double sd = std::sqrt(s2 / n - mean * mean);
        CHECK(std::abs(sd - 0.1) <= 0.001);
        CHECK(std::abs(mean) <= 5.0 * 0.1 / std::sqrt(n));
    }
    SUBCASE("seeded determinism") {
        const LabeledArray small{Geometry(make_image_geometry(20, 20))};
        CHECK(add_noise(small, GaussianNoise{0.3}, 5).data == add_noise(small, GaussianNoise{0.3}, 5).data);
        CHECK_FALSE(add_noise(small, GaussianNoise{0.3}, 5).data == add_noise(small, GaussianNoise{0.3}, 6).data);
    }
    SUBCASE("invalid sigma") { CHECK_THROWS_AS(add_noise(zero, GaussianNoise{-1.0}, 1), DomainError); }
}

TEST_CASE("poisson noise") {
    const auto ig = make_image_geometry(64, 64);
    auto x = make_phantom(SheppLogan2D{}, ig);
    x *= 2.0;
    SUBCASE("large-count limit") {
        const auto r = add_noise(x, PoissonNoise{1e12}, 3);
        double dev = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) dev = std::max(dev, std::abs(r.data[i] - x[i]));
        CHECK(dev <= 1e-4);
        CHECK(r.clipped == 0);
    }
    SUBCASE("count statistics") {
        // Var(-log(c / I0)) ~ 1 / (I0 e^-d) for large counts.
        const LabeledArray d{Geometry(make_image_geometry(400, 400)), 1.0};
        const double i0 = 1e4;
        const auto r = add_noise(d, PoissonNoise{i0}, 9);
        double s = 0.0, s2 = 0.0;
        for (double v : r.data.values()) {
            s += v;
            s2 += v * v;
        }
        const double n = static_cast<double>(d.size());
        const double var = s2 / n - (s / n) * (s / n);
        CHECK(std::abs(s / n - 1.0) <= 1e-3);
        CHECK(var == doctest::Approx(std::exp(1.0) / i0).epsilon(0.02));
    }
    SUBCASE("zero counts are clipped and reported") {
        const LabeledArray opaque{Geometry(ig), 30.0};
        const auto r = add_noise(opaque, PoissonNoise{10.0}, 1);
        CHECK(r.clipped > 0);
        for (double v : r.data.values()) CHECK(std::isfinite(v));
        CHECK(r.data.max() == doctest::Approx(std::log(10.0)));
    }
    SUBCASE("determinism and errors") {
        CHECK(add_noise(x, PoissonNoise{100.0}, 4).data == add_noise(x, PoissonNoise{100.0}, 4).data);
        CHECK_THROWS_AS(add_noise(x, PoissonNoise{0.0}, 1), DomainError);
    }
}

TEST_CASE("poisson counts") {
    const LabeledArray d{Geometry(make_image_geometry(300, 300)), 2.0};
    const auto r = add_noise(d, PoissonCounts{50.0}, 3);
    double s = 0.0, s2 = 0.0;
    for (double v : r.data.values()) {
        CHECK(std::abs(v * 50.0 - std::round(v * 50.0)) <= 1e-9);
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(d.size());
    CHECK(std::abs(s / n - 2.0) <= 0.01);
    // Var = mean / scale.
    CHECK((s2 / n - (s / n) * (s / n)) == doctest::Approx(2.0 / 50.0).epsilon(0.03));
    CHECK_THROWS_AS(add_noise(d - 3.0, PoissonCounts{1.0}, 1), DomainError);
}

TEST_CASE("metrics") {
    const auto ig = make_image_geometry(16, 16);
    auto ref = make_phantom(SheppLogan2D{}, ig);
    SUBCASE("identical arrays") {
        const auto q = metrics(ref, ref);
        CHECK(q.mse == 0.0);
        CHECK(q.psnr_infinite);
        CHECK(std::isinf(q.psnr));
    }
    SUBCASE("constant offset closed form") {
        const auto q = metrics(ref + 0.1, ref);
        CHECK(q.mse == doctest::Approx(0.01).epsilon(1e-12));
        CHECK(q.psnr == doctest::Approx(20.0).epsilon(1e-10));
        CHECK_FALSE(q.psnr_infinite);
        CHECK(metrics(ref + 0.1, ref, 2.0).psnr == doctest::Approx(20.0 + 20.0 * std::log10(2.0)).epsilon(1e-10));
    }
    SUBCASE("random pair against a second formula") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 2.0);
        LabeledArray a{Geometry(ig)}, b{Geometry(ig)};
        for (double& v : a.values()) v = u(rng);
        for (double& v : b.values()) v = u(rng);
        long double acc = 0.0L, peak = -1e300L;
        for (std::size_t i = 0; i < a.size(); ++i) {
            acc += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
            peak = std::max<long double>(peak, b[i]);
        }
        const long double mse = acc / a.size();
        const auto q = metrics(a, b);
        CHECK(q.mse == doctest::Approx(static_cast<double>(mse)).epsilon(1e-13));
        CHECK(q.psnr == doctest::Approx(static_cast<double>(10.0L * std::log10(peak * peak / mse))).epsilon(1e-12));
    }
    SUBCASE("psnr decreases with noise level") {
        double last = INFINITY;
        for (double sigma : {0.01, 0.05, 0.2}) {
            const double p = metrics(add_noise(ref, GaussianNoise{sigma}, 77).data, ref).psnr;
            CHECK(p < last);
            last = p;
        }
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(metrics(ref, LabeledArray{Geometry(make_image_geometry(8, 8))}), ShapeError);
    }
}
