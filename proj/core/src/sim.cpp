#include "tomo/sim.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "tomo/error.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

struct Ellipse {
    double value, a, b, x0, y0, phi;
};

constexpr std::array<Ellipse, 10> shepp_logan_2d{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
}};

struct Ellipsoid {
    double value, a, b, c, x0, y0, z0, phi, theta, psi;
};

constexpr std::array<Ellipsoid, 10> shepp_logan_3d{{
    {1.0, 0.69, 0.92, 0.81, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.78, 0.0, -0.0184, 0.0, 0.0, 0.0, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.22, 0.0, 0.0, -18.0, 0.0, 10.0},
    {-0.2, 0.16, 0.41, 0.28, -0.22, 0.0, 0.0, 18.0, 0.0, 10.0},
    {0.1, 0.21, 0.25, 0.41, 0.0, 0.35, -0.15, 0.0, 0.0, 0.0},
    {0.1, 0.046, 0.046, 0.05, 0.0, 0.1, 0.25, 0.0, 0.0, 0.0},
    {0.1, 0.046, 0.046, 0.05, 0.0, -0.1, 0.25, 0.0, 0.0, 0.0},
    {0.1, 0.046, 0.023, 0.05, -0.08, -0.605, 0.0, 0.0, 0.0, 0.0},
    {0.1, 0.023, 0.023, 0.02, 0.0, -0.606, 0.0, 0.0, 0.0, 0.0},
    {0.1, 0.023, 0.046, 0.02, 0.06, -0.605, 0.0, 0.0, 0.0, 0.0},
}};

/// Offset of voxel i from the grid centre along an axis.
double centred(std::size_t i, std::size_t n, double h) {
    return (static_cast<double>(i) + 0.5 - 0.5 * static_cast<double>(n)) * h;
}

template <class Value>
LabeledArray rasterise(const ImageGeometry& ig, Value&& value) {
    LabeledArray out{Geometry(ig)};
    const std::size_t nz = ig.dimension() == 3 ? ig.voxel_num_z : 1;
    const std::size_t sx = out.stride(out.axis_index(axis::horizontal_x));
    const std::size_t sy = out.stride(out.axis_index(axis::horizontal_y));
    const std::size_t sz = ig.dimension() == 3 ? out.stride(out.axis_index(axis::vertical)) : 0;
    parallel_for_coarse(nz, [&](std::size_t k) {
        const double z = ig.dimension() == 3 ? centred(k, nz, ig.voxel_size_z) : 0.0;
        for (std::size_t j = 0; j < ig.voxel_num_y; ++j) {
            const double y = centred(j, ig.voxel_num_y, ig.voxel_size_y);
            for (std::size_t i = 0; i < ig.voxel_num_x; ++i) {
                const double x = centred(i, ig.voxel_num_x, ig.voxel_size_x);
                out[k * sz + j * sy + i * sx] = value(x, y, z);
            }
        }
    });
    return out;
}

double in_plane_width(const ImageGeometry& ig) {
    return std::min(static_cast<double>(ig.voxel_num_x) * ig.voxel_size_x,
                    static_cast<double>(ig.voxel_num_y) * ig.voxel_size_y);
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("phantom ") + what + " must be finite");
}

void require_radius(double r, const char* what) {
    if (!(r > 0.0 && r <= 0.5)) throw DomainError(std::string("phantom ") + what + " must lie in (0, 0.5]");
}

}  // namespace

LabeledArray make_phantom(const PhantomSpec& spec, const ImageGeometry& ig) {
    ig.validate();
    return std::visit(
        [&](const auto& s) -> LabeledArray {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SheppLogan2D>) {
                if (ig.dimension() != 2) throw GeometryError("shepp_logan_2d needs a 2-D image geometry");
                const double hx = 0.5 * static_cast<double>(ig.voxel_num_x) * ig.voxel_size_x;
                const double hy = 0.5 * static_cast<double>(ig.voxel_num_y) * ig.voxel_size_y;
                return rasterise(ig, [&](double x, double y, double) {
                    const double u = x / hx;
                    const double v = y / hy;
                    double sum = 0.0;
                    for (const auto& e : shepp_logan_2d) {
                        const double c = std::cos(e.phi * deg);
                        const double sn = std::sin(e.phi * deg);
                        const double dx = u - e.x0;
                        const double dy = v - e.y0;
                        const double p = (dx * c + dy * sn) / e.a;
                        const double q = (-dx * sn + dy * c) / e.b;
                        if (p * p + q * q <= 1.0) sum += e.value;
                    }
                    return sum;
                });
            } else if constexpr (std::is_same_v<T, SheppLogan3D>) {
                if (ig.dimension() != 3) throw GeometryError("shepp_logan_3d needs a 3-D image geometry");
                const double hx = 0.5 * static_cast<double>(ig.voxel_num_x) * ig.voxel_size_x;
                const double hy = 0.5 * static_cast<double>(ig.voxel_num_y) * ig.voxel_size_y;
                const double hz = 0.5 * static_cast<double>(ig.voxel_num_z) * ig.voxel_size_z;
                return rasterise(ig, [&](double x, double y, double z) {
                    const double u = x / hx;
                    const double v = y / hy;
                    const double w = z / hz;
                    double sum = 0.0;
                    for (const auto& e : shepp_logan_3d) {
                        const double cphi = std::cos(e.phi * deg), sphi = std::sin(e.phi * deg);
                        const double cth = std::cos(e.theta * deg), sth = std::sin(e.theta * deg);
                        const double cpsi = std::cos(e.psi * deg), spsi = std::sin(e.psi * deg);
                        // Euler z-x-z rotation applied to the sample point.
                        const double r0 = (cpsi * cphi - cth * sphi * spsi) * u + (cpsi * sphi + cth * cphi * spsi) * v +
                                          spsi * sth * w;
                        const double r1 = (-spsi * cphi - cth * sphi * cpsi) * u +
                                          (-spsi * sphi + cth * cphi * cpsi) * v + cpsi * sth * w;
                        const double r2 = sth * sphi * u - sth * cphi * v + cth * w;
                        const double p = (r0 - e.x0) / e.a;
                        const double q = (r1 - e.y0) / e.b;
                        const double t = (r2 - e.z0) / e.c;
                        if (p * p + q * q + t * t <= 1.0) sum += e.value;
                    }
                    return sum;
                });
            } else if constexpr (std::is_same_v<T, Disk>) {
                require_finite(s.value, "value");
                require_radius(s.radius, "radius");
                const double r = s.radius * in_plane_width(ig);
                return rasterise(ig, [&](double x, double y, double) {
                    return x * x + y * y <= r * r ? s.value : 0.0;
                });
            } else {
                require_finite(s.cylinder_value, "cylinder value");
                require_finite(s.wire_value, "wire value");
                require_radius(s.cylinder_radius, "cylinder radius");
                require_radius(s.wire_radius, "wire radius");
                if (!(std::abs(s.wire_offset) + s.wire_radius <= s.cylinder_radius))
                    throw DomainError("wire must lie inside the cylinder");
                const double width = in_plane_width(ig);
                const double rc = s.cylinder_radius * width;
                const double rw = s.wire_radius * width;
                const double off = s.wire_offset * width;
                return rasterise(ig, [&](double x, double y, double) {
                    if ((x - off) * (x - off) + y * y <= rw * rw) return s.wire_value;
                    return x * x + y * y <= rc * rc ? s.cylinder_value : 0.0;
                });
            }
        },
        spec);
}

NoiseResult add_noise(const LabeledArray& data, const NoiseModel& model, std::uint64_t seed) {
    NoiseResult result{data, 0};
    std::mt19937_64 rng(seed);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            auto values = result.data.values();
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                if (!(m.sigma >= 0.0) || !std::isfinite(m.sigma)) throw DomainError("gaussian sigma must be >= 0");
                if (m.sigma == 0.0) return;
                std::normal_distribution<double> normal(0.0, m.sigma);
                for (double& v : values) v += normal(rng);
            } else if constexpr (std::is_same_v<T, PoissonCounts>) {
                if (!(m.scale > 0.0) || !std::isfinite(m.scale)) throw DomainError("poisson count scale must be > 0");
                for (double& v : values) {
                    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("poisson counts need finite data >= 0");
                    const double mean = m.scale * v;
                    long long c = 0;
                    if (mean > 0.0) {
                        std::poisson_distribution<long long> poisson(mean);
                        c = poisson(rng);
                    }
                    v = static_cast<double>(c) / m.scale;
                }
            } else {
                if (!(m.incident > 0.0) || !std::isfinite(m.incident))
                    throw DomainError("poisson incident intensity must be > 0");
                for (double& v : values) {
                    if (!std::isfinite(v)) throw DomainError("poisson noise needs finite line integrals");
                    const double mean = m.incident * std::exp(-v);
                    double counts = 0.0;
                    if (mean > 0.0) {
                        std::poisson_distribution<long long> poisson(mean);
                        counts = static_cast<double>(poisson(rng));
                    }
                    if (counts < 1.0) {
                        counts = 1.0;
                        ++result.clipped;
                    }
                    v = -std::log(counts / m.incident);
                }
            }
        },
        model);
    return result;
}

Quality metrics(const LabeledArray& x, const LabeledArray& ref, std::optional<double> peak) {
    x.require_same_layout(ref, "metrics");
    if (ref.size() == 0) throw ShapeError("metrics on empty arrays");
    const double* a = x.data();
    const double* b = ref.data();
    const double sq = deterministic_sum(x.size(), [&](std::size_t i) {
        const double d = a[i] - b[i];
        return d * d;
    });
    Quality q;
    q.mse = sq / static_cast<double>(x.size());
    const double p = peak.value_or(ref.max());
    if (q.mse == 0.0) {
        q.psnr = std::numeric_limits<double>::infinity();
        q.psnr_infinite = true;
    } else {
        q.psnr = 10.0 * std::log10(p * p / q.mse);
    }
    return q;
}

}  // namespace tomo
