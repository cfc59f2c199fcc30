#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>

#include "tomo/labeled_array.hpp"

namespace tomo {

/// Modified (high-contrast) ten-ellipse head phantom on a 2-D grid; the
/// ellipse table spans [-1, 1] over the field of view.
struct SheppLogan2D {};
/// Ten-ellipsoid extension of the head phantom on a 3-D grid.
struct SheppLogan3D {};
/// Disk (cylinder along the vertical axis in 3-D) centred on the grid.
/// `radius` is a fraction of the smaller in-plane field-of-view width.
struct Disk {
    double value = 1.0;
    double radius = 0.4;
};
/// Two-material sample: a cylinder with an off-centre wire running
/// parallel to the vertical axis. Radii and the wire offset (along x) are
/// fractions of the smaller in-plane field-of-view width.
struct WireInCylinder {
    double cylinder_value = 0.03;
    double wire_value = 0.1;
    double cylinder_radius = 0.35;
    double wire_radius = 0.04;
    double wire_offset = 0.15;
};
using PhantomSpec = std::variant<SheppLogan2D, SheppLogan3D, Disk, WireInCylinder>;

/// Rasterise with a binary test at each voxel centre. Throws GeometryError
/// when a Shepp-Logan variant does not match the grid dimension and
/// DomainError for non-finite values or radii outside the grid.
LabeledArray make_phantom(const PhantomSpec& spec, const ImageGeometry& ig);

struct GaussianNoise {
    double sigma = 0.0;
};
/// Counts I0 * exp(-data) are Poisson sampled and mapped back by -log(c/I0).
struct PoissonNoise {
    double incident = 1e4;
};
/// Emission-style counts: data are expected values in units of 1/scale and
/// are replaced by Poisson(scale * data) / scale. Data must be >= 0.
struct PoissonCounts {
    double scale = 1.0;
};
using NoiseModel = std::variant<GaussianNoise, PoissonNoise, PoissonCounts>;

struct NoiseResult {
    LabeledArray data;
    /// Transmission samples of zero counts, clipped to one before the log.
    std::size_t clipped = 0;
};

/// Deterministic for a given seed; entries are drawn in storage order.
NoiseResult add_noise(const LabeledArray& data, const NoiseModel& model, std::uint64_t seed);

struct Quality {
    double mse = 0.0;
    /// +infinity when mse is zero.
    double psnr = 0.0;
    bool psnr_infinite = false;
};

/// mse = mean((x - ref)^2), psnr = 10 log10(peak^2 / mse) with
/// peak = max(ref) unless given.
Quality metrics(const LabeledArray& x, const LabeledArray& ref, std::optional<double> peak = std::nullopt);

}  // namespace tomo
