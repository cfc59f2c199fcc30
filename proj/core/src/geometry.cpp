#include "tomo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "tomo/error.hpp"

namespace tomo {

namespace {

constexpr double kUnitTolerance = 1e-12;

bool is_unit(const Vec3& v) { return std::abs(norm3(v) - 1.0) <= kUnitTolerance; }

std::string vec_text(const Vec3& v) {
    return "[" + std::to_string(v[0]) + ", " + std::to_string(v[1]) + ", " + std::to_string(v[2]) + "]";
}

void check_unique_labels(const std::vector<std::string>& labels) {
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw GeometryError("duplicate dimension label");
}

std::vector<std::string> without(const std::vector<std::string>& labels, std::string_view label) {
    std::vector<std::string> out;
    for (const auto& l : labels)
        if (l != label) out.push_back(l);
    return out;
}

}  // namespace

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross3(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }
Vec3 scaled3(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
Vec3 add3(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub3(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

std::string_view to_string(BeamType beam) {
    switch (beam) {
        case BeamType::parallel2D: return "parallel2D";
        case BeamType::parallel3D: return "parallel3D";
        case BeamType::fan: return "fan";
        case BeamType::cone: return "cone";
    }
    return "?";
}

std::string_view to_string(AngleUnit unit) { return unit == AngleUnit::degree ? "degree" : "radian"; }

std::string_view to_string(PanelOrigin origin) {
    switch (origin) {
        case PanelOrigin::top_left: return "top-left";
        case PanelOrigin::bottom_left: return "bottom-left";
        case PanelOrigin::top_right: return "top-right";
        case PanelOrigin::bottom_right: return "bottom-right";
    }
    return "?";
}

BeamType parse_beam_type(std::string_view text) {
    for (auto b : {BeamType::parallel2D, BeamType::parallel3D, BeamType::fan, BeamType::cone})
        if (to_string(b) == text) return b;
    throw GeometryError("unknown beam type '" + std::string(text) + "'");
}

AngleUnit parse_angle_unit(std::string_view text) {
    if (text == "degree") return AngleUnit::degree;
    if (text == "radian") return AngleUnit::radian;
    throw GeometryError("unknown angle unit '" + std::string(text) + "'");
}

PanelOrigin parse_panel_origin(std::string_view text) {
    for (auto o : {PanelOrigin::top_left, PanelOrigin::bottom_left, PanelOrigin::top_right,
                   PanelOrigin::bottom_right})
        if (to_string(o) == text) return o;
    throw GeometryError("unknown panel origin '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// AcquisitionGeometry

std::vector<double> AcquisitionGeometry::angles_radians() const {
    std::vector<double> out(angles);
    if (angle_unit == AngleUnit::degree)
        for (auto& a : out) a *= std::numbers::pi / 180.0;
    return out;
}

std::size_t AcquisitionGeometry::extent(std::string_view label) const {
    if (label == axis::angle) return angles.size();
    if (label == axis::horizontal) return panel.num_pixels[0];
    if (label == axis::vertical && dimension() == 3) return panel.num_pixels[1];
    throw ShapeError("acquisition geometry has no axis '" + std::string(label) + "'");
}

std::vector<std::size_t> AcquisitionGeometry::shape() const {
    std::vector<std::size_t> s;
    for (const auto& l : dimension_labels) s.push_back(extent(l));
    return s;
}

Vec3 AcquisitionGeometry::column_step() const {
    const bool right = panel.origin == PanelOrigin::top_right || panel.origin == PanelOrigin::bottom_right;
    return scaled3(detector_direction_x, right ? -panel.pixel_size[0] : panel.pixel_size[0]);
}

Vec3 AcquisitionGeometry::row_step() const {
    const bool top = panel.origin == PanelOrigin::top_left || panel.origin == PanelOrigin::top_right;
    return scaled3(detector_direction_y, top ? -panel.pixel_size[1] : panel.pixel_size[1]);
}

Vec3 AcquisitionGeometry::pixel_position(std::size_t row, std::size_t col) const {
    const double u = static_cast<double>(col) - 0.5 * static_cast<double>(panel.num_pixels[0] - 1);
    Vec3 p = add3(detector_position, scaled3(column_step(), u));
    if (dimension() == 3) {
        const double v = static_cast<double>(row) - 0.5 * static_cast<double>(panel.num_pixels[1] - 1);
        p = add3(p, scaled3(row_step(), v));
    }
    return p;
}

double AcquisitionGeometry::magnification() const {
    if (is_parallel()) return 1.0;
    const Vec3 central = sub3(detector_position, source_position);
    const Vec3 n = scaled3(central, 1.0 / norm3(central));
    const double to_axis = dot3(sub3(rotation_axis_position, source_position), n);
    if (to_axis <= 0.0) throw GeometryError("rotation axis is not between source and detector");
    return dot3(central, n) / to_axis;
}

void AcquisitionGeometry::validate() const {
    if (angles.empty()) throw GeometryError("angle list is empty");
    for (double a : angles)
        if (!std::isfinite(a)) throw GeometryError("non-finite angle");
    if (!is_unit(rotation_axis_direction))
        throw GeometryError("rotation_axis_direction must have unit norm, got " + vec_text(rotation_axis_direction));
    if (!is_unit(detector_direction_x)) throw GeometryError("detector_direction_x must have unit norm");
    if (dimension() == 3 && !is_unit(detector_direction_y))
        throw GeometryError("detector_direction_y must have unit norm");
    if (is_parallel() && !is_unit(ray_direction))
        throw GeometryError("ray_direction must have unit norm, got " + vec_text(ray_direction));
    for (int i = 0; i < 2; ++i) {
        if (panel.num_pixels[i] < 1) throw GeometryError("panel pixel counts must be >= 1");
        if (!(panel.pixel_size[i] > 0.0)) throw GeometryError("panel pixel sizes must be positive");
    }
    if (!is_parallel() && norm3(sub3(source_position, detector_position)) == 0.0)
        throw GeometryError("source and detector positions coincide");
    if (dimension() == 2) {
        if (panel.num_pixels[1] != 1) throw GeometryError("2-D geometry needs a single detector row");
        const Vec3 ez{0.0, 0.0, 1.0};
        if (rotation_axis_direction != ez) throw GeometryError("2-D geometry rotates about [0, 0, 1]");
        for (const Vec3* v : {&source_position, &ray_direction, &detector_position, &detector_direction_x,
                              &rotation_axis_position})
            if ((*v)[2] != 0.0) throw GeometryError("2-D geometry must lie in the z = 0 plane");
    }
    check_unique_labels(dimension_labels);
    bool has_angle = false, has_horizontal = false, has_vertical = false;
    for (const auto& l : dimension_labels) {
        if (l == axis::angle) has_angle = true;
        else if (l == axis::horizontal) has_horizontal = true;
        else if (l == axis::vertical && dimension() == 3) has_vertical = true;
        else throw GeometryError("invalid acquisition dimension label '" + l + "'");
    }
    if (!has_horizontal || (dimension() == 3 && !has_vertical))
        throw GeometryError("acquisition geometry is missing a detector axis label");
    if (!has_angle && angles.size() != 1)
        throw GeometryError("only single-angle geometries may omit the angle axis");
}

// ---------------------------------------------------------------------------
// ImageGeometry

std::size_t ImageGeometry::extent(std::string_view label) const {
    if (label == axis::horizontal_x) return voxel_num_x;
    if (label == axis::horizontal_y) return voxel_num_y;
    if (label == axis::vertical && voxel_num_z > 0) return voxel_num_z;
    throw ShapeError("image geometry has no axis '" + std::string(label) + "'");
}

std::vector<std::size_t> ImageGeometry::shape() const {
    std::vector<std::size_t> s;
    for (const auto& l : dimension_labels) s.push_back(extent(l));
    return s;
}

std::size_t ImageGeometry::num_voxels() const {
    return voxel_num_x * voxel_num_y * (voxel_num_z == 0 ? 1 : voxel_num_z);
}

void ImageGeometry::validate() const {
    if (voxel_num_x < 1 || voxel_num_y < 1) throw GeometryError("voxel counts must be >= 1");
    if (!(voxel_size_x > 0.0) || !(voxel_size_y > 0.0) || !(voxel_size_z > 0.0))
        throw GeometryError("voxel sizes must be positive");
    check_unique_labels(dimension_labels);
    const std::size_t expected = voxel_num_z == 0 ? 2 : 3;
    if (dimension_labels.size() != expected) throw GeometryError("image geometry label count mismatch");
    for (const auto& l : dimension_labels) (void)extent(l);
}

// ---------------------------------------------------------------------------
// Variant helpers

const std::vector<std::string>& dimension_labels(const Geometry& g) {
    return std::visit([](const auto& v) -> const std::vector<std::string>& { return v.dimension_labels; }, g);
}

std::vector<std::size_t> geometry_shape(const Geometry& g) {
    return std::visit([](const auto& v) { return v.shape(); }, g);
}

void validate(const Geometry& g) {
    std::visit([](const auto& v) { v.validate(); }, g);
}

// ---------------------------------------------------------------------------
// Builders

AcquisitionGeometry make_parallel_geometry(int dim, const Panel& panel, const AngleList& angles,
                                           const ParallelPlacement& placement) {
    if (dim != 2 && dim != 3) throw GeometryError("parallel geometry dimension must be 2 or 3");
    AcquisitionGeometry ag;
    ag.beam = dim == 2 ? BeamType::parallel2D : BeamType::parallel3D;
    ag.panel = panel;
    if (dim == 2) {
        ag.panel.num_pixels[1] = 1;
        ag.dimension_labels = {std::string(axis::angle), std::string(axis::horizontal)};
    } else {
        ag.dimension_labels = {std::string(axis::angle), std::string(axis::vertical),
                               std::string(axis::horizontal)};
    }
    ag.angles = angles.values;
    ag.angle_unit = angles.unit;
    if (placement.ray_direction) ag.ray_direction = *placement.ray_direction;
    if (placement.detector_position) ag.detector_position = *placement.detector_position;
    if (placement.rotation_axis_position) ag.rotation_axis_position = *placement.rotation_axis_position;
    if (placement.rotation_axis_direction) ag.rotation_axis_direction = *placement.rotation_axis_direction;
    ag.validate();
    return ag;
}

AcquisitionGeometry make_cone_geometry(int dim, const ConePlacement& placement, const Panel& panel,
                                       const AngleList& angles) {
    if (dim != 2 && dim != 3) throw GeometryError("cone geometry dimension must be 2 or 3");
    if (norm3(placement.rotation_axis_direction) == 0.0)
        throw GeometryError("rotation axis direction has zero length");
    AcquisitionGeometry ag;
    ag.beam = dim == 2 ? BeamType::fan : BeamType::cone;
    ag.source_position = placement.source_position;
    ag.detector_position = placement.detector_position;
    ag.rotation_axis_position = placement.rotation_axis_position;
    ag.rotation_axis_direction = placement.rotation_axis_direction;
    ag.detector_direction_x = placement.detector_direction_x;
    ag.detector_direction_y = placement.detector_direction_y;
    ag.panel = panel;
    if (dim == 2) {
        ag.panel.num_pixels[1] = 1;
        ag.dimension_labels = {std::string(axis::angle), std::string(axis::horizontal)};
    } else {
        ag.dimension_labels = {std::string(axis::angle), std::string(axis::vertical),
                               std::string(axis::horizontal)};
    }
    ag.angles = angles.values;
    ag.angle_unit = angles.unit;
    ag.validate();
    return ag;
}

ImageGeometry make_image_geometry(std::size_t nx, std::size_t ny, std::size_t nz, double voxel_size) {
    ImageGeometry ig;
    ig.voxel_num_x = nx;
    ig.voxel_num_y = ny;
    ig.voxel_num_z = nz;
    ig.voxel_size_x = ig.voxel_size_y = ig.voxel_size_z = voxel_size;
    if (nz == 0)
        ig.dimension_labels = {std::string(axis::horizontal_y), std::string(axis::horizontal_x)};
    else
        ig.dimension_labels = {std::string(axis::vertical), std::string(axis::horizontal_y),
                               std::string(axis::horizontal_x)};
    ig.validate();
    return ig;
}

ImageGeometry default_image_geometry(const AcquisitionGeometry& ag) {
    const double mag = ag.magnification();
    const std::size_t n = ag.panel.num_pixels[0];
    ImageGeometry ig = make_image_geometry(n, n, ag.dimension() == 3 ? ag.panel.num_pixels[1] : 0);
    ig.voxel_size_x = ig.voxel_size_y = ag.panel.pixel_size[0] / mag;
    ig.voxel_size_z = ag.dimension() == 3 ? ag.panel.pixel_size[1] / mag : ig.voxel_size_x;
    return ig;
}

std::vector<double> golden_angles(std::size_t count) {
    const double step = 0.5 * (std::sqrt(5.0) - 1.0) * 180.0;
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = static_cast<double>(k) * step;
    return out;
}

std::vector<double> linspace(double start, double stop, std::size_t count, bool endpoint) {
    std::vector<double> out(count);
    if (count == 0) return out;
    if (count == 1) {
        out[0] = start;
        return out;
    }
    const double div = static_cast<double>(endpoint ? count - 1 : count);
    const double step = (stop - start) / div;
    for (std::size_t i = 0; i < count; ++i) out[i] = start + static_cast<double>(i) * step;
    if (endpoint) out[count - 1] = stop;
    return out;
}

// ---------------------------------------------------------------------------
// Bookkeeping

std::optional<Geometry> slice_geometry(const Geometry& g, std::string_view label, std::size_t index) {
    if (const auto* ig = std::get_if<ImageGeometry>(&g)) {
        if (label != axis::vertical || ig->dimension() != 3) return std::nullopt;
        ImageGeometry out = *ig;
        out.center_offset[2] = 0.0;
        out.voxel_num_z = 0;
        out.dimension_labels = without(ig->dimension_labels, label);
        return out;
    }
    const auto& ag = std::get<AcquisitionGeometry>(g);
    if (label == axis::angle) {
        AcquisitionGeometry out = ag;
        out.angles = {ag.angles.at(index)};
        out.dimension_labels = without(ag.dimension_labels, label);
        return out;
    }
    if (label == axis::vertical && ag.beam == BeamType::parallel3D) {
        // Only the standard upright layout reduces to a 2-D slice geometry.
        const Vec3 ez{0.0, 0.0, 1.0};
        if (ag.rotation_axis_direction != ez || ag.detector_direction_y != ez || ag.ray_direction[2] != 0.0 ||
            ag.detector_direction_x[2] != 0.0)
            return std::nullopt;
        AcquisitionGeometry out = ag;
        out.beam = BeamType::parallel2D;
        out.panel.num_pixels[1] = 1;
        out.detector_position[2] = 0.0;
        out.rotation_axis_position[2] = 0.0;
        out.source_position[2] = 0.0;
        out.dimension_labels = without(ag.dimension_labels, label);
        return out;
    }
    return std::nullopt;
}

Geometry reorder_geometry(const Geometry& g, const std::vector<std::string>& order) {
    return std::visit(
        [&](auto v) -> Geometry {
            if (!std::is_permutation(order.begin(), order.end(), v.dimension_labels.begin(),
                                     v.dimension_labels.end()))
                throw ShapeError("new label order is not a permutation of the existing labels");
            v.dimension_labels = order;
            return v;
        },
        g);
}

Geometry resample_axis(const Geometry& g, std::string_view label, std::size_t count, double first, double step) {
    if (count == 0) throw ShapeError("resampled axis would be empty");
    if (!(step > 0.0)) throw ShapeError("resampling step must be positive");
    if (const auto* ig = std::get_if<ImageGeometry>(&g)) {
        ImageGeometry out = *ig;
        auto update = [&](std::size_t& n, double& size, double& offset) {
            const double centre_shift =
                first + step * 0.5 * static_cast<double>(count - 1) - 0.5 * static_cast<double>(n - 1);
            offset += centre_shift * size;
            size *= step;
            n = count;
        };
        if (label == axis::horizontal_x) update(out.voxel_num_x, out.voxel_size_x, out.center_offset[0]);
        else if (label == axis::horizontal_y) update(out.voxel_num_y, out.voxel_size_y, out.center_offset[1]);
        else if (label == axis::vertical && ig->dimension() == 3)
            update(out.voxel_num_z, out.voxel_size_z, out.center_offset[2]);
        else throw ShapeError("image geometry has no axis '" + std::string(label) + "'");
        return out;
    }
    const auto& ag = std::get<AcquisitionGeometry>(g);
    AcquisitionGeometry out = ag;
    int k;
    Vec3 unit_step;
    if (label == axis::horizontal) {
        k = 0;
        unit_step = ag.column_step();
    } else if (label == axis::vertical && ag.dimension() == 3) {
        k = 1;
        unit_step = ag.row_step();
    } else {
        throw ShapeError("cannot resample acquisition axis '" + std::string(label) + "'");
    }
    const std::size_t n = ag.panel.num_pixels[k];
    const double centre_shift =
        first + step * 0.5 * static_cast<double>(count - 1) - 0.5 * static_cast<double>(n - 1);
    out.detector_position = add3(ag.detector_position, scaled3(unit_step, centre_shift));
    out.panel.pixel_size[k] *= step;
    out.panel.num_pixels[k] = count;
    return out;
}

AcquisitionGeometry with_angles(const AcquisitionGeometry& g, std::vector<double> angles) {
    AcquisitionGeometry out = g;
    out.angles = std::move(angles);
    out.validate();
    return out;
}

}  // namespace tomo
