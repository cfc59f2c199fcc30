#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tomo {

using Vec3 = std::array<double, 3>;

namespace axis {
inline constexpr std::string_view angle = "angle";
inline constexpr std::string_view vertical = "vertical";
inline constexpr std::string_view horizontal = "horizontal";
inline constexpr std::string_view horizontal_x = "horizontal_x";
inline constexpr std::string_view horizontal_y = "horizontal_y";
}  // namespace axis

enum class BeamType { parallel2D, parallel3D, fan, cone };
enum class AngleUnit { degree, radian };
enum class PanelOrigin { top_left, bottom_left, top_right, bottom_right };

std::string_view to_string(BeamType beam);
std::string_view to_string(AngleUnit unit);
std::string_view to_string(PanelOrigin origin);
BeamType parse_beam_type(std::string_view text);
AngleUnit parse_angle_unit(std::string_view text);
PanelOrigin parse_panel_origin(std::string_view text);

/// Detector panel. Index 0 of each pair is the horizontal direction, index 1
/// the vertical one; 2-D geometries use a single row.
struct Panel {
    std::array<std::size_t, 2> num_pixels{1, 1};
    std::array<double, 2> pixel_size{1.0, 1.0};
    PanelOrigin origin = PanelOrigin::bottom_left;

    bool operator==(const Panel&) const = default;
};

struct AngleList {
    std::vector<double> values;
    AngleUnit unit = AngleUnit::degree;
};

/// Scan geometry in the laboratory frame at angle zero. The sample rotates
/// by each listed angle about the rotation axis; source and detector stay
/// fixed. Parallel beams use `ray_direction`, cone and fan beams use
/// `source_position`. 2-D geometries live in the z = 0 plane.
struct AcquisitionGeometry {
    BeamType beam = BeamType::parallel2D;
    Vec3 source_position{0.0, 0.0, 0.0};
    Vec3 ray_direction{0.0, 1.0, 0.0};
    Vec3 detector_position{0.0, 0.0, 0.0};
    Vec3 detector_direction_x{1.0, 0.0, 0.0};
    Vec3 detector_direction_y{0.0, 0.0, 1.0};
    Vec3 rotation_axis_position{0.0, 0.0, 0.0};
    Vec3 rotation_axis_direction{0.0, 0.0, 1.0};
    std::vector<double> angles;
    AngleUnit angle_unit = AngleUnit::degree;
    Panel panel;
    /// Axis order of the data carrying this geometry. "angle" is absent
    /// only for single-projection geometries produced by slicing.
    std::vector<std::string> dimension_labels;

    int dimension() const {
        return beam == BeamType::parallel2D || beam == BeamType::fan ? 2 : 3;
    }
    bool is_parallel() const {
        return beam == BeamType::parallel2D || beam == BeamType::parallel3D;
    }
    std::vector<double> angles_radians() const;

    /// Extent of one labeled axis; throws ShapeError for unknown labels.
    std::size_t extent(std::string_view label) const;
    std::vector<std::size_t> shape() const;

    /// Centre of detector pixel (row, col) in the laboratory frame.
    Vec3 pixel_position(std::size_t row, std::size_t col) const;
    /// Signed unit step, in the laboratory frame, for increasing column / row index.
    Vec3 column_step() const;
    Vec3 row_step() const;

    /// Ratio of source-detector to source-axis distance along the central
    /// ray; 1 for parallel beams.
    double magnification() const;

    void validate() const;

    bool operator==(const AcquisitionGeometry&) const = default;
};

/// Voxel grid centred on the rotation axis plus `center_offset`. A zero
/// `voxel_num_z` marks a 2-D image.
struct ImageGeometry {
    std::size_t voxel_num_x = 1;
    std::size_t voxel_num_y = 1;
    std::size_t voxel_num_z = 0;
    double voxel_size_x = 1.0;
    double voxel_size_y = 1.0;
    double voxel_size_z = 1.0;
    Vec3 center_offset{0.0, 0.0, 0.0};
    std::vector<std::string> dimension_labels;

    int dimension() const { return voxel_num_z == 0 ? 2 : 3; }
    std::size_t extent(std::string_view label) const;
    std::vector<std::size_t> shape() const;
    std::size_t num_voxels() const;

    void validate() const;

    bool operator==(const ImageGeometry&) const = default;
};

using Geometry = std::variant<ImageGeometry, AcquisitionGeometry>;

const std::vector<std::string>& dimension_labels(const Geometry& g);
std::vector<std::size_t> geometry_shape(const Geometry& g);
void validate(const Geometry& g);

/// Optional placements overriding the default parallel-beam layout.
struct ParallelPlacement {
    std::optional<Vec3> ray_direction;
    std::optional<Vec3> detector_position;
    std::optional<Vec3> rotation_axis_position;
    std::optional<Vec3> rotation_axis_direction;
};

/// Parallel-beam geometry with the rotation axis through the origin and
/// perpendicular to the beam unless overridden. Angles are kept verbatim.
AcquisitionGeometry make_parallel_geometry(int dim, const Panel& panel, const AngleList& angles,
                                           const ParallelPlacement& placement = {});

struct ConePlacement {
    Vec3 source_position{0.0, -1.0, 0.0};
    Vec3 detector_position{0.0, 1.0, 0.0};
    Vec3 rotation_axis_position{0.0, 0.0, 0.0};
    Vec3 rotation_axis_direction{0.0, 0.0, 1.0};
    Vec3 detector_direction_x{1.0, 0.0, 0.0};
    Vec3 detector_direction_y{0.0, 0.0, 1.0};
};

/// Cone beam (dim 3) or fan beam (dim 2). The axis direction must already
/// be a unit vector; nothing is re-normalised.
AcquisitionGeometry make_cone_geometry(int dim, const ConePlacement& placement, const Panel& panel,
                                       const AngleList& angles);

ImageGeometry make_image_geometry(std::size_t nx, std::size_t ny, std::size_t nz = 0,
                                  double voxel_size = 1.0);

/// Grid matching the detector: nx = ny = horizontal pixels, nz = vertical
/// pixels, voxel size = pixel size over magnification.
ImageGeometry default_image_geometry(const AcquisitionGeometry& ag);

/// Golden-angle sequence k * (sqrt(5) - 1) / 2 * 180 degrees, k = 0..count-1.
std::vector<double> golden_angles(std::size_t count);
/// `count` angles from `start` to `stop`; numpy-style linspace.
std::vector<double> linspace(double start, double stop, std::size_t count, bool endpoint = true);

// Geometry bookkeeping used by slicing, reordering and the processors.

/// Geometry left after removing axis `label` at `index`; nullopt when the
/// remainder is no longer a meaningful geometry.
std::optional<Geometry> slice_geometry(const Geometry& g, std::string_view label, std::size_t index);

/// Geometry with its label order permuted.
Geometry reorder_geometry(const Geometry& g, const std::vector<std::string>& order);

/// Resample a spatial axis: new sample j sits at old fractional index
/// `first + step * j`, and there are `count` samples.
Geometry resample_axis(const Geometry& g, std::string_view label, std::size_t count, double first,
                       double step);

/// Replace the angle list (same unit).
AcquisitionGeometry with_angles(const AcquisitionGeometry& g, std::vector<double> angles);

/// Pure vector helpers.
double dot3(const Vec3& a, const Vec3& b);
Vec3 cross3(const Vec3& a, const Vec3& b);
double norm3(const Vec3& a);
Vec3 scaled3(const Vec3& a, double s);
Vec3 add3(const Vec3& a, const Vec3& b);
Vec3 sub3(const Vec3& a, const Vec3& b);

}  // namespace tomo
