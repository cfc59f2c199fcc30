#pragma once

#include <cstddef>
#include <functional>

#include "tomo/operator.hpp"

namespace tomo {

struct ProjectorOptions {
    enum class Storage { automatic, matrix, on_the_fly };
    /// `matrix` caches the intersection lengths as a sparse matrix;
    /// `on_the_fly` re-traces rays on every application; `automatic` caches
    /// when the estimated number of entries is at most `max_matrix_entries`.
    Storage storage = Storage::automatic;
    std::size_t max_matrix_entries = 8'000'000;
};

/// Ray-driven projector with exact (Siddon) intersection lengths. One ray
/// per detector pixel centre; parallel rays for parallel beams and
/// source-to-pixel rays for fan and cone beams. The adjoint applies the
/// transpose of the same weights. Throws GeometryError for incompatible
/// geometries or a source inside the volume.
Operator projector(const ImageGeometry& ig, const AcquisitionGeometry& ag, const ProjectorOptions& options = {});

/// Trace the ray for (angle, row, col) and report (voxel flat index,
/// length) pairs in order along the ray. Useful for diagnostics.
void trace_ray(const ImageGeometry& ig, const AcquisitionGeometry& ag, std::size_t angle, std::size_t row,
               std::size_t col, const std::function<void(std::size_t, double)>& visit);

}  // namespace tomo
