#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "tomo/labeled_array.hpp"

namespace tomo {

enum class FilterKind { ram_lak, shepp_logan, cosine, hann, hamming };

std::string_view to_string(FilterKind kind);
FilterKind parse_filter_kind(std::string_view text);

struct FilterSpec {
    FilterKind kind = FilterKind::ram_lak;
    /// Fraction of the Nyquist frequency in (0, 1].
    double cutoff = 1.0;

    void validate() const;
};

/// Real frequency response H[k], k = 0..padded/2, of the ramp filter with
/// the filter window for rows sampled at `spacing`. The spatially band
/// limited ramp kernel is transformed and the DC term is zero.
std::vector<double> filter_response(const FilterSpec& spec, std::size_t padded, double spacing);

/// Padded row length: eight times the next power of two of `n`, at least
/// 64. The wide padding keeps the bias of the zeroed DC term small.
std::size_t padded_length(std::size_t n);

/// Circular filtering of one row whose length is already the (even)
/// padded length; no further padding is added.
void filter_row_circular(std::span<double> row, const FilterSpec& spec, double spacing);

/// Filter every detector row of a parallel-beam sinogram. Labels must
/// contain "horizontal"; other axes are iterated over.
LabeledArray filter_projections(const LabeledArray& data, const FilterSpec& spec);

struct AngularWeights {
    std::vector<double> weights;  ///< radians, one per angle
    /// True when the angles leave a gap so large that the set was treated
    /// as a limited-angle scan.
    bool limited_angle = false;
};

/// Half the gap to each neighbour, with angles taken modulo 180 degrees
/// and wrapped, so the weights sum to pi for any set covering the half
/// circle. Input is in radians.
AngularWeights angular_weights(const std::vector<double>& angles_rad);

struct FbpReport {
    bool limited_angle = false;
};

/// Filtered back-projection of parallel-beam data onto `ig`. 3-D data is
/// reconstructed slice by slice through the parallel projector. Throws
/// GeometryError for fan or cone beams or missing geometry.
LabeledArray fbp_parallel(const LabeledArray& data, const ImageGeometry& ig, const FilterSpec& filter = {},
                          FbpReport* report = nullptr);

}  // namespace tomo
