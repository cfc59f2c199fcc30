#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "tomo/labeled_array.hpp"

namespace tomo {

struct NormaliseResult {
    LabeledArray data;
    /// Entries whose flat - dark denominator was zero.
    std::size_t zero_denominators = 0;
};

/// (data - dark) / (flat - dark). Flat and dark either match the data or a
/// single projection (the data labels without "angle").
NormaliseResult normalise(const LabeledArray& data, const LabeledArray& flat, const LabeledArray& dark,
                          double fill = 1.0);

/// Half-open index range [start, stop) with a step or bin width; a missing
/// stop means the full extent.
struct AxisRange {
    std::size_t start = 0;
    std::optional<std::size_t> stop;
    std::size_t step = 1;
};
using Roi = std::map<std::string, AxisRange, std::less<>>;

/// Average non-overlapping windows of `step` samples; a trailing remainder
/// is dropped. Pixel and voxel sizes grow by the bin width; binned angles
/// are the window means.
LabeledArray bin(const LabeledArray& data, const Roi& roi);

/// Strided subset; the geometry follows (angle lists subset identically).
LabeledArray slice(const LabeledArray& data, const Roi& roi);

struct PadWidth {
    std::size_t before = 0;
    std::size_t after = 0;
};
struct PadConstant {
    double value = 0.0;
};
struct PadEdge {};
using PadMode = std::variant<PadConstant, PadEdge>;

/// Extend spatial axes; the angle axis cannot be padded.
LabeledArray pad(const LabeledArray& data, const std::map<std::string, PadWidth, std::less<>>& widths,
                 const PadMode& mode = PadConstant{});

struct MaskThreshold {
    double lower;
    double upper;
};
struct MaskNonFinite {};
using MaskMethod = std::variant<MaskThreshold, MaskNonFinite>;

/// 1 keeps an entry, 0 drops it. Thresholds are inclusive and non-finite
/// entries are always dropped.
LabeledArray make_mask(const LabeledArray& data, const MaskMethod& method);

struct FillValue {
    double value = 0.0;
};
/// Mean of kept entries within +-2 samples along every axis, falling back
/// to the mean of all kept entries (or 0).
struct FillLocalMean {};
using MaskFill = std::variant<FillValue, FillLocalMean>;

LabeledArray apply_mask(const LabeledArray& data, const LabeledArray& mask, const MaskFill& fill = FillValue{});

struct CentreOfRotation {
    LabeledArray data;  ///< input values with corrected geometry
    /// Detector-plane offset of the rotation axis in pixels along the
    /// column direction.
    double offset_pixels = 0.0;
    std::size_t angle_index_a = 0;
    std::size_t angle_index_b = 0;
};

/// Estimate the axis offset by cross-correlating a projection row with the
/// flipped opposing one (180 degrees apart within 0.1 degree) and fitting a
/// parabola to the peak. `slice_index` selects the detector row of 3-D
/// data (default: central row).
CentreOfRotation centre_of_rotation_xcorr(const LabeledArray& data,
                                          std::optional<std::size_t> slice_index = std::nullopt);

/// Suppress constant detector stripes: the mean over angles of each
/// detector column minus its moving median (odd width >= 3) is subtracted
/// from every angle.
LabeledArray ring_remove(const LabeledArray& data, std::size_t width = 11);

}  // namespace tomo
