#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tomo/algorithms.hpp"
#include "tomo/labeled_array.hpp"
#include "tomo/sim.hpp"

namespace tomo {

struct PipelineOptions {
    /// "dotted.path=value" leaf overrides; values parse as JSON when they
    /// can, otherwise as strings. Numeric segments index arrays.
    std::vector<std::string> overrides;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    /// Per-stage timing and final metrics; nullptr for silence.
    std::ostream* log = nullptr;
};

struct PipelineResult {
    /// Data after the last stage.
    LabeledArray data;
    /// Default-constructed (0-D) when the config has no reconstruction.
    LabeledArray reconstruction;
    std::optional<Quality> quality;
    std::vector<HistoryEntry> history;
    std::vector<std::filesystem::path> outputs;
};

/// Parse, apply overrides and validate a config without computing
/// anything. Throws ConfigError naming the offending field.
void validate_pipeline(const std::filesystem::path& config, const std::vector<std::string>& overrides = {});

/// Validate, then run input, stages, reconstruction and outputs in order.
/// Failures inside a stage carry the stage name in their message and keep
/// their error type (IoError, GeometryError, ...).
PipelineResult run_pipeline(const std::filesystem::path& config, const PipelineOptions& options = {});

/// Text report of the acquisition geometry declared by a config. With
/// `schematic`, a top-view PNG sketch is written as well.
std::string describe_geometry(const std::filesystem::path& config, const std::vector<std::string>& overrides = {},
                              const std::optional<std::filesystem::path>& schematic = std::nullopt);

/// Text report for a geometry.
std::string describe_geometry(const AcquisitionGeometry& ag);

/// Supported input/output formats, stage types, solvers and filters.
std::string describe_formats();

}  // namespace tomo
