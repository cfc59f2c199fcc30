#include "tomo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "tomo/error.hpp"
#include "tomo/fbp.hpp"
#include "tomo/io.hpp"
#include "tomo/parallel.hpp"
#include "tomo/processors.hpp"
#include "tomo/projector.hpp"

namespace tomo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- config access

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

std::string type_name(const json& j) { return j.type_name(); }

/// Object view that records which keys were read, so that unknown keys
/// can be rejected.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object, got " + type_name(j_));
    }

    const std::string& path() const { return path_; }
    std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) fail(at(key), "missing required field");
        return j_.at(key);
    }
    Node object(const std::string& key) { return Node(raw(key), at(key)); }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) fail(at(key), "expected a number, got " + type_name(v));
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(at(key), "must be finite");
        return d;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }
    std::optional<double> optional_number(const std::string& key) {
        if (!has(key)) {
            used_.insert(key);
            return std::nullopt;
        }
        return number(key);
    }
    double positive(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v > 0.0)) fail(at(key), "must be > 0");
        return v;
    }

    std::size_t count(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            fail(at(key), "expected a non-negative integer, got " + v.dump());
        return v.get<std::size_t>();
    }
    std::size_t count(const std::string& key, std::size_t fallback) { return has(key) ? count(key) : mark(key, fallback); }

    std::string text(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) fail(at(key), "expected a string, got " + type_name(v));
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) {
        return has(key) ? text(key) : mark(key, fallback);
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return mark(key, fallback);
        const json& v = raw(key);
        if (!v.is_boolean()) fail(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = raw(key);
        if (v.is_number()) return {number(key)};
        if (!v.is_array()) fail(at(key), "expected a number or a list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(at(key) + "." + std::to_string(i), "expected a number");
            out.push_back(v[i].get<double>());
            if (!std::isfinite(out.back())) fail(at(key) + "." + std::to_string(i), "must be finite");
        }
        return out;
    }

    Vec3 vec3(const std::string& key) {
        const auto v = numbers(key);
        if (v.size() != 3) fail(at(key), "expected 3 numbers");
        return {v[0], v[1], v[2]};
    }
    std::optional<Vec3> optional_vec3(const std::string& key) {
        if (!has(key)) {
            used_.insert(key);
            return std::nullopt;
        }
        return vec3(key);
    }

    std::vector<std::string> strings(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected a list of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string()) fail(at(key) + "." + std::to_string(i), "expected a string");
            out.push_back(v[i].get<std::string>());
        }
        return out;
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : j_.items()) out.push_back(k);
        return out;
    }

    /// Reject keys that were never read.
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (used_.count(k) == 0) fail(at(k), "unknown field");
    }

    /// Exactly one of `choices` must be present; returns it.
    std::string one_of(const std::vector<std::string>& choices) {
        std::string found;
        for (const auto& c : choices)
            if (j_.contains(c)) {
                if (!found.empty()) fail(path_, "fields '" + found + "' and '" + c + "' are mutually exclusive");
                found = c;
            }
        if (found.empty()) {
            std::string list;
            for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
            fail(path_, "expected one of: " + list);
        }
        return found;
    }

private:
    template <class T>
    T mark(const std::string& key, T value) {
        used_.insert(key);
        return value;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class T>
T checked(const std::string& path, const std::function<T()>& make) {
    try {
        return make();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(path, e.what());
    }
}

// ---------------------------------------------------------------- geometry

std::vector<double> parse_angles(Node n) {
    const std::string kind = n.one_of({"linspace", "golden", "values"});
    std::vector<double> out;
    if (kind == "linspace") {
        const auto v = n.numbers("linspace");
        if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2]))
            fail(n.at("linspace"), "expected [start, stop, count] with an integer count >= 1");
        out = linspace(v[0], v[1], static_cast<std::size_t>(v[2]), n.flag("endpoint", false));
    } else if (kind == "golden") {
        const std::size_t count = n.count("golden");
        if (count == 0) fail(n.at("golden"), "must be >= 1");
        out = golden_angles(count);
    } else {
        out = n.numbers("values");
        if (out.empty()) fail(n.at("values"), "angle list is empty");
    }
    n.finish();
    return out;
}

AcquisitionGeometry parse_geometry(Node n) {
    const std::string beam_text = n.text("beam");
    BeamType beam;
    try {
        beam = parse_beam_type(beam_text);
    } catch (const Error&) {
        fail(n.at("beam"), "unknown beam type '" + beam_text + "' (expected parallel2D, parallel3D, fan or cone)");
    }
    const int dim = beam == BeamType::parallel2D || beam == BeamType::fan ? 2 : 3;

    Panel panel;
    {
        Node p = n.object("panel");
        const auto pixels = p.numbers("num_pixels");
        if (pixels.empty() || pixels.size() > 2 || static_cast<std::size_t>(dim) < pixels.size())
            fail(p.at("num_pixels"), dim == 2 ? "expected one pixel count" : "expected [horizontal, vertical] counts");
        for (double v : pixels)
            if (v < 1 || v != std::floor(v)) fail(p.at("num_pixels"), "pixel counts must be integers >= 1");
        panel.num_pixels = {static_cast<std::size_t>(pixels[0]),
                            pixels.size() > 1 ? static_cast<std::size_t>(pixels[1]) : (dim == 2 ? 1 : static_cast<std::size_t>(pixels[0]))};
        const auto size = p.has("pixel_size") ? p.numbers("pixel_size") : std::vector<double>{1.0};
        if (size.empty() || size.size() > 2) fail(p.at("pixel_size"), "expected one or two sizes");
        panel.pixel_size = {size[0], size.size() > 1 ? size[1] : size[0]};
        const std::string origin = p.text("origin", "bottom-left");
        try {
            panel.origin = parse_panel_origin(origin);
        } catch (const Error&) {
            fail(p.at("origin"), "unknown panel origin '" + origin + "'");
        }
        p.finish();
    }

    AngleList angles;
    angles.values = parse_angles(n.object("angles"));
    const std::string unit = n.text("angle_unit", "degree");
    try {
        angles.unit = parse_angle_unit(unit);
    } catch (const Error&) {
        fail(n.at("angle_unit"), "unknown angle unit '" + unit + "'");
    }

    std::optional<Vec3> axis_direction = n.optional_vec3("rotation_axis_direction");
    if (n.has("tilt_deg")) {
        if (axis_direction) fail(n.at("tilt_deg"), "give either tilt_deg or rotation_axis_direction");
        const double t = n.number("tilt_deg") * std::numbers::pi / 180.0;
        axis_direction = Vec3{0.0, -std::sin(t), std::cos(t)};
    } else {
        n.optional_number("tilt_deg");
    }

    AcquisitionGeometry ag = checked<AcquisitionGeometry>(n.path(), [&] {
        if (beam == BeamType::parallel2D || beam == BeamType::parallel3D) {
            ParallelPlacement pp;
            pp.ray_direction = n.optional_vec3("ray_direction");
            pp.detector_position = n.optional_vec3("detector_position");
            pp.rotation_axis_position = n.optional_vec3("rotation_axis_position");
            pp.rotation_axis_direction = axis_direction;
            return make_parallel_geometry(dim, panel, angles, pp);
        }
        ConePlacement cp;
        cp.source_position = n.vec3("source_position");
        cp.detector_position = n.vec3("detector_position");
        if (auto v = n.optional_vec3("rotation_axis_position")) cp.rotation_axis_position = *v;
        if (axis_direction) cp.rotation_axis_direction = *axis_direction;
        if (auto v = n.optional_vec3("detector_direction_x")) cp.detector_direction_x = *v;
        if (auto v = n.optional_vec3("detector_direction_y")) cp.detector_direction_y = *v;
        return make_cone_geometry(dim, cp, panel, angles);
    });
    n.finish();
    return ag;
}

/// Image grid spec; voxel_num lists x, y and optionally z.
std::optional<ImageGeometry> parse_image(Node& parent, const std::string& key) {
    if (!parent.has(key)) {
        parent.optional_number(key);
        return std::nullopt;
    }
    Node n = parent.object(key);
    const auto num = n.numbers("voxel_num");
    if (num.size() < 2 || num.size() > 3) fail(n.at("voxel_num"), "expected [nx, ny] or [nx, ny, nz]");
    for (double v : num)
        if (v < 1 || v != std::floor(v)) fail(n.at("voxel_num"), "voxel counts must be integers >= 1");
    const auto size = n.has("voxel_size") ? n.numbers("voxel_size") : std::vector<double>{1.0};
    if (size.empty() || size.size() > 3) fail(n.at("voxel_size"), "expected one to three sizes");
    ImageGeometry ig = make_image_geometry(static_cast<std::size_t>(num[0]), static_cast<std::size_t>(num[1]),
                                           num.size() > 2 ? static_cast<std::size_t>(num[2]) : 0, 1.0);
    ig.voxel_size_x = size[0];
    ig.voxel_size_y = size.size() > 1 ? size[1] : size[0];
    ig.voxel_size_z = size.size() > 2 ? size[2] : size[0];
    if (auto c = n.optional_vec3("center_offset")) ig.center_offset = *c;
    checked<int>(n.path(), [&] {
        ig.validate();
        return 0;
    });
    n.finish();
    return ig;
}

// ---------------------------------------------------------------- plan types

enum class InputKind { phantom, native, tiff };

struct InputPlan {
    InputKind kind = InputKind::phantom;
    PhantomSpec phantom;
    std::optional<ImageGeometry> phantom_image;
    std::optional<AcquisitionGeometry> geometry;
    std::optional<NoiseModel> noise;
    std::optional<double> transmission;
    ProjectorOptions projector;
    fs::path path;
    std::vector<std::string> labels;
};

using StageFn = std::function<LabeledArray(const LabeledArray&, std::ostream*)>;

struct StagePlan {
    std::string name;
    std::string type;
    StageFn run;
};

enum class Fidelity { least_squares, kullback_leibler };
enum class Regulariser { none, tv, tikhonov };

struct ReconPlan {
    std::string method;
    FilterSpec filter;
    std::optional<ImageGeometry> image;
    std::size_t iterations = 0;
    std::size_t log_interval = 0;
    Fidelity fidelity = Fidelity::least_squares;
    Regulariser regulariser = Regulariser::none;
    double alpha = 0.0;
    std::map<std::string, double> alpha_axes;
    bool tikhonov_identity = false;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double eta = 0.0;
    int fgp_iterations = 100;
    std::optional<double> sigma, tau, step;
    bool backtracking = false;
    double relaxation = 1.0;
    std::optional<double> tolerance;
    ProjectorOptions projector;
};

struct OutputPlan {
    std::string type;
    std::string source;
    fs::path path;
    std::string axis;
    std::string prefix;
    std::vector<std::pair<std::string, std::size_t>> slice;
    std::optional<std::pair<double, double>> range;
    Colormap colormap = Colormap::gray;
    std::string reference;
    std::optional<double> peak;
};

struct Plan {
    fs::path base;
    fs::path output_dir;
    std::uint64_t seed = 0;
    std::optional<int> threads;
    InputPlan input;
    std::vector<StagePlan> stages;
    std::optional<ReconPlan> recon;
    std::vector<OutputPlan> outputs;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

// ---------------------------------------------------------------- input

PhantomSpec parse_phantom(Node n) {
    const std::string kind = n.text("kind");
    PhantomSpec spec;
    if (kind == "shepp_logan_2d") {
        spec = SheppLogan2D{};
    } else if (kind == "shepp_logan_3d") {
        spec = SheppLogan3D{};
    } else if (kind == "disk") {
        Disk d;
        d.value = n.number("value", d.value);
        d.radius = n.number("radius", d.radius);
        spec = d;
    } else if (kind == "wire_in_cylinder") {
        WireInCylinder w;
        w.cylinder_value = n.number("cylinder_value", w.cylinder_value);
        w.wire_value = n.number("wire_value", w.wire_value);
        w.cylinder_radius = n.number("cylinder_radius", w.cylinder_radius);
        w.wire_radius = n.number("wire_radius", w.wire_radius);
        w.wire_offset = n.number("wire_offset", w.wire_offset);
        spec = w;
    } else {
        fail(n.at("kind"), "unknown phantom '" + kind + "' (expected shepp_logan_2d, shepp_logan_3d, disk or wire_in_cylinder)");
    }
    n.finish();
    return spec;
}

NoiseModel parse_noise(Node n) {
    const std::string kind = n.one_of({"gaussian", "poisson", "poisson_counts"});
    NoiseModel model;
    if (kind == "gaussian") {
        const double sigma = n.number("gaussian");
        if (sigma < 0.0) fail(n.at("gaussian"), "sigma must be >= 0");
        model = GaussianNoise{sigma};
    } else if (kind == "poisson") {
        const double i0 = n.number("poisson");
        if (!(i0 > 0.0)) fail(n.at("poisson"), "incident intensity must be > 0");
        model = PoissonNoise{i0};
    } else {
        const double s = n.number("poisson_counts");
        if (!(s > 0.0)) fail(n.at("poisson_counts"), "count scale must be > 0");
        model = PoissonCounts{s};
    }
    n.finish();
    return model;
}

ProjectorOptions parse_projector(Node& n) {
    ProjectorOptions o;
    const std::string s = n.text("projector", "automatic");
    if (s == "automatic") o.storage = ProjectorOptions::Storage::automatic;
    else if (s == "matrix") o.storage = ProjectorOptions::Storage::matrix;
    else if (s == "on_the_fly") o.storage = ProjectorOptions::Storage::on_the_fly;
    else fail(n.at("projector"), "unknown projector storage '" + s + "' (expected automatic, matrix or on_the_fly)");
    return o;
}

InputPlan parse_input(Node n, const fs::path& base) {
    InputPlan in;
    const std::string kind = n.one_of({"phantom", "native", "tiff"});
    if (kind == "phantom") {
        in.kind = InputKind::phantom;
        in.phantom = parse_phantom(n.object("phantom"));
        in.phantom_image = parse_image(n, "image");
        in.geometry = parse_geometry(n.object("geometry"));
        if (n.has("noise")) in.noise = parse_noise(n.object("noise"));
        else n.optional_number("noise");
        if (n.has("transmission")) {
            Node t = n.object("transmission");
            in.transmission = t.positive("incident", 1.0);
            t.finish();
        } else {
            n.optional_number("transmission");
        }
        in.projector = parse_projector(n);
    } else if (kind == "native") {
        in.kind = InputKind::native;
        in.path = resolve(base, n.text("native"));
    } else {
        in.kind = InputKind::tiff;
        in.path = resolve(base, n.text("tiff"));
        in.labels = n.strings("labels");
        if (in.labels.size() != 3) fail(n.at("labels"), "a TIFF stack needs three labels");
        if (n.has("geometry")) in.geometry = parse_geometry(n.object("geometry"));
        else n.optional_number("geometry");
    }
    n.finish();
    return in;
}

// ---------------------------------------------------------------- stages

Roi parse_roi(Node n) {
    Roi roi;
    for (const auto& label : n.keys()) {
        Node r = n.object(label);
        AxisRange range;
        range.start = r.count("start", 0);
        if (r.has("stop")) range.stop = r.count("stop");
        else r.optional_number("stop");
        range.step = r.count("step", 1);
        if (range.step == 0) fail(r.at("step"), "must be >= 1");
        r.finish();
        roi.emplace(label, range);
    }
    n.finish();
    return roi;
}

/// Flat or dark reference: a number, a native file or the mean of a region
/// of the data itself.
using Reference = std::function<LabeledArray(const LabeledArray&)>;

Reference parse_reference(Node& n, const std::string& key, double fallback, const fs::path& base) {
    if (!n.has(key)) {
        n.optional_number(key);
        return [fallback](const LabeledArray& d) { return LabeledArray(ArraySpec(d.labels(), d.shape()), fallback); };
    }
    const json& v = n.raw(key);
    if (v.is_number()) {
        const double value = n.number(key);
        return [value](const LabeledArray& d) { return LabeledArray(ArraySpec(d.labels(), d.shape()), value); };
    }
    if (v.is_string()) {
        const fs::path path = resolve(base, v.get<std::string>());
        return [path](const LabeledArray&) { return read_native(path); };
    }
    Node r = n.object(key);
    const Roi roi = parse_roi(r.object("roi"));
    r.finish();
    return [roi](const LabeledArray& d) {
        const double m = slice(d, roi).mean();
        return LabeledArray(ArraySpec(d.labels(), d.shape()), m);
    };
}

StagePlan parse_stage(Node n, const fs::path& base) {
    StagePlan s;
    s.type = n.text("type");
    s.name = n.text("name", s.type);
    if (s.type == "normalise") {
        auto flat = parse_reference(n, "flat", 1.0, base);
        auto dark = parse_reference(n, "dark", 0.0, base);
        const double fill = n.number("fill", 1.0);
        s.run = [flat, dark, fill](const LabeledArray& d, std::ostream* log) {
            auto r = normalise(d, flat(d), dark(d), fill);
            if (log && r.zero_denominators > 0) *log << "  " << r.zero_denominators << " zero denominators filled\n";
            return std::move(r.data);
        };
    } else if (s.type == "absorption") {
        const double floor = n.positive("min_value", 1e-6);
        s.run = [floor](const LabeledArray& d, std::ostream*) {
            LabeledArray out = d;
            for (double& v : out.values()) v = -std::log(std::max(v, floor));
            return out;
        };
    } else if (s.type == "centre_of_rotation") {
        std::optional<std::size_t> index;
        if (n.has("slice_index")) index = n.count("slice_index");
        else n.optional_number("slice_index");
        s.run = [index](const LabeledArray& d, std::ostream* log) {
            auto r = centre_of_rotation_xcorr(d, index);
            if (log) {
                char line[128];
                std::snprintf(line, sizeof line, "  offset %.4f px (angles %zu and %zu)\n", r.offset_pixels,
                              r.angle_index_a, r.angle_index_b);
                *log << line;
            }
            return std::move(r.data);
        };
    } else if (s.type == "slice" || s.type == "bin") {
        const Roi roi = parse_roi(n.object("roi"));
        const bool binning = s.type == "bin";
        s.run = [roi, binning](const LabeledArray& d, std::ostream*) { return binning ? bin(d, roi) : slice(d, roi); };
    } else if (s.type == "pad") {
        std::map<std::string, PadWidth, std::less<>> widths;
        Node w = n.object("widths");
        for (const auto& label : w.keys()) {
            const auto v = w.numbers(label);
            if (v.size() != 2 || v[0] < 0 || v[1] < 0 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
                fail(w.at(label), "expected [before, after] non-negative integers");
            widths[label] = PadWidth{static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1])};
        }
        w.finish();
        const std::string mode = n.text("mode", "constant");
        PadMode pm;
        if (mode == "constant") pm = PadConstant{n.number("value", 0.0)};
        else if (mode == "edge") pm = PadEdge{};
        else fail(n.at("mode"), "unknown pad mode '" + mode + "' (expected constant or edge)");
        s.run = [widths, pm](const LabeledArray& d, std::ostream*) { return pad(d, widths, pm); };
    } else if (s.type == "mask") {
        const std::string method = n.text("method", "threshold");
        MaskMethod mm;
        if (method == "threshold") {
            const double lo = n.number("lower", -std::numeric_limits<double>::max());
            const double hi = n.number("upper", std::numeric_limits<double>::max());
            if (!(lo <= hi)) fail(n.at("lower"), "lower must not exceed upper");
            mm = MaskThreshold{lo, hi};
        } else if (method == "nonfinite") {
            mm = MaskNonFinite{};
        } else {
            fail(n.at("method"), "unknown mask method '" + method + "' (expected threshold or nonfinite)");
        }
        const std::string fill = n.text("fill", "value");
        MaskFill mf;
        if (fill == "value") mf = FillValue{n.number("value", 0.0)};
        else if (fill == "local_mean") mf = FillLocalMean{};
        else fail(n.at("fill"), "unknown mask fill '" + fill + "' (expected value or local_mean)");
        s.run = [mm, mf](const LabeledArray& d, std::ostream*) { return apply_mask(d, make_mask(d, mm), mf); };
    } else if (s.type == "ring_remove") {
        const std::size_t width = n.count("width", 11);
        if (width < 3 || width % 2 == 0) fail(n.at("width"), "must be odd and >= 3");
        s.run = [width](const LabeledArray& d, std::ostream*) { return ring_remove(d, width); };
    } else {
        fail(n.at("type"), "unknown stage '" + s.type +
                               "' (expected normalise, absorption, centre_of_rotation, slice, bin, pad, mask or ring_remove)");
    }
    n.finish();
    return s;
}

// ---------------------------------------------------------------- recon

const std::set<std::string> solvers{"cgls", "sirt", "gd", "fista", "pdhg", "ladmm"};

ReconPlan parse_recon(Node n) {
    ReconPlan r;
    r.method = n.text("method");
    r.image = parse_image(n, "image");
    r.projector = parse_projector(n);
    if (r.method == "fbp") {
        const std::string f = n.text("filter", "ram-lak");
        try {
            r.filter.kind = parse_filter_kind(f);
        } catch (const Error& e) {
            fail(n.at("filter"), e.what());
        }
        r.filter.cutoff = n.number("cutoff", 1.0);
        if (!(r.filter.cutoff > 0.0 && r.filter.cutoff <= 1.0)) fail(n.at("cutoff"), "must lie in (0, 1]");
        n.finish();
        return r;
    }
    if (solvers.count(r.method) == 0)
        fail(n.at("method"), "unknown solver '" + r.method + "' (expected fbp, cgls, sirt, gd, fista, pdhg or ladmm)");

    r.iterations = n.count("iterations");
    r.log_interval = n.count("log_interval", 0);

    if (n.has("objective")) {
        Node o = n.object("objective");
        const std::string fid = o.text("fidelity", "least_squares");
        if (fid == "least_squares") r.fidelity = Fidelity::least_squares;
        else if (fid == "kullback_leibler") r.fidelity = Fidelity::kullback_leibler;
        else fail(o.at("fidelity"), "unknown fidelity '" + fid + "' (expected least_squares or kullback_leibler)");
        r.eta = o.number("eta", 0.0);
        if (r.eta < 0.0) fail(o.at("eta"), "must be >= 0");

        const std::string reg = o.text("regulariser", "none");
        if (reg == "none") r.regulariser = Regulariser::none;
        else if (reg == "tv") r.regulariser = Regulariser::tv;
        else if (reg == "tikhonov") r.regulariser = Regulariser::tikhonov;
        else fail(o.at("regulariser"), "unknown regulariser '" + reg + "' (expected none, tv or tikhonov)");

        if (o.has("alpha") && o.raw("alpha").is_object()) {
            Node a = o.object("alpha");
            for (const auto& label : a.keys()) {
                const double v = a.number(label);
                if (v < 0.0) fail(a.at(label), "must be >= 0");
                r.alpha_axes[label] = v;
            }
            a.finish();
            if (r.regulariser != Regulariser::tikhonov) fail(o.at("alpha"), "per-axis weights need the tikhonov regulariser");
        } else {
            r.alpha = o.number("alpha", 0.0);
            if (r.alpha < 0.0) fail(o.at("alpha"), "must be >= 0");
        }
        const std::string op = o.text("operator", "gradient");
        if (op == "identity") r.tikhonov_identity = true;
        else if (op != "gradient") fail(o.at("operator"), "unknown operator '" + op + "' (expected gradient or identity)");
        if (r.tikhonov_identity && !r.alpha_axes.empty()) fail(o.at("operator"), "identity takes a scalar alpha");
        if (r.regulariser != Regulariser::none && r.alpha == 0.0 && r.alpha_axes.empty())
            fail(o.at("alpha"), "a regulariser needs alpha > 0");
        r.lower = o.number("lower", r.lower);
        r.upper = o.number("upper", r.upper);
        if (!(r.lower <= r.upper)) fail(o.at("lower"), "lower must not exceed upper");
        const std::size_t fgp = o.count("fgp_iterations", 100);
        if (fgp < 1) fail(o.at("fgp_iterations"), "must be >= 1");
        r.fgp_iterations = static_cast<int>(fgp);
        o.finish();
    } else {
        n.optional_number("objective");
    }
    r.sigma = n.optional_number("sigma");
    r.tau = n.optional_number("tau");
    r.step = n.optional_number("step");
    for (auto* v : {&r.sigma, &r.tau, &r.step})
        if (*v && !(**v > 0.0)) fail(n.path(), "step sizes must be > 0");
    r.backtracking = n.flag("backtracking", false);
    r.relaxation = n.positive("relaxation", 1.0);
    r.tolerance = n.optional_number("tolerance");

    const bool bounded = std::isfinite(r.lower) || std::isfinite(r.upper);
    const std::string where = n.at("method");
    if (r.fidelity == Fidelity::kullback_leibler && r.method != "pdhg" && r.method != "ladmm")
        fail(where, "kullback_leibler needs pdhg or ladmm");
    if (r.regulariser == Regulariser::tv && (r.method == "cgls" || r.method == "sirt" || r.method == "gd"))
        fail(where, r.method + " cannot handle the non-smooth tv regulariser");
    if (r.method == "sirt" && r.regulariser != Regulariser::none) fail(where, "sirt takes no regulariser");
    if (bounded && (r.method == "cgls" || r.method == "gd")) fail(where, r.method + " cannot enforce bounds");
    if (r.sigma && r.method != "pdhg" && r.method != "ladmm") fail(n.at("sigma"), "only pdhg and ladmm take sigma");
    if (r.tau && r.method != "pdhg" && r.method != "ladmm") fail(n.at("tau"), "only pdhg and ladmm take tau");
    if (r.step && r.method != "gd" && r.method != "fista") fail(n.at("step"), "only gd and fista take a step");
    if (r.backtracking && r.method != "gd") fail(n.at("backtracking"), "only gd backtracks");
    if (r.tolerance && r.method != "cgls") fail(n.at("tolerance"), "only cgls takes a tolerance");
    n.finish();
    return r;
}

// ---------------------------------------------------------------- outputs

OutputPlan parse_output(Node n, const fs::path& out_dir) {
    OutputPlan o;
    o.type = n.text("type");
    o.source = n.text("source", o.type == "metrics" ? "recon" : "recon");
    if (o.type == "native") {
        o.path = resolve(out_dir, n.text("path"));
    } else if (o.type == "tiff") {
        o.path = resolve(out_dir, n.text("dir"));
        o.axis = n.text("axis", "");
        o.prefix = n.text("prefix", "slice");
    } else if (o.type == "png") {
        o.path = resolve(out_dir, n.text("path"));
        if (n.has("slice")) {
            Node s = n.object("slice");
            for (const auto& label : s.keys()) o.slice.emplace_back(label, s.count(label));
            s.finish();
        } else {
            n.optional_number("slice");
        }
        if (n.has("range")) {
            const auto r = n.numbers("range");
            if (r.size() != 2 || !(r[0] < r[1])) fail(n.at("range"), "expected [lo, hi] with lo < hi");
            o.range = std::make_pair(r[0], r[1]);
        } else {
            n.optional_number("range");
        }
        const std::string map = n.text("colormap", "gray");
        try {
            o.colormap = parse_colormap(map);
        } catch (const Error& e) {
            fail(n.at("colormap"), e.what());
        }
    } else if (o.type == "history_csv") {
        o.path = resolve(out_dir, n.text("path"));
    } else if (o.type == "metrics") {
        o.reference = n.text("reference", "phantom");
        if (n.has("path")) o.path = resolve(out_dir, n.text("path"));
        else n.optional_number("path");
        o.peak = n.optional_number("peak");
    } else {
        fail(n.at("type"), "unknown output '" + o.type + "' (expected native, tiff, png, history_csv or metrics)");
    }
    n.finish();
    return o;
}

// ---------------------------------------------------------------- load

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &root;
    std::size_t start = 0;
    std::string walked;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("--set '" + assignment + "': empty path segment");
        walked += (walked.empty() ? "" : ".") + part;
        json* next = nullptr;
        if (node->is_array()) {
            if (part.find_first_not_of("0123456789") != std::string::npos)
                throw ConfigError("--set " + walked + ": expected an array index");
            const std::size_t i = std::stoul(part);
            if (i >= node->size()) throw ConfigError("--set " + walked + ": index out of range");
            next = &(*node)[i];
        } else if (node->is_object() || node->is_null()) {
            next = &(*node)[part];
        } else {
            throw ConfigError("--set " + walked + ": cannot descend into a " + std::string(node->type_name()));
        }
        if (dot == std::string::npos) {
            *next = value;
            return;
        }
        node = next;
        start = dot + 1;
    }
}

json load_json(const fs::path& config, const std::vector<std::string>& overrides) {
    const std::string text = read_text(config);
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(config.string() + ": malformed config: " + e.what());
    }
    if (!root.is_object()) throw ConfigError(config.string() + ": top level must be an object");
    for (const auto& o : overrides) apply_override(root, o);
    return root;
}

Plan make_plan(const fs::path& config, const std::vector<std::string>& overrides) {
    const json root = load_json(config, overrides);
    Plan plan;
    plan.base = config.parent_path().empty() ? fs::path(".") : config.parent_path();
    Node n(root, "");
    plan.seed = n.count("seed", 0);
    if (n.has("threads")) {
        const std::size_t t = n.count("threads");
        if (t < 1) fail("threads", "must be >= 1");
        plan.threads = static_cast<int>(t);
    } else {
        n.optional_number("threads");
    }
    plan.output_dir = n.has("output_dir") ? resolve(plan.base, n.text("output_dir")) : plan.base;
    if (!n.has("output_dir")) n.optional_number("output_dir");

    plan.input = parse_input(n.object("input"), plan.base);

    std::set<std::string> names{"input"};
    if (plan.input.kind == InputKind::phantom) names.insert("phantom");
    if (n.has("stages")) {
        const json& stages = n.raw("stages");
        if (!stages.is_array()) fail("stages", "expected a list");
        for (std::size_t i = 0; i < stages.size(); ++i) {
            StagePlan s = parse_stage(Node(stages[i], "stages." + std::to_string(i)), plan.base);
            if (s.name == "recon" || !names.insert(s.name).second)
                fail("stages." + std::to_string(i) + ".name", "duplicate or reserved stage name '" + s.name + "'");
            plan.stages.push_back(std::move(s));
        }
    } else {
        n.optional_number("stages");
    }
    names.insert("data");

    if (n.has("recon")) {
        plan.recon = parse_recon(n.object("recon"));
        names.insert("recon");
    } else {
        n.optional_number("recon");
    }

    if (n.has("outputs")) {
        const json& outs = n.raw("outputs");
        if (!outs.is_array()) fail("outputs", "expected a list");
        for (std::size_t i = 0; i < outs.size(); ++i) {
            const std::string path = "outputs." + std::to_string(i);
            OutputPlan o = parse_output(Node(outs[i], path), plan.output_dir);
            if (o.type != "history_csv" && o.type != "metrics" && names.count(o.source) == 0)
                fail(path + ".source", "refers to undeclared name '" + o.source + "'");
            if (o.type == "metrics") {
                if (names.count(o.source) == 0) fail(path + ".source", "refers to undeclared name '" + o.source + "'");
                if (o.reference == "phantom" && plan.input.kind != InputKind::phantom)
                    fail(path + ".reference", "'phantom' needs a phantom input");
            }
            if (o.type == "history_csv" && (!plan.recon || plan.recon->method == "fbp"))
                fail(path, "history_csv needs an iterative reconstruction");
            plan.outputs.push_back(std::move(o));
        }
    } else {
        n.optional_number("outputs");
    }
    n.finish();
    return plan;
}

// ---------------------------------------------------------------- execution

template <class F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
    const std::string prefix = "stage '" + stage + "': ";
    try {
        return body();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(prefix + e.what());
    } catch (const GeometryError& e) {
        throw GeometryError(prefix + e.what());
    } catch (const DomainError& e) {
        throw DomainError(prefix + e.what());
    } catch (const CapabilityError& e) {
        throw CapabilityError(prefix + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(prefix + e.what(), e.best_estimate());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void log_time(std::ostream* log, const std::string& what, const Timer& t) {
    if (!log) return;
    char line[160];
    std::snprintf(line, sizeof line, "[%s] %.3f s\n", what.c_str(), t.seconds());
    *log << line;
}

LabeledArray load_input(const InputPlan& in, std::uint64_t seed, std::optional<LabeledArray>& phantom,
                        std::ostream* log) {
    if (in.kind == InputKind::native) return read_native(in.path);
    if (in.kind == InputKind::tiff) {
        return read_tiff_stack(in.path, in.labels,
                               in.geometry ? std::optional<Geometry>(*in.geometry) : std::nullopt);
    }
    const auto& ag = *in.geometry;
    const ImageGeometry ig = in.phantom_image ? *in.phantom_image : default_image_geometry(ag);
    phantom = make_phantom(in.phantom, ig);
    const Operator a = projector(ig, ag, in.projector);
    LabeledArray data = a.direct(DataContainer(*phantom)).array();
    if (in.noise) {
        auto noisy = add_noise(data, *in.noise, seed);
        if (log && noisy.clipped > 0) *log << "  " << noisy.clipped << " zero counts clipped\n";
        data = std::move(noisy.data);
    }
    if (in.transmission) {
        for (double& v : data.values()) v = *in.transmission * std::exp(-v);
    }
    return data;
}

/// Cache an operator norm, falling back to the best power-iteration
/// estimate when the top singular values are too close to separate.
void prime_norm(const Operator& k, std::ostream* log) {
    try {
        k.set_norm(estimate_norm(k, NormOptions{1e-4, 1000, 5489}));
    } catch (const ConvergenceError& e) {
        k.set_norm(e.best_estimate());
        if (log) *log << "  norm estimate unconverged, using best value\n";
    }
}

struct ReconOutcome {
    LabeledArray image;
    std::vector<HistoryEntry> history;
    std::string csv;
};

ReconOutcome reconstruct(const ReconPlan& r, const LabeledArray& data, std::ostream* log) {
    if (!data.geometry() || !std::holds_alternative<AcquisitionGeometry>(*data.geometry()))
        throw GeometryError("data carries no acquisition geometry");
    const auto& ag = std::get<AcquisitionGeometry>(*data.geometry());
    const ImageGeometry ig = r.image ? *r.image : default_image_geometry(ag);
    ReconOutcome out;
    if (r.method == "fbp") {
        FbpReport report;
        out.image = fbp_parallel(data, ig, r.filter, &report);
        if (log && report.limited_angle) *log << "  warning: angles leave a large gap (limited-angle data)\n";
        return out;
    }

    const Operator a = projector(ig, ag, r.projector);
    const DataContainer b(data);
    const Space domain(Geometry{ig});
    const ArraySpec ispec(Geometry{ig});
    DataContainer x0 = domain.allocate();
    const SolverOptions so{std::numeric_limits<std::size_t>::max(), r.log_interval};

    // Regularising operators, already scaled by sqrt(alpha).
    std::vector<Operator> reg_ops;
    if (r.regulariser == Regulariser::tikhonov) {
        if (r.tikhonov_identity) {
            reg_ops.push_back(std::sqrt(r.alpha) * identity_operator(domain));
        } else {
            for (const auto& label : ispec.labels) {
                double w = r.alpha;
                if (!r.alpha_axes.empty()) {
                    const auto it = r.alpha_axes.find(label);
                    w = it == r.alpha_axes.end() ? 0.0 : it->second;
                }
                if (w > 0.0) reg_ops.push_back(std::sqrt(w) * finite_difference(ispec, label));
            }
            for (const auto& [label, w] : r.alpha_axes)
                if (std::find(ispec.labels.begin(), ispec.labels.end(), label) == ispec.labels.end())
                    throw ShapeError("tikhonov weight for unknown image axis '" + label + "'");
        }
    }

    Operator k = a;
    DataContainer kb = b;
    if (!reg_ops.empty()) {
        std::vector<Operator> rows{a};
        std::vector<DataContainer> rhs{b};
        for (const auto& op : reg_ops) {
            rows.push_back(op);
            rhs.push_back(op.range().allocate());
        }
        k = block_column(rows);
        kb = DataContainer(BlockContainer(rhs));
    }

    const bool bounded = std::isfinite(r.lower) || std::isfinite(r.upper);
    std::unique_ptr<Algorithm> alg;
    if (r.method == "cgls") {
        alg = std::make_unique<Cgls>(x0, k, kb, CglsOptions{r.tolerance, so});
    } else if (r.method == "sirt") {
        alg = std::make_unique<Sirt>(x0, a, b, SirtOptions{r.lower, r.upper, r.relaxation, so});
    } else if (r.method == "gd") {
        GradientDescentOptions o;
        o.step = r.step;
        o.backtracking = r.backtracking;
        o.solver = so;
        alg = std::make_unique<GradientDescent>(x0, least_squares(k, kb, 0.5), o);
    } else if (r.method == "fista") {
        Function g = zero_function();
        if (r.regulariser == Regulariser::tv) {
            TotalVariationOptions tv;
            tv.iterations = r.fgp_iterations;
            tv.lower = r.lower;
            tv.upper = r.upper;
            g = r.alpha * total_variation(tv);
        } else if (bounded) {
            g = indicator_box(r.lower, r.upper);
        }
        if (!r.step) prime_norm(k, log);
        alg = std::make_unique<Fista>(x0, least_squares(k, kb, 0.5), g, FistaOptions{r.step, so});
    } else {
        Function fid = r.fidelity == Fidelity::least_squares
                           ? 0.5 * l2_norm_squared(b)
                           : kullback_leibler(b, r.eta > 0.0 ? std::optional<DataContainer>(
                                                                   DataContainer(LabeledArray(data.spec(), r.eta)))
                                                             : std::nullopt);
        Operator kk = a;
        Function f = fid;
        if (r.regulariser == Regulariser::tv) {
            kk = block_column({a, gradient(ispec)});
            f = block_function({fid, r.alpha * mixed_l21()});
        } else if (!reg_ops.empty()) {
            std::vector<Operator> rows{a};
            std::vector<Function> parts{fid};
            for (const auto& op : reg_ops) {
                rows.push_back(op);
                parts.push_back(0.5 * l2_norm_squared());
            }
            kk = block_column(rows);
            f = block_function(parts);
        }
        const Function g = bounded ? indicator_box(r.lower, r.upper) : zero_function();
        prime_norm(kk, log);
        if (r.method == "pdhg") {
            PdhgOptions o;
            o.sigma = r.sigma;
            o.tau = r.tau;
            o.solver = so;
            alg = std::make_unique<Pdhg>(x0, f, kk, g, o);
        } else {
            alg = std::make_unique<Ladmm>(x0, f, kk, g, LadmmOptions{r.sigma, r.tau, so});
        }
    }

    const auto report = alg->run(r.iterations);
    if (log) {
        char line[160];
        const auto& h = alg->history();
        std::snprintf(line, sizeof line, "  %s: %zu iterations%s, objective %.9g\n", alg->name().c_str(),
                      report.iterations, report.converged ? " (converged)" : "", h.empty() ? NAN : h.back().primal);
        *log << line;
    }
    out.image = alg->solution().array();
    out.history = alg->history();
    std::ostringstream csv;
    alg->write_history_csv(csv);
    out.csv = csv.str();
    return out;
}

LabeledArray select_slice(LabeledArray a, const std::vector<std::pair<std::string, std::size_t>>& selectors) {
    for (const auto& [label, index] : selectors) {
        if (index >= a.extent(label))
            throw ShapeError("slice index " + std::to_string(index) + " out of range for axis '" + label + "'");
        a = a.get_slice(label, index);
    }
    return a;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

void ensure_parent(const fs::path& path) {
    if (!path.has_parent_path()) return;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
}

std::string format_number(double v) {
    if (v == 0.0) v = 0.0;  // no negative zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string format_vec(const Vec3& v) {
    return "[" + format_number(v[0]) + ", " + format_number(v[1]) + ", " + format_number(v[2]) + "]";
}

// ---------------------------------------------------------------- schematic

void draw_schematic(const AcquisitionGeometry& ag, const fs::path& path) {
    constexpr std::size_t size = 256;
    LabeledArray canvas(ArraySpec({"y", "x"}, {size, size}), 0.0);

    const double half_width = 0.5 * static_cast<double>(ag.panel.num_pixels[0]) * ag.panel.pixel_size[0];
    const Vec3 dx = ag.detector_direction_x;
    const Vec3 det_a = add3(ag.detector_position, scaled3(dx, -half_width));
    const Vec3 det_b = add3(ag.detector_position, scaled3(dx, half_width));
    Vec3 src;
    if (ag.is_parallel()) src = add3(ag.detector_position, scaled3(ag.ray_direction, -4.0 * half_width));
    else src = ag.source_position;
    std::vector<Vec3> pts{det_a, det_b, src, ag.rotation_axis_position};

    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (const auto& p : pts) {
        lo_x = std::min(lo_x, p[0]);
        hi_x = std::max(hi_x, p[0]);
        lo_y = std::min(lo_y, p[1]);
        hi_y = std::max(hi_y, p[1]);
    }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.2;
    const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
    auto to_pixel = [&](const Vec3& p) {
        const double u = (p[0] - cx) / span + 0.5;
        const double v = 0.5 - (p[1] - cy) / span;
        return std::pair<double, double>{u * (size - 1), v * (size - 1)};
    };
    auto plot = [&](double px, double py, double value) {
        const auto i = static_cast<long>(std::lround(px)), j = static_cast<long>(std::lround(py));
        if (i >= 0 && j >= 0 && i < static_cast<long>(size) && j < static_cast<long>(size))
            canvas.at({static_cast<std::size_t>(j), static_cast<std::size_t>(i)}) =
                std::max(canvas.at({static_cast<std::size_t>(j), static_cast<std::size_t>(i)}), value);
    };
    auto line = [&](const Vec3& a, const Vec3& b, double value) {
        const auto [ax, ay] = to_pixel(a);
        const auto [bx, by] = to_pixel(b);
        const int steps = static_cast<int>(std::max(std::abs(bx - ax), std::abs(by - ay))) + 1;
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            plot(ax + t * (bx - ax), ay + t * (by - ay), value);
        }
    };
    auto dot = [&](const Vec3& p, double value) {
        const auto [px, py] = to_pixel(p);
        for (int dy = -3; dy <= 3; ++dy)
            for (int dxp = -3; dxp <= 3; ++dxp)
                if (dxp * dxp + dy * dy <= 9) plot(px + dxp, py + dy, value);
    };
    line(src, det_a, 0.35);
    line(src, det_b, 0.35);
    line(det_a, det_b, 0.7);
    dot(ag.rotation_axis_position, 0.55);
    dot(src, 1.0);
    export_png_heatmap(canvas, path, 0.0, 1.0, Colormap::hot);
}

}  // namespace

// ---------------------------------------------------------------- public API

void validate_pipeline(const fs::path& config, const std::vector<std::string>& overrides) {
    (void)make_plan(config, overrides);
}

PipelineResult run_pipeline(const fs::path& config, const PipelineOptions& options) {
    Plan plan = make_plan(config, options.overrides);
    if (options.seed) plan.seed = *options.seed;
    if (options.threads) plan.threads = options.threads;
    std::ostream* log = options.log;

    struct ThreadScope {
        explicit ThreadScope(std::optional<int> n) : restore(n.has_value()) {
            if (n) set_num_threads(*n);
        }
        ~ThreadScope() {
            if (restore) set_num_threads(0);
        }
        bool restore;
    } threads(plan.threads);

    std::set<std::string> wanted;
    for (const auto& o : plan.outputs) wanted.insert(o.source);
    std::map<std::string, LabeledArray> snapshots;

    PipelineResult result;
    std::optional<LabeledArray> phantom;
    {
        Timer t;
        result.data = in_stage("input", [&] { return load_input(plan.input, plan.seed, phantom, log); });
        log_time(log, "input", t);
    }
    if (wanted.count("input")) snapshots["input"] = result.data;
    if (phantom) snapshots["phantom"] = *phantom;

    for (const auto& s : plan.stages) {
        Timer t;
        result.data = in_stage(s.name, [&] { return s.run(result.data, log); });
        log_time(log, s.name, t);
        if (wanted.count(s.name)) snapshots[s.name] = result.data;
    }
    snapshots["data"] = result.data;
    if (log) *log << "  data " << result.data.spec().describe() << "\n";

    std::string csv;
    if (plan.recon) {
        Timer t;
        auto outcome = in_stage("recon", [&] { return reconstruct(*plan.recon, result.data, log); });
        log_time(log, "recon", t);
        result.reconstruction = std::move(outcome.image);
        result.history = std::move(outcome.history);
        csv = std::move(outcome.csv);
        snapshots["recon"] = result.reconstruction;
    }

    for (std::size_t i = 0; i < plan.outputs.size(); ++i) {
        const auto& o = plan.outputs[i];
        const std::string name = "outputs." + std::to_string(i) + " (" + o.type + ")";
        Timer t;
        in_stage(name, [&] {
            const LabeledArray& src = snapshots.at(o.source);
            if (o.type == "native") {
                ensure_parent(o.path);
                write_native(src, o.path);
                result.outputs.push_back(o.path);
            } else if (o.type == "tiff") {
                const std::string axis = o.axis.empty() ? src.labels().front() : o.axis;
                for (auto& p : write_tiff_stack(src, o.path, axis, o.prefix)) result.outputs.push_back(p);
            } else if (o.type == "png") {
                LabeledArray img = select_slice(src, o.slice);
                if (img.ndim() != 2)
                    throw ShapeError("png needs a 2-D slice; add a 'slice' selector for " + img.spec().describe());
                double lo = 0.0, hi = 1.0;
                if (o.range) {
                    std::tie(lo, hi) = *o.range;
                } else {
                    lo = img.min();
                    hi = img.max();
                    if (!(lo < hi)) hi = lo + 1.0;
                }
                ensure_parent(o.path);
                export_png_heatmap(img, o.path, lo, hi, o.colormap);
                result.outputs.push_back(o.path);
            } else if (o.type == "history_csv") {
                ensure_parent(o.path);
                write_text(o.path, csv);
                result.outputs.push_back(o.path);
            } else if (o.type == "metrics") {
                const LabeledArray ref = o.reference == "phantom" ? snapshots.at("phantom")
                                                                  : read_native(resolve(plan.base, o.reference));
                LabeledArray x = src;
                x.set_geometry(std::nullopt);
                LabeledArray rr = ref;
                rr.set_geometry(std::nullopt);
                const Quality q = metrics(x, rr, o.peak);
                result.quality = q;
                char line[160];
                if (q.psnr_infinite) std::snprintf(line, sizeof line, "mse=%.9g psnr=inf", q.mse);
                else std::snprintf(line, sizeof line, "mse=%.9g psnr=%.6f", q.mse, q.psnr);
                if (log) *log << "metrics " << o.source << ": " << line << "\n";
                if (!o.path.empty()) {
                    json j;
                    j["source"] = o.source;
                    j["reference"] = o.reference;
                    j["mse"] = q.mse;
                    j["psnr"] = q.psnr_infinite ? json(nullptr) : json(q.psnr);
                    j["psnr_infinite"] = q.psnr_infinite;
                    ensure_parent(o.path);
                    write_text(o.path, j.dump(2) + "\n");
                    result.outputs.push_back(o.path);
                }
            }
            return 0;
        });
        log_time(log, name, t);
    }
    return result;
}

std::string describe_geometry(const AcquisitionGeometry& ag) {
    std::ostringstream out;
    out << "beam: " << to_string(ag.beam) << "\n";
    if (ag.is_parallel()) out << "ray_direction: " << format_vec(ag.ray_direction) << "\n";
    else out << "source_position: " << format_vec(ag.source_position) << "\n";
    out << "detector_position: " << format_vec(ag.detector_position) << "\n";
    out << "detector_direction_x: " << format_vec(ag.detector_direction_x) << "\n";
    if (ag.dimension() == 3) out << "detector_direction_y: " << format_vec(ag.detector_direction_y) << "\n";
    out << "rotation_axis_position: " << format_vec(ag.rotation_axis_position) << "\n";
    out << "rotation_axis_direction: " << format_vec(ag.rotation_axis_direction) << "\n";
    out << "panel: " << ag.panel.num_pixels[0];
    if (ag.dimension() == 3) out << " x " << ag.panel.num_pixels[1];
    out << " pixels, pixel size " << format_number(ag.panel.pixel_size[0]);
    if (ag.dimension() == 3) out << " x " << format_number(ag.panel.pixel_size[1]);
    out << ", origin " << to_string(ag.panel.origin) << "\n";
    const auto [lo, hi] = std::minmax_element(ag.angles.begin(), ag.angles.end());
    out << "angles: " << ag.angles.size() << " (" << to_string(ag.angle_unit) << "), range [" << format_number(*lo)
        << ", " << format_number(*hi) << "]\n";
    if (!ag.is_parallel()) out << "magnification: " << format_number(ag.magnification()) << "\n";
    out << "dimension_labels:";
    for (const auto& l : ag.dimension_labels) out << " " << l;
    out << "\n";
    return out.str();
}

std::string describe_geometry(const fs::path& config, const std::vector<std::string>& overrides,
                              const std::optional<fs::path>& schematic) {
    const Plan plan = make_plan(config, overrides);
    std::optional<AcquisitionGeometry> ag = plan.input.geometry;
    if (!ag && plan.input.kind == InputKind::native) {
        const LabeledArray a = read_native(plan.input.path);
        if (a.geometry() && std::holds_alternative<AcquisitionGeometry>(*a.geometry()))
            ag = std::get<AcquisitionGeometry>(*a.geometry());
    }
    if (!ag) throw ConfigError("input: config declares no acquisition geometry");
    if (schematic) {
        ensure_parent(*schematic);
        draw_schematic(*ag, *schematic);
    }
    return describe_geometry(*ag);
}

std::string describe_formats() {
    return "inputs:\n"
           "  native   header-prefixed JSON + little-endian float64 payload (CRC32 checked)\n"
           "  tiff     stack of single-image TIFF files ordered by file number\n"
           "           (uncompressed; uint8, uint16, uint32, float32, float64)\n"
           "  phantom  shepp_logan_2d, shepp_logan_3d, disk, wire_in_cylinder\n"
           "           noise: gaussian, poisson, poisson_counts\n"
           "outputs:\n"
           "  native       bitwise round trip including geometry\n"
           "  tiff         32-bit float, <prefix>_<index:04d>.tiff\n"
           "  png          8-bit RGB heatmap, colormaps gray and hot\n"
           "  history_csv  iteration,primal[,dual,gap]\n"
           "  metrics      mse and psnr against a reference (JSON)\n"
           "stages:\n"
           "  normalise absorption centre_of_rotation slice bin pad mask ring_remove\n"
           "reconstruction:\n"
           "  fbp (ram-lak, shepp-logan, cosine, hann, hamming)\n"
           "  cgls sirt gd fista pdhg ladmm\n";
}

}  // namespace tomo
