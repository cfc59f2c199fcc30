#include "tomo/processors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tomo/error.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

namespace {

struct Lines {
    std::size_t outer = 1, n = 1, inner = 1;
};

Lines lines(const std::vector<std::size_t>& shape, std::size_t axis) {
    Lines l;
    for (std::size_t k = 0; k < axis; ++k) l.outer *= shape[k];
    l.n = shape[axis];
    for (std::size_t k = axis + 1; k < shape.size(); ++k) l.inner *= shape[k];
    return l;
}

const AcquisitionGeometry* acquisition(const LabeledArray& a) {
    if (!a.geometry()) return nullptr;
    return std::get_if<AcquisitionGeometry>(&*a.geometry());
}

/// Geometry after replacing axis `label` by `count` samples at old
/// fractional positions first + step * j; `angles` supplies new angle values.
std::optional<Geometry> remap_geometry(const LabeledArray& a, std::string_view label, std::size_t count, double first,
                                       double step, const std::vector<double>& angles) {
    if (!a.geometry()) return std::nullopt;
    if (label == axis::angle) {
        const auto* ag = acquisition(a);
        if (!ag) throw GeometryError("angle axis without an acquisition geometry");
        return Geometry(with_angles(*ag, angles));
    }
    return resample_axis(*a.geometry(), label, count, first, step);
}

/// Apply a per-axis transformation: out[o, j, i] = rule(in line, j, i).
template <class Rule>
LabeledArray transform_axis(const LabeledArray& in, std::size_t axis, std::size_t count, std::optional<Geometry> geom,
                            Rule rule) {
    auto shape = in.shape();
    const Lines l = lines(shape, axis);
    shape[axis] = count;
    LabeledArray out(ArraySpec(in.labels(), shape, std::move(geom)));
    const double* src = in.data();
    double* dst = out.data();
    parallel_for(l.outer, [&](std::size_t o) {
        const double* line = src + o * l.n * l.inner;
        double* target = dst + o * count * l.inner;
        for (std::size_t j = 0; j < count; ++j)
            for (std::size_t i = 0; i < l.inner; ++i) target[j * l.inner + i] = rule(line, l.n, l.inner, j, i);
    });
    return out;
}

std::size_t resolve_stop(const LabeledArray& a, const std::string& label, const AxisRange& r) {
    const std::size_t n = a.extent(label);
    const std::size_t stop = r.stop.value_or(n);
    if (stop > n) throw ShapeError("range stop " + std::to_string(stop) + " beyond extent " + std::to_string(n) +
                                   " of axis '" + label + "'");
    if (r.start >= stop) throw ShapeError("empty range on axis '" + label + "'");
    if (r.step == 0) throw ShapeError("step must be at least 1 on axis '" + label + "'");
    return stop;
}

std::vector<double> angle_values(const LabeledArray& a) {
    const auto* ag = acquisition(a);
    return ag ? ag->angles : std::vector<double>{};
}

}  // namespace

// ---------------------------------------------------------------------------

NormaliseResult normalise(const LabeledArray& data, const LabeledArray& flat, const LabeledArray& dark, double fill) {
    if (!flat.spec().same_layout(dark.spec())) throw ShapeError("flat and dark fields differ in shape");
    NormaliseResult r{LabeledArray(data.spec()), 0};
    const double* d = data.data();
    const double* f = flat.data();
    const double* k = dark.data();
    double* o = r.data.data();
    std::size_t zeros = 0;
    auto one = [&](std::size_t i, std::size_t j) {
        const double den = f[j] - k[j];
        if (den == 0.0) {
            o[i] = fill;
            ++zeros;
        } else {
            o[i] = (d[i] - k[j]) / den;
        }
    };
    if (flat.spec().same_layout(data.spec())) {
        for (std::size_t i = 0; i < data.size(); ++i) one(i, i);
        r.zero_denominators = zeros;
        return r;
    }
    const auto& labels = data.labels();
    const auto at = std::find(labels.begin(), labels.end(), axis::angle);
    if (at == labels.end()) throw ShapeError("flat/dark shape " + flat.spec().describe() + " does not match data " +
                                             data.spec().describe());
    const std::size_t ax = static_cast<std::size_t>(at - labels.begin());
    auto reduced_labels = labels;
    auto reduced_shape = data.shape();
    reduced_labels.erase(reduced_labels.begin() + static_cast<long>(ax));
    reduced_shape.erase(reduced_shape.begin() + static_cast<long>(ax));
    if (flat.labels() != reduced_labels || flat.shape() != reduced_shape)
        throw ShapeError("flat/dark shape " + flat.spec().describe() + " does not broadcast to " +
                         data.spec().describe());
    const Lines l = lines(data.shape(), ax);
    for (std::size_t a = 0; a < l.outer; ++a)
        for (std::size_t j = 0; j < l.n; ++j)
            for (std::size_t i = 0; i < l.inner; ++i) one((a * l.n + j) * l.inner + i, a * l.inner + i);
    r.zero_denominators = zeros;
    return r;
}

LabeledArray bin(const LabeledArray& data, const Roi& roi) {
    LabeledArray out = data;
    for (const auto& [label, r] : roi) {
        const std::size_t ax = out.axis_index(label);
        const std::size_t stop = resolve_stop(out, label, r);
        const std::size_t w = r.step;
        const std::size_t count = (stop - r.start) / w;
        if (count == 0) throw ShapeError("bin width exceeds the range on axis '" + label + "'");
        std::vector<double> angles;
        if (label == axis::angle) {
            const auto old = angle_values(out);
            for (std::size_t j = 0; j < count && !old.empty(); ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < w; ++k) s += old[r.start + j * w + k];
                angles.push_back(s / static_cast<double>(w));
            }
        }
        const double first = static_cast<double>(r.start) + 0.5 * static_cast<double>(w - 1);
        auto geom = remap_geometry(out, label, count, first, static_cast<double>(w), angles);
        const std::size_t start = r.start;
        out = transform_axis(out, ax, count, std::move(geom),
                             [&](const double* line, std::size_t, std::size_t inner, std::size_t j, std::size_t i) {
                                 double s = 0.0;
                                 for (std::size_t k = 0; k < w; ++k) s += line[(start + j * w + k) * inner + i];
                                 return s / static_cast<double>(w);
                             });
    }
    return out;
}

LabeledArray slice(const LabeledArray& data, const Roi& roi) {
    LabeledArray out = data;
    for (const auto& [label, r] : roi) {
        const std::size_t ax = out.axis_index(label);
        const std::size_t stop = resolve_stop(out, label, r);
        const std::size_t count = (stop - r.start + r.step - 1) / r.step;
        std::vector<double> angles;
        if (label == axis::angle) {
            const auto old = angle_values(out);
            for (std::size_t j = 0; j < count && !old.empty(); ++j) angles.push_back(old[r.start + j * r.step]);
        }
        auto geom = remap_geometry(out, label, count, static_cast<double>(r.start), static_cast<double>(r.step), angles);
        const std::size_t start = r.start, step = r.step;
        out = transform_axis(out, ax, count, std::move(geom),
                             [&](const double* line, std::size_t, std::size_t inner, std::size_t j, std::size_t i) {
                                 return line[(start + j * step) * inner + i];
                             });
    }
    return out;
}

LabeledArray pad(const LabeledArray& data, const std::map<std::string, PadWidth, std::less<>>& widths,
                 const PadMode& mode) {
    LabeledArray out = data;
    for (const auto& [label, w] : widths) {
        if (label == axis::angle) throw ShapeError("the angle axis cannot be padded");
        const std::size_t ax = out.axis_index(label);
        if (w.before == 0 && w.after == 0) continue;
        const std::size_t n = out.extent(label);
        const std::size_t count = n + w.before + w.after;
        auto geom = remap_geometry(out, label, count, -static_cast<double>(w.before), 1.0, {});
        const auto* constant = std::get_if<PadConstant>(&mode);
        const std::size_t before = w.before;
        out = transform_axis(out, ax, count, std::move(geom),
                             [&](const double* line, std::size_t len, std::size_t inner, std::size_t j, std::size_t i) {
                                 const long k = static_cast<long>(j) - static_cast<long>(before);
                                 if (k >= 0 && k < static_cast<long>(len)) return line[static_cast<std::size_t>(k) * inner + i];
                                 if (constant) return constant->value;
                                 const std::size_t e = k < 0 ? 0 : len - 1;
                                 return line[e * inner + i];
                             });
    }
    return out;
}

LabeledArray make_mask(const LabeledArray& data, const MaskMethod& method) {
    LabeledArray m(data.spec());
    const auto* t = std::get_if<MaskThreshold>(&method);
    if (t && !(t->lower <= t->upper)) throw DomainError("mask threshold needs lower <= upper");
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double v = data[i];
        bool keep = std::isfinite(v);
        if (t) keep = keep && v >= t->lower && v <= t->upper;
        m[i] = keep ? 1.0 : 0.0;
    }
    return m;
}

LabeledArray apply_mask(const LabeledArray& data, const LabeledArray& mask, const MaskFill& fill) {
    data.require_same_layout(mask, "apply_mask");
    for (double v : mask.values())
        if (v != 0.0 && v != 1.0) throw DomainError("mask entries must be 0 or 1");
    LabeledArray out = data;
    if (const auto* f = std::get_if<FillValue>(&fill)) {
        for (std::size_t i = 0; i < out.size(); ++i)
            if (mask[i] == 0.0) out[i] = f->value;
        return out;
    }
    double kept_sum = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (mask[i] != 0.0) {
            kept_sum += data[i];
            ++kept;
        }
    const double global = kept ? kept_sum / static_cast<double>(kept) : 0.0;
    const auto& shape = data.shape();
    const std::size_t nd = shape.size();
    std::vector<std::size_t> strides(nd, 1);
    for (std::size_t k = nd; k-- > 1;) strides[k - 1] = strides[k] * shape[k];
    constexpr long radius = 2;
    std::vector<std::size_t> idx(nd);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (mask[i] != 0.0) continue;
        std::size_t rem = i;
        for (std::size_t k = 0; k < nd; ++k) {
            idx[k] = rem / strides[k];
            rem %= strides[k];
        }
        // Walk the (2r+1)^d neighbourhood with an odometer.
        std::vector<long> off(nd, -radius);
        double s = 0.0;
        std::size_t c = 0;
        while (true) {
            bool inside = true;
            std::size_t j = 0;
            for (std::size_t k = 0; k < nd && inside; ++k) {
                const long p = static_cast<long>(idx[k]) + off[k];
                if (p < 0 || p >= static_cast<long>(shape[k])) inside = false;
                else j += static_cast<std::size_t>(p) * strides[k];
            }
            if (inside && mask[j] != 0.0) {
                s += data[j];
                ++c;
            }
            std::size_t k = nd;
            while (k > 0 && off[k - 1] == radius) off[--k] = -radius;
            if (k == 0) break;
            ++off[k - 1];
        }
        out[i] = c ? s / static_cast<double>(c) : global;
    }
    return out;
}

CentreOfRotation centre_of_rotation_xcorr(const LabeledArray& data, std::optional<std::size_t> slice_index) {
    const auto* ag = acquisition(data);
    if (!ag) throw GeometryError("centre of rotation needs acquisition data with geometry");
    const auto rad = ag->angles_radians();
    const std::size_t na = rad.size();
    const double tol = 0.1 * M_PI / 180.0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = i + 1; j < na; ++j) {
            const double d = std::abs(std::remainder(rad[j] - rad[i], 2.0 * M_PI));
            const double dev = std::abs(d - M_PI);
            if (dev < best) {
                best = dev;
                ia = i;
                ib = j;
            }
        }
    if (!(best <= tol)) throw GeometryError("no pair of projections 180 degrees apart within 0.1 degree");

    const std::size_t a_ax = data.axis_index(axis::angle);
    const std::size_t h_ax = data.axis_index(axis::horizontal);
    const std::size_t n = data.shape()[h_ax];
    std::size_t row = 0;
    std::optional<std::size_t> v_ax;
    if (std::find(data.labels().begin(), data.labels().end(), axis::vertical) != data.labels().end()) {
        v_ax = data.axis_index(axis::vertical);
        const std::size_t nv = data.shape()[*v_ax];
        row = slice_index.value_or(nv / 2);
        if (row >= nv) throw ShapeError("slice index beyond the vertical extent");
    }
    auto profile = [&](std::size_t angle) {
        std::vector<double> p(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t flat = angle * data.stride(a_ax) + k * data.stride(h_ax);
            if (v_ax) flat += row * data.stride(*v_ax);
            p[k] = data[flat];
        }
        const double m = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(n);
        for (double& v : p) v -= m;
        return p;
    };
    const auto pa = profile(ia);
    auto pb = profile(ib);
    std::reverse(pb.begin(), pb.end());

    // C(s) = sum_k a[k] b[k + s], s in (-n, n)
    const long ln = static_cast<long>(n);
    std::vector<double> c(2 * n - 1);
    parallel_for(c.size(), [&](std::size_t t) {
        const long s = static_cast<long>(t) - (ln - 1);
        double acc = 0.0;
        for (long k = std::max(0L, -s); k < std::min(ln, ln - s); ++k)
            acc += pa[static_cast<std::size_t>(k)] * pb[static_cast<std::size_t>(k + s)];
        c[t] = acc;
    });
    const std::size_t peak = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    double shift = static_cast<double>(peak) - static_cast<double>(ln - 1);
    if (peak > 0 && peak + 1 < c.size()) {
        const double l = c[peak - 1], m = c[peak], r = c[peak + 1];
        const double den = l - 2.0 * m + r;
        if (den < 0.0) shift += 0.5 * (l - r) / den;
    }
    const double offset = -0.5 * shift;

    AcquisitionGeometry g = *ag;
    const Vec3 step = ag->column_step();
    const double pitch = norm3(step);
    const Vec3 u = scaled3(step, 1.0 / pitch);
    const double current = dot3(sub3(ag->rotation_axis_position, ag->detector_position), u);
    const double wanted = offset * pitch / ag->magnification();
    g.rotation_axis_position = add3(ag->rotation_axis_position, scaled3(u, wanted - current));
    // Cone beams measure the axis relative to the source-detector line.
    if (!ag->is_parallel()) {
        const double src = dot3(sub3(ag->source_position, ag->detector_position), u);
        g.rotation_axis_position = add3(g.rotation_axis_position, scaled3(u, src * (1.0 - 1.0 / ag->magnification())));
    }
    LabeledArray out = data;
    out.set_geometry(Geometry(g));
    return {std::move(out), offset, ia, ib};
}

LabeledArray ring_remove(const LabeledArray& data, std::size_t width) {
    if (width < 3 || width % 2 == 0) throw DomainError("ring_remove width must be odd and at least 3");
    const std::size_t a_ax = data.axis_index(axis::angle);
    const std::size_t h_ax = data.axis_index(axis::horizontal);
    const Lines al = lines(data.shape(), a_ax);
    // Mean over angles, laid out as (outer, inner).
    std::vector<double> mean(al.outer * al.inner, 0.0);
    for (std::size_t o = 0; o < al.outer; ++o)
        for (std::size_t j = 0; j < al.n; ++j)
            for (std::size_t i = 0; i < al.inner; ++i) mean[o * al.inner + i] += data[(o * al.n + j) * al.inner + i];
    for (double& v : mean) v /= static_cast<double>(al.n);

    auto reduced = data.shape();
    reduced.erase(reduced.begin() + static_cast<long>(a_ax));
    const std::size_t h_red = h_ax > a_ax ? h_ax - 1 : h_ax;
    const Lines hl = lines(reduced, h_red);
    std::vector<double> stripe(mean.size());
    const long half = static_cast<long>(width / 2);
    parallel_for(hl.outer * hl.inner, [&](std::size_t t) {
        const std::size_t o = t / hl.inner, i = t % hl.inner;
        std::vector<double> window;
        window.reserve(width);
        for (std::size_t k = 0; k < hl.n; ++k) {
            window.clear();
            const long lo = std::max(0L, static_cast<long>(k) - half);
            const long hi = std::min(static_cast<long>(hl.n) - 1, static_cast<long>(k) + half);
            for (long q = lo; q <= hi; ++q) window.push_back(mean[(o * hl.n + static_cast<std::size_t>(q)) * hl.inner + i]);
            const std::size_t mid = window.size() / 2;
            std::nth_element(window.begin(), window.begin() + static_cast<long>(mid), window.end());
            double med = window[mid];
            if (window.size() % 2 == 0) {
                const double lower = *std::max_element(window.begin(), window.begin() + static_cast<long>(mid));
                med = 0.5 * (med + lower);
            }
            const std::size_t at = (o * hl.n + k) * hl.inner + i;
            stripe[at] = mean[at] - med;
        }
    });

    LabeledArray out = data;
    for (std::size_t o = 0; o < al.outer; ++o)
        for (std::size_t j = 0; j < al.n; ++j)
            for (std::size_t i = 0; i < al.inner; ++i) out[(o * al.n + j) * al.inner + i] -= stripe[o * al.inner + i];
    return out;
}

}  // namespace tomo
