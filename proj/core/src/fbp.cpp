#include "tomo/fbp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "tomo/data_container.hpp"
#include "tomo/error.hpp"
#include "tomo/parallel.hpp"
#include "tomo/projector.hpp"

namespace tomo {

namespace {

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (p == nullptr) throw Error("fftw_malloc failed");
    return FftwBuffer<T>(p);
}

class RowFilter {
public:
    RowFilter(std::size_t padded, std::vector<double> response) : n_(padded), response_(std::move(response)) {
        auto in = fftw_buffer<double>(n_);
        auto out = fftw_buffer<fftw_complex>(n_ / 2 + 1);
        std::lock_guard lock(plan_mutex());
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), in.get(), out.get(), FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), out.get(), in.get(), FFTW_ESTIMATE);
        if (forward_ == nullptr || backward_ == nullptr) throw Error("FFTW plan creation failed");
    }
    ~RowFilter() {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }
    RowFilter(const RowFilter&) = delete;
    RowFilter& operator=(const RowFilter&) = delete;

    /// In place on `count` samples at `row[i * step]`, scaled by `gain`.
    void apply(double* row, std::size_t count, std::size_t step, double gain) const {
        auto in = fftw_buffer<double>(n_);
        auto spec = fftw_buffer<fftw_complex>(n_ / 2 + 1);
        std::fill(in.get(), in.get() + n_, 0.0);
        for (std::size_t i = 0; i < count; ++i) in[i] = row[i * step];
        fftw_execute_dft_r2c(forward_, in.get(), spec.get());
        for (std::size_t k = 0; k <= n_ / 2; ++k) {
            spec[k][0] *= response_[k];
            spec[k][1] *= response_[k];
        }
        fftw_execute_dft_c2r(backward_, spec.get(), in.get());
        const double scale = gain / static_cast<double>(n_);
        for (std::size_t i = 0; i < count; ++i) row[i * step] = in[i] * scale;
    }

private:
    std::size_t n_;
    std::vector<double> response_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

double window(FilterKind kind, double f, double fc) {
    constexpr double pi = std::numbers::pi;
    switch (kind) {
        case FilterKind::ram_lak: return 1.0;
        case FilterKind::shepp_logan: {
            const double x = pi * f / (2.0 * fc);
            return x == 0.0 ? 1.0 : std::sin(x) / x;
        }
        case FilterKind::cosine: return std::cos(pi * f / (2.0 * fc));
        case FilterKind::hann: return 0.5 + 0.5 * std::cos(pi * f / fc);
        case FilterKind::hamming: return 0.54 + 0.46 * std::cos(pi * f / fc);
    }
    return 1.0;
}

void for_each_row(LabeledArray& a, std::size_t axis, const std::function<void(double*, std::size_t, std::size_t)>& fn) {
    const std::size_t n = a.shape()[axis];
    const std::size_t inner = a.stride(axis);
    const std::size_t outer = n == 0 ? 0 : a.size() / (n * inner);
    parallel_for_coarse(outer * inner, [&](std::size_t r) {
        const std::size_t o = r / inner;
        const std::size_t i = r % inner;
        fn(a.data() + o * n * inner + i, n, inner);
    });
}

}  // namespace

std::string_view to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::ram_lak: return "ram-lak";
        case FilterKind::shepp_logan: return "shepp-logan";
        case FilterKind::cosine: return "cosine";
        case FilterKind::hann: return "hann";
        case FilterKind::hamming: return "hamming";
    }
    return "ram-lak";
}

FilterKind parse_filter_kind(std::string_view text) {
    for (auto k : {FilterKind::ram_lak, FilterKind::shepp_logan, FilterKind::cosine, FilterKind::hann,
                   FilterKind::hamming})
        if (text == to_string(k)) return k;
    throw DomainError("unknown filter '" + std::string(text) +
                      "' (expected ram-lak, shepp-logan, cosine, hann or hamming)");
}

void FilterSpec::validate() const {
    if (!(cutoff > 0.0 && cutoff <= 1.0))
        throw DomainError("filter cutoff must lie in (0, 1], got " + std::to_string(cutoff));
}

std::size_t padded_length(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return std::max<std::size_t>(64, 8 * p);
}

std::vector<double> filter_response(const FilterSpec& spec, std::size_t padded, double spacing) {
    spec.validate();
    if (padded < 2 || padded % 2 != 0) throw DomainError("padded filter length must be even");
    constexpr double pi = std::numbers::pi;
    const double d2 = spacing * spacing;

    auto kernel = fftw_buffer<double>(padded);
    auto out = fftw_buffer<fftw_complex>(padded / 2 + 1);
    for (std::size_t m = 0; m < padded; ++m) {
        const auto n = m <= padded / 2 ? static_cast<long long>(m) : static_cast<long long>(m) - static_cast<long long>(padded);
        if (n == 0)
            kernel[m] = 1.0 / (4.0 * d2);
        else if (n % 2 != 0)
            kernel[m] = -1.0 / (pi * pi * static_cast<double>(n * n) * d2);
        else
            kernel[m] = 0.0;
    }
    {
        std::lock_guard lock(plan_mutex());
        fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(padded), kernel.get(), out.get(), FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    std::vector<double> h(padded / 2 + 1);
    const double fc = 0.5 * spec.cutoff;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(padded);
        h[k] = f > fc + 1e-15 ? 0.0 : out[k][0] * window(spec.kind, f, fc);
    }
    h[0] = 0.0;
    return h;
}

void filter_row_circular(std::span<double> row, const FilterSpec& spec, double spacing) {
    const RowFilter filter(row.size(), filter_response(spec, row.size(), spacing));
    filter.apply(row.data(), row.size(), 1, spacing);
}

LabeledArray filter_projections(const LabeledArray& data, const FilterSpec& spec) {
    const std::size_t axis = data.axis_index(axis::horizontal);
    double spacing = 1.0;
    if (data.geometry()) {
        if (const auto* ag = std::get_if<AcquisitionGeometry>(&*data.geometry())) spacing = ag->panel.pixel_size[0];
    }
    const std::size_t n = data.shape()[axis];
    const std::size_t padded = padded_length(n);
    const RowFilter filter(padded, filter_response(spec, padded, spacing));
    LabeledArray out = data;
    for_each_row(out, axis, [&](double* row, std::size_t count, std::size_t step) {
        filter.apply(row, count, step, spacing);
    });
    return out;
}

AngularWeights angular_weights(const std::vector<double>& angles_rad) {
    constexpr double pi = std::numbers::pi;
    const std::size_t n = angles_rad.size();
    AngularWeights result;
    result.weights.assign(n, 0.0);
    if (n == 0) return result;
    if (n == 1) {
        result.weights[0] = pi;
        result.limited_angle = true;
        return result;
    }

    std::vector<double> folded(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = std::fmod(angles_rad[i], pi);
        if (a < 0.0) a += pi;
        folded[i] = a;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return folded[a] < folded[b]; });

    // gap[i] lies between sorted entries i and i+1 (cyclically).
    std::vector<double> gap(n);
    for (std::size_t i = 0; i + 1 < n; ++i) gap[i] = folded[order[i + 1]] - folded[order[i]];
    gap[n - 1] = folded[order[0]] + pi - folded[order[n - 1]];

    const auto widest = std::max_element(gap.begin(), gap.end());
    if (*widest > 10.0 * pi / static_cast<double>(n) && *widest > pi / 36.0) {
        result.limited_angle = true;
        std::vector<double> others(gap.begin(), gap.end());
        others.erase(others.begin() + (widest - gap.begin()));
        std::nth_element(others.begin(), others.begin() + static_cast<long>(others.size() / 2), others.end());
        *widest = others[others.size() / 2];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double before = gap[(i + n - 1) % n];
        result.weights[order[i]] = 0.5 * (before + gap[i]);
    }
    return result;
}

LabeledArray fbp_parallel(const LabeledArray& data, const ImageGeometry& ig, const FilterSpec& filter,
                          FbpReport* report) {
    filter.validate();
    if (!data.geometry() || !std::holds_alternative<AcquisitionGeometry>(*data.geometry()))
        throw GeometryError("FBP needs data carrying an acquisition geometry");
    const auto& ag = std::get<AcquisitionGeometry>(*data.geometry());
    if (!ag.is_parallel())
        throw GeometryError(std::string("FBP supports parallel beams only, got ") + std::string(to_string(ag.beam)));
    ig.validate();

    LabeledArray q = filter_projections(data, filter);

    const AngularWeights aw = angular_weights(ag.angles_radians());
    if (report != nullptr) report->limited_angle = aw.limited_angle;

    double pixel_measure = ag.panel.pixel_size[0];
    double voxel_measure = ig.voxel_size_x * ig.voxel_size_y;
    if (ag.dimension() == 3) {
        pixel_measure *= ag.panel.pixel_size[1];
        voxel_measure *= ig.voxel_size_z;
    }
    const double gain = pixel_measure / voxel_measure;

    const std::size_t aaxis = q.axis_index(axis::angle);
    const std::size_t na = q.shape()[aaxis];
    const std::size_t inner = q.stride(aaxis);
    const std::size_t outer = q.size() / (na * inner);
    parallel_for_coarse(outer, [&](std::size_t o) {
        for (std::size_t a = 0; a < na; ++a) {
            const double w = aw.weights[a] * gain;
            double* base = q.data() + (o * na + a) * inner;
            for (std::size_t i = 0; i < inner; ++i) base[i] *= w;
        }
    });

    const Operator A = projector(ig, ag);
    return A.adjoint(DataContainer(std::move(q))).array();
}

}  // namespace tomo
