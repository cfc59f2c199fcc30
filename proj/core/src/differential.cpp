#include <cmath>

#include "tomo/error.hpp"
#include "tomo/operator.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

double axis_spacing(const ArraySpec& spec, const std::string& label) {
    if (!spec.geometry) return 1.0;
    if (const auto* ig = std::get_if<ImageGeometry>(&*spec.geometry)) {
        if (label == axis::horizontal_x) return ig->voxel_size_x;
        if (label == axis::horizontal_y) return ig->voxel_size_y;
        if (label == axis::vertical) return ig->voxel_size_z;
    } else if (const auto* ag = std::get_if<AcquisitionGeometry>(&*spec.geometry)) {
        if (label == axis::horizontal) return ag->panel.pixel_size[0];
        if (label == axis::vertical) return ag->panel.pixel_size[1];
    }
    return 1.0;
}

namespace {

/// Layout of one axis inside a row-major array: `outer` lines of `n`
/// samples spaced `inner` apart.
struct AxisLines {
    std::size_t outer = 1, n = 1, inner = 1;

    AxisLines(const ArraySpec& spec, std::size_t axis) {
        for (std::size_t k = 0; k < spec.shape.size(); ++k) {
            if (k < axis) outer *= spec.shape[k];
            if (k > axis) inner *= spec.shape[k];
        }
        n = spec.shape[axis];
    }
    std::size_t lines() const { return outer * inner; }
    std::size_t base(std::size_t line) const { return (line / inner) * n * inner + line % inner; }
};

std::size_t find_axis(const ArraySpec& spec, const std::string& label) {
    for (std::size_t k = 0; k < spec.labels.size(); ++k)
        if (spec.labels[k] == label) return k;
    throw ShapeError("unknown axis '" + label + "' for " + spec.describe());
}

class FiniteDifferenceOperator final : public OperatorImpl {
public:
    FiniteDifferenceOperator(const ArraySpec& spec, const std::string& label, Difference kind, Boundary boundary,
                             double spacing)
        : OperatorImpl(Space(spec), Space(spec)),
          lines_(spec, find_axis(spec, label)),
          kind_(kind),
          boundary_(boundary),
          scale_(1.0 / spacing),
          label_(label) {
        if (!(spacing > 0.0)) throw DomainError("finite difference spacing must be positive");
    }

    void direct(const DataContainer& x, DataContainer& out) const override {
        const double* px = x.array().data();
        double* po = out.array().data();
        const std::size_t n = lines_.n, s = lines_.inner;
        const bool periodic = boundary_ == Boundary::periodic;
        const double h = scale_;
        const bool fwd = kind_ == Difference::forward;
        parallel_for(lines_.lines(), [&, px, po](std::size_t line) {
            const double* a = px + lines_.base(line);
            double* o = po + lines_.base(line);
            if (fwd) {
                for (std::size_t i = 0; i + 1 < n; ++i) o[i * s] = h * (a[(i + 1) * s] - a[i * s]);
                o[(n - 1) * s] = periodic ? h * (a[0] - a[(n - 1) * s]) : 0.0;
            } else {
                o[0] = periodic ? h * (a[0] - a[(n - 1) * s]) : 0.0;
                for (std::size_t i = 1; i < n; ++i) o[i * s] = h * (a[i * s] - a[(i - 1) * s]);
            }
        });
    }

    void adjoint(const DataContainer& y, DataContainer& out) const override {
        const double* py = y.array().data();
        double* po = out.array().data();
        const std::size_t n = lines_.n, s = lines_.inner;
        const bool periodic = boundary_ == Boundary::periodic;
        const double h = scale_;
        const bool fwd = kind_ == Difference::forward;
        parallel_for(lines_.lines(), [&, py, po](std::size_t line) {
            const double* b = py + lines_.base(line);
            double* o = po + lines_.base(line);
            if (n == 1) {
                o[0] = 0.0;
                return;
            }
            if (fwd) {
                if (periodic) {
                    o[0] = h * (b[(n - 1) * s] - b[0]);
                    for (std::size_t j = 1; j < n; ++j) o[j * s] = h * (b[(j - 1) * s] - b[j * s]);
                } else {
                    o[0] = -h * b[0];
                    for (std::size_t j = 1; j + 1 < n; ++j) o[j * s] = h * (b[(j - 1) * s] - b[j * s]);
                    o[(n - 1) * s] = h * b[(n - 2) * s];
                }
            } else {
                if (periodic) {
                    for (std::size_t j = 0; j + 1 < n; ++j) o[j * s] = h * (b[j * s] - b[(j + 1) * s]);
                    o[(n - 1) * s] = h * (b[(n - 1) * s] - b[0]);
                } else {
                    o[0] = -h * b[s];
                    for (std::size_t j = 1; j + 1 < n; ++j) o[j * s] = h * (b[j * s] - b[(j + 1) * s]);
                    o[(n - 1) * s] = h * b[(n - 1) * s];
                }
            }
        });
    }

    std::string name() const override { return "finite_difference(" + label_ + ")"; }

private:
    AxisLines lines_;
    Difference kind_;
    Boundary boundary_;
    double scale_;
    std::string label_;
};

class SymmetrisedGradientOperator final : public OperatorImpl {
public:
    SymmetrisedGradientOperator(Space domain, Space range, std::vector<Operator> diffs)
        : OperatorImpl(std::move(domain), std::move(range)), d_(std::move(diffs)) {}

    // out[k] for k < dim is D_k w_k; the remaining entries walk the pairs
    // i < j holding (D_j w_i + D_i w_j) / sqrt(2).
    void direct(const DataContainer& w, DataContainer& out) const override {
        const std::size_t dim = d_.size();
        for (std::size_t k = 0; k < dim; ++k) d_[k].impl().direct(w[k], out[k]);
        DataContainer tmp = d_[0].range().allocate();
        std::size_t idx = dim;
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = i + 1; j < dim; ++j, ++idx) {
                d_[j].impl().direct(w[i], out[idx]);
                d_[i].impl().direct(w[j], tmp);
                axpby(kHalfRoot2, out[idx], kHalfRoot2, tmp, out[idx]);
            }
        }
    }

    void adjoint(const DataContainer& e, DataContainer& out) const override {
        const std::size_t dim = d_.size();
        DataContainer tmp = d_[0].domain().allocate();
        for (std::size_t k = 0; k < dim; ++k) d_[k].impl().adjoint(e[k], out[k]);
        std::size_t idx = dim;
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = i + 1; j < dim; ++j, ++idx) {
                d_[j].impl().adjoint(e[idx], tmp);
                axpby(1.0, out[i], kHalfRoot2, tmp, out[i]);
                d_[i].impl().adjoint(e[idx], tmp);
                axpby(1.0, out[j], kHalfRoot2, tmp, out[j]);
            }
        }
    }

    std::string name() const override { return "symmetrised_gradient"; }

private:
    static constexpr double kHalfRoot2 = 0.70710678118654752440;
    std::vector<Operator> d_;
};

class BlurringOperator final : public OperatorImpl {
public:
    BlurringOperator(const ArraySpec& spec, const LabeledArray& kernel)
        : OperatorImpl(Space(spec), Space(spec)), shape_(spec.shape) {
        const std::size_t nd = spec.shape.size();
        if (kernel.ndim() != nd)
            throw ShapeError("blurring kernel must have " + std::to_string(nd) + " dimensions");
        for (std::size_t k = 0; k < nd; ++k) {
            if (kernel.shape()[k] % 2 == 0) throw ShapeError("blurring kernel extents must be odd");
            if (kernel.shape()[k] > spec.shape[k]) throw ShapeError("blurring kernel larger than image");
        }
        // Flatten the kernel into (offset vector, weight) taps, skipping zeros.
        std::vector<std::size_t> idx(nd, 0);
        for (std::size_t flat = 0; flat < kernel.size(); ++flat) {
            std::size_t rem = flat;
            for (std::size_t k = nd; k-- > 0;) {
                idx[k] = rem % kernel.shape()[k];
                rem /= kernel.shape()[k];
            }
            if (kernel[flat] == 0.0) continue;
            std::vector<long> off(nd);
            for (std::size_t k = 0; k < nd; ++k)
                off[k] = static_cast<long>(idx[k]) - static_cast<long>(kernel.shape()[k] / 2);
            taps_.push_back({std::move(off), kernel[flat]});
        }
        strides_.assign(nd, 1);
        for (std::size_t k = nd; k-- > 1;) strides_[k - 1] = strides_[k] * shape_[k];
    }

    void direct(const DataContainer& x, DataContainer& out) const override { apply(x, out, 1); }
    void adjoint(const DataContainer& y, DataContainer& out) const override { apply(y, out, -1); }
    std::string name() const override { return "blurring"; }

private:
    struct Tap {
        std::vector<long> offset;
        double weight;
    };

    // out[p] = sum_t w_t in[p + sign * off_t], zero outside the grid.
    void apply(const DataContainer& in, DataContainer& out, long sign) const {
        const double* pi = in.array().data();
        double* po = out.array().data();
        const std::size_t nd = shape_.size();
        const std::size_t total = in.array().size();
        parallel_for(total, [&, pi, po](std::size_t flat) {
            long coord[8];
            std::size_t rem = flat;
            for (std::size_t k = nd; k-- > 0;) {
                coord[k] = static_cast<long>(rem % shape_[k]);
                rem /= shape_[k];
            }
            double s = 0.0;
            for (const Tap& t : taps_) {
                std::size_t q = 0;
                bool inside = true;
                for (std::size_t k = 0; k < nd; ++k) {
                    const long c = coord[k] + sign * t.offset[k];
                    if (c < 0 || c >= static_cast<long>(shape_[k])) {
                        inside = false;
                        break;
                    }
                    q += static_cast<std::size_t>(c) * strides_[k];
                }
                if (inside) s += t.weight * pi[q];
            }
            po[flat] = s;
        });
    }

    std::vector<std::size_t> shape_;
    std::vector<std::size_t> strides_;
    std::vector<Tap> taps_;
};

}  // namespace

Operator finite_difference(const ArraySpec& spec, const std::string& label, Difference kind, Boundary boundary,
                           std::optional<double> spacing) {
    const double h = spacing ? *spacing : axis_spacing(spec, label);
    return Operator(std::make_shared<FiniteDifferenceOperator>(spec, label, kind, boundary, h));
}

Operator gradient(const ArraySpec& spec, Boundary boundary) {
    if (spec.labels.empty()) throw ShapeError("gradient needs at least one axis");
    std::vector<Operator> diffs;
    for (const auto& label : spec.labels) diffs.push_back(finite_difference(spec, label, Difference::forward, boundary));
    return block_column(diffs);
}

Operator symmetrised_gradient(const ArraySpec& spec, Boundary boundary) {
    const std::size_t dim = spec.labels.size();
    if (dim < 2 || dim > 3) throw ShapeError("symmetrised gradient needs a 2-D or 3-D image");
    std::vector<Operator> diffs;
    for (const auto& label : spec.labels) diffs.push_back(finite_difference(spec, label, Difference::backward, boundary));
    Space field(std::vector<Space>(dim, Space(spec)));
    Space tensor(std::vector<Space>(dim + dim * (dim - 1) / 2, Space(spec)));
    return Operator(std::make_shared<SymmetrisedGradientOperator>(std::move(field), std::move(tensor), std::move(diffs)));
}

Operator blurring(const ArraySpec& spec, const LabeledArray& kernel) {
    if (spec.shape.size() > 8) throw ShapeError("blurring supports at most 8 dimensions");
    return Operator(std::make_shared<BlurringOperator>(spec, kernel));
}

}  // namespace tomo
