#include "tomo/labeled_array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "tomo/error.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <class Op>
void zip_apply(std::span<double> a, std::span<const double> b, Op op) {
    double* pa = a.data();
    const double* pb = b.data();
    parallel_for(a.size(), [=](std::size_t i) { pa[i] = op(pa[i], pb[i]); });
}

template <class Op>
void map_apply(std::span<double> a, Op op) {
    double* pa = a.data();
    parallel_for(a.size(), [=](std::size_t i) { pa[i] = op(pa[i]); });
}

bool holds(Relation rel, double x, double y) {
    switch (rel) {
        case Relation::greater: return x > y;
        case Relation::greater_equal: return x >= y;
        case Relation::less: return x < y;
        case Relation::less_equal: return x <= y;
        case Relation::equal: return x == y;
        case Relation::not_equal: return x != y;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// ArraySpec

ArraySpec::ArraySpec(std::vector<std::string> labels_, std::vector<std::size_t> shape_,
                     std::optional<Geometry> geometry_)
    : labels(std::move(labels_)), shape(std::move(shape_)), geometry(std::move(geometry_)) {
    validate();
}

ArraySpec::ArraySpec(const Geometry& g) : labels(dimension_labels(g)), shape(geometry_shape(g)), geometry(g) {
    validate();
}

std::size_t ArraySpec::size() const { return product(shape); }

bool ArraySpec::same_layout(const ArraySpec& other) const {
    return labels == other.labels && shape == other.shape;
}

void ArraySpec::validate() const {
    if (labels.size() != shape.size()) throw ShapeError("number of labels differs from number of dimensions");
    std::set<std::string> unique(labels.begin(), labels.end());
    if (unique.size() != labels.size()) throw ShapeError("axis labels must be unique");
    for (auto n : shape)
        if (n == 0) throw ShapeError("array extents must be positive");
    if (geometry) {
        tomo::validate(*geometry);
        if (dimension_labels(*geometry) != labels || geometry_shape(*geometry) != shape)
            throw GeometryError("geometry is inconsistent with array shape " + describe());
    }
}

std::string ArraySpec::describe() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << labels[i] << "=" << shape[i];
    os << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// LabeledArray

LabeledArray::LabeledArray() : values_(1, 0.0) {}

LabeledArray::LabeledArray(ArraySpec spec, double fill) : spec_(std::move(spec)), values_(spec_.size(), fill) {}

LabeledArray::LabeledArray(const Geometry& geometry, double fill) : LabeledArray(ArraySpec(geometry), fill) {}

LabeledArray::LabeledArray(ArraySpec spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
    if (values_.size() != spec_.size()) throw ShapeError("value count does not match shape " + spec_.describe());
}

LabeledArray LabeledArray::vector(std::vector<double> values, std::string label) {
    const std::size_t n = values.size();
    return LabeledArray(ArraySpec({std::move(label)}, {n}), std::move(values));
}

void LabeledArray::set_geometry(std::optional<Geometry> geometry) {
    ArraySpec next(spec_.labels, spec_.shape, std::move(geometry));
    spec_ = std::move(next);
}

std::size_t LabeledArray::axis_index(std::string_view label) const {
    for (std::size_t i = 0; i < spec_.labels.size(); ++i)
        if (spec_.labels[i] == label) return i;
    throw ShapeError("unknown axis label '" + std::string(label) + "' in " + spec_.describe());
}

std::size_t LabeledArray::stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t i = axis + 1; i < spec_.shape.size(); ++i) s *= spec_.shape[i];
    return s;
}

std::size_t LabeledArray::flat_index(std::initializer_list<std::size_t> index) const {
    if (index.size() != ndim()) throw ShapeError("index rank mismatch");
    std::size_t flat = 0, k = 0;
    for (auto i : index) {
        if (i >= spec_.shape[k]) throw ShapeError("index out of range");
        flat = flat * spec_.shape[k++] + i;
    }
    return flat;
}

double& LabeledArray::at(std::initializer_list<std::size_t> index) { return values_[flat_index(index)]; }

double LabeledArray::at(std::initializer_list<std::size_t> index) const { return values_[flat_index(index)]; }

void LabeledArray::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void LabeledArray::require_same_layout(const LabeledArray& other, std::string_view what) const {
    if (!spec_.same_layout(other.spec_))
        throw ShapeError(std::string(what) + ": layout mismatch " + spec_.describe() + " vs " + other.spec_.describe());
}

LabeledArray& LabeledArray::operator+=(const LabeledArray& o) {
    require_same_layout(o, "addition");
    zip_apply(values_, o.values_, [](double x, double y) { return x + y; });
    return *this;
}

LabeledArray& LabeledArray::operator-=(const LabeledArray& o) {
    require_same_layout(o, "subtraction");
    zip_apply(values_, o.values_, [](double x, double y) { return x - y; });
    return *this;
}

LabeledArray& LabeledArray::operator*=(const LabeledArray& o) {
    require_same_layout(o, "multiplication");
    zip_apply(values_, o.values_, [](double x, double y) { return x * y; });
    return *this;
}

LabeledArray& LabeledArray::operator/=(const LabeledArray& o) {
    require_same_layout(o, "division");
    if (std::any_of(o.values_.begin(), o.values_.end(), [](double v) { return v == 0.0; }))
        throw DomainError("division by zero");
    zip_apply(values_, o.values_, [](double x, double y) { return x / y; });
    return *this;
}

LabeledArray& LabeledArray::operator+=(double s) {
    map_apply(values_, [s](double x) { return x + s; });
    return *this;
}

LabeledArray& LabeledArray::operator-=(double s) {
    map_apply(values_, [s](double x) { return x - s; });
    return *this;
}

LabeledArray& LabeledArray::operator*=(double s) {
    map_apply(values_, [s](double x) { return x * s; });
    return *this;
}

LabeledArray& LabeledArray::operator/=(double s) {
    if (s == 0.0) throw DomainError("division by zero");
    map_apply(values_, [s](double x) { return x / s; });
    return *this;
}

void LabeledArray::exp_in_place() {
    map_apply(values_, [](double x) { return std::exp(x); });
}

void LabeledArray::log_in_place() {
    if (std::any_of(values_.begin(), values_.end(), [](double v) { return !(v > 0.0); }))
        throw DomainError("log of a non-positive entry");
    map_apply(values_, [](double x) { return std::log(x); });
}

void LabeledArray::abs_in_place() {
    map_apply(values_, [](double x) { return std::abs(x); });
}

LabeledArray LabeledArray::exp() const {
    LabeledArray out(*this);
    out.exp_in_place();
    return out;
}

LabeledArray LabeledArray::log() const {
    LabeledArray out(*this);
    out.log_in_place();
    return out;
}

LabeledArray LabeledArray::abs() const {
    LabeledArray out(*this);
    out.abs_in_place();
    return out;
}

double LabeledArray::sum() const {
    const double* p = values_.data();
    return deterministic_sum(values_.size(), [p](std::size_t i) { return p[i]; });
}

double LabeledArray::mean() const { return sum() / static_cast<double>(values_.size()); }

double LabeledArray::min() const { return *std::min_element(values_.begin(), values_.end()); }

double LabeledArray::max() const { return *std::max_element(values_.begin(), values_.end()); }

double LabeledArray::dot(const LabeledArray& other) const {
    require_same_layout(other, "dot");
    const double* a = values_.data();
    const double* b = other.values_.data();
    return deterministic_sum(values_.size(), [a, b](std::size_t i) { return a[i] * b[i]; });
}

double LabeledArray::squared_norm() const {
    const double* a = values_.data();
    return deterministic_sum(values_.size(), [a](std::size_t i) { return a[i] * a[i]; });
}

double LabeledArray::norm() const { return std::sqrt(squared_norm()); }

LabeledArray LabeledArray::get_slice(std::string_view label, std::size_t index) const {
    const std::size_t ax = axis_index(label);
    const std::size_t n = spec_.shape[ax];
    if (index >= n) throw ShapeError("slice index out of range for axis '" + std::string(label) + "'");
    std::vector<std::string> labels;
    std::vector<std::size_t> shape;
    for (std::size_t i = 0; i < ndim(); ++i) {
        if (i == ax) continue;
        labels.push_back(spec_.labels[i]);
        shape.push_back(spec_.shape[i]);
    }
    std::optional<Geometry> g;
    if (spec_.geometry) g = slice_geometry(*spec_.geometry, label, index);
    const std::size_t inner = stride(ax);
    const std::size_t outer = values_.size() / (inner * n);
    std::vector<double> out(outer * inner);
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>((o * n + index) * inner), inner,
                    out.begin() + static_cast<std::ptrdiff_t>(o * inner));
    ArraySpec spec(std::move(labels), std::move(shape));
    if (g && dimension_labels(*g) == spec.labels && geometry_shape(*g) == spec.shape) spec.geometry = std::move(g);
    return LabeledArray(std::move(spec), std::move(out));
}

LabeledArray LabeledArray::reorder(const std::vector<std::string>& order) const {
    if (order.size() != ndim() || !std::is_permutation(order.begin(), order.end(), spec_.labels.begin()))
        throw ShapeError("reorder: new order is not a permutation of the labels");
    std::vector<std::size_t> perm(ndim());
    std::vector<std::size_t> shape(ndim());
    for (std::size_t i = 0; i < ndim(); ++i) {
        perm[i] = axis_index(order[i]);
        shape[i] = spec_.shape[perm[i]];
    }
    std::optional<Geometry> g;
    if (spec_.geometry) g = reorder_geometry(*spec_.geometry, order);
    LabeledArray out(ArraySpec(order, shape, std::move(g)));

    std::vector<std::size_t> src_stride(ndim());
    for (std::size_t i = 0; i < ndim(); ++i) src_stride[i] = stride(perm[i]);
    const std::size_t n = values_.size();
    const std::size_t d = ndim();
    parallel_for(n, [&](std::size_t flat) {
        std::size_t rem = flat, src = 0;
        for (std::size_t k = d; k-- > 0;) {
            const std::size_t idx = rem % shape[k];
            rem /= shape[k];
            src += idx * src_stride[k];
        }
        out.values_[flat] = values_[src];
    });
    return out;
}

bool LabeledArray::operator==(const LabeledArray& other) const {
    return spec_.same_layout(other.spec_) && values_ == other.values_;
}

LabeledArray operator+(LabeledArray a, const LabeledArray& b) { return a += b; }
LabeledArray operator-(LabeledArray a, const LabeledArray& b) { return a -= b; }
LabeledArray operator*(LabeledArray a, const LabeledArray& b) { return a *= b; }
LabeledArray operator/(LabeledArray a, const LabeledArray& b) { return a /= b; }
LabeledArray operator+(LabeledArray a, double s) { return a += s; }
LabeledArray operator-(LabeledArray a, double s) { return a -= s; }
LabeledArray operator*(LabeledArray a, double s) { return a *= s; }
LabeledArray operator*(double s, LabeledArray a) { return a *= s; }
LabeledArray operator/(LabeledArray a, double s) { return a /= s; }
LabeledArray operator-(LabeledArray a) { return a *= -1.0; }

LabeledArray compare(const LabeledArray& a, Relation rel, const LabeledArray& b) {
    a.require_same_layout(b, "comparison");
    LabeledArray out(a.spec());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = holds(rel, a[i], b[i]) ? 1.0 : 0.0;
    return out;
}

LabeledArray compare(const LabeledArray& a, Relation rel, double s) {
    LabeledArray out(a.spec());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = holds(rel, a[i], s) ? 1.0 : 0.0;
    return out;
}

LabeledArray stack(const std::vector<LabeledArray>& slices, std::string label, std::size_t position) {
    if (slices.empty()) throw ShapeError("stack needs at least one slice");
    const auto& first = slices.front();
    if (position > first.ndim()) throw ShapeError("stack position out of range");
    for (const auto& s : slices) first.require_same_layout(s, "stack");
    std::vector<std::string> labels = first.labels();
    std::vector<std::size_t> shape = first.shape();
    labels.insert(labels.begin() + static_cast<std::ptrdiff_t>(position), std::move(label));
    shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(position), slices.size());
    std::size_t inner = 1;
    for (std::size_t i = position; i < first.ndim(); ++i) inner *= first.shape()[i];
    const std::size_t outer = first.size() / inner;
    const std::size_t n = slices.size();
    std::vector<double> values(first.size() * n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < n; ++k)
            std::copy_n(slices[k].values().begin() + static_cast<std::ptrdiff_t>(o * inner), inner,
                        values.begin() + static_cast<std::ptrdiff_t>((o * n + k) * inner));
    return LabeledArray(ArraySpec(std::move(labels), std::move(shape)), std::move(values));
}

}  // namespace tomo
