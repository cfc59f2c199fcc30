#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tomo/geometry.hpp"

namespace tomo {

/// Shape, axis labels and optional geometry of a dense array.
struct ArraySpec {
    std::vector<std::string> labels;
    std::vector<std::size_t> shape;
    std::optional<Geometry> geometry;

    explicit ArraySpec(std::vector<std::string> labels_ = {}, std::vector<std::size_t> shape_ = {},
                       std::optional<Geometry> geometry_ = std::nullopt);
    explicit ArraySpec(const Geometry& g);

    std::size_t size() const;
    /// Labels and extents agree; geometry is not compared.
    bool same_layout(const ArraySpec& other) const;
    /// Throws ShapeError / GeometryError when an invariant is broken.
    void validate() const;
    std::string describe() const;
};

enum class Relation { greater, greater_equal, less, less_equal, equal, not_equal };

/// Row-major n-D array of doubles with ordered, unique axis labels. A 0-D
/// array (empty label list) holds a single scalar.
class LabeledArray {
public:
    LabeledArray();
    explicit LabeledArray(ArraySpec spec, double fill = 0.0);
    explicit LabeledArray(const Geometry& geometry, double fill = 0.0);
    LabeledArray(ArraySpec spec, std::vector<double> values);

    /// 1-D convenience constructor.
    static LabeledArray vector(std::vector<double> values, std::string label = "horizontal_x");

    const ArraySpec& spec() const noexcept { return spec_; }
    const std::vector<std::string>& labels() const noexcept { return spec_.labels; }
    const std::vector<std::size_t>& shape() const noexcept { return spec_.shape; }
    const std::optional<Geometry>& geometry() const noexcept { return spec_.geometry; }
    void set_geometry(std::optional<Geometry> geometry);

    std::size_t ndim() const noexcept { return spec_.shape.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t axis_index(std::string_view label) const;
    std::size_t extent(std::string_view label) const { return spec_.shape[axis_index(label)]; }
    std::size_t stride(std::size_t axis) const;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    void fill(double v);

    // Elementwise algebra. Array operands must share labels and shape.
    LabeledArray& operator+=(const LabeledArray& other);
    LabeledArray& operator-=(const LabeledArray& other);
    LabeledArray& operator*=(const LabeledArray& other);
    /// Throws DomainError on a zero denominator.
    LabeledArray& operator/=(const LabeledArray& other);
    LabeledArray& operator+=(double s);
    LabeledArray& operator-=(double s);
    LabeledArray& operator*=(double s);
    LabeledArray& operator/=(double s);

    void exp_in_place();
    /// Throws DomainError when any entry is not strictly positive.
    void log_in_place();
    void abs_in_place();
    LabeledArray exp() const;
    LabeledArray log() const;
    LabeledArray abs() const;

    double sum() const;
    double mean() const;
    double min() const;
    double max() const;
    double dot(const LabeledArray& other) const;
    double squared_norm() const;
    double norm() const;

    /// Remove axis `label` by fixing it at `index`.
    LabeledArray get_slice(std::string_view label, std::size_t index) const;
    /// Physically transpose to a new label order.
    LabeledArray reorder(const std::vector<std::string>& order) const;

    /// Throws ShapeError unless labels and shape match.
    void require_same_layout(const LabeledArray& other, std::string_view what) const;

    bool operator==(const LabeledArray& other) const;

private:
    std::size_t flat_index(std::initializer_list<std::size_t> index) const;

    ArraySpec spec_;
    std::vector<double> values_;
};

LabeledArray operator+(LabeledArray a, const LabeledArray& b);
LabeledArray operator-(LabeledArray a, const LabeledArray& b);
LabeledArray operator*(LabeledArray a, const LabeledArray& b);
LabeledArray operator/(LabeledArray a, const LabeledArray& b);
LabeledArray operator+(LabeledArray a, double s);
LabeledArray operator-(LabeledArray a, double s);
LabeledArray operator*(LabeledArray a, double s);
LabeledArray operator*(double s, LabeledArray a);
LabeledArray operator/(LabeledArray a, double s);
LabeledArray operator-(LabeledArray a);

/// Binary mask (1.0 where the relation holds, 0.0 elsewhere).
LabeledArray compare(const LabeledArray& a, Relation rel, const LabeledArray& b);
LabeledArray compare(const LabeledArray& a, Relation rel, double s);

/// Stack equally shaped arrays along a new axis inserted at `position`.
/// The result carries no geometry.
LabeledArray stack(const std::vector<LabeledArray>& slices, std::string label, std::size_t position = 0);

}  // namespace tomo
