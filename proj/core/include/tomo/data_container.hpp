#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "tomo/labeled_array.hpp"

namespace tomo {

class DataContainer;

/// Ordered, non-empty list of containers (arrays or nested blocks).
class BlockContainer {
public:
    explicit BlockContainer(std::vector<DataContainer> entries);

    std::size_t size() const noexcept;
    DataContainer& operator[](std::size_t i);
    const DataContainer& operator[](std::size_t i) const;
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::vector<DataContainer> entries_;
};

/// Either a LabeledArray leaf or a BlockContainer node. This is the operand
/// type of every operator, function and algorithm.
class DataContainer {
public:
    /// Empty leaf, a placeholder to be assigned later.
    DataContainer() : node_(LabeledArray()) {}
    DataContainer(LabeledArray array) : node_(std::move(array)) {}
    DataContainer(BlockContainer block) : node_(std::move(block)) {}
    DataContainer(std::initializer_list<DataContainer> entries)
        : node_(BlockContainer(std::vector<DataContainer>(entries))) {}

    bool is_block() const noexcept { return std::holds_alternative<BlockContainer>(node_); }
    LabeledArray& array();
    const LabeledArray& array() const;
    BlockContainer& block();
    const BlockContainer& block() const;
    /// Block entry i; throws ShapeError for leaves.
    DataContainer& operator[](std::size_t i) { return block()[i]; }
    const DataContainer& operator[](std::size_t i) const { return block()[i]; }
    std::size_t num_entries() const { return is_block() ? block().size() : 1; }

    /// Total number of scalar entries over all leaves.
    std::size_t total_size() const;
    std::string describe() const;

    // Elementwise algebra, distributed over identical block trees.
    DataContainer& operator+=(const DataContainer& other);
    DataContainer& operator-=(const DataContainer& other);
    DataContainer& operator*=(const DataContainer& other);
    DataContainer& operator/=(const DataContainer& other);
    DataContainer& operator+=(double s);
    DataContainer& operator-=(double s);
    DataContainer& operator*=(double s);
    DataContainer& operator/=(double s);

    bool operator==(const DataContainer& other) const;

private:
    std::variant<LabeledArray, BlockContainer> node_;
};

DataContainer operator+(DataContainer a, const DataContainer& b);
DataContainer operator-(DataContainer a, const DataContainer& b);
DataContainer operator*(DataContainer a, const DataContainer& b);
DataContainer operator*(double s, DataContainer a);
DataContainer operator*(DataContainer a, double s);

/// True when both trees have the same nesting and leaf layouts.
bool same_structure(const DataContainer& a, const DataContainer& b);
void require_same_structure(const DataContainer& a, const DataContainer& b, const std::string& what);

/// Visit corresponding leaves of one or two identically shaped trees.
void for_each_leaf(DataContainer& x, const std::function<void(LabeledArray&)>& f);
void for_each_leaf(const DataContainer& x, const std::function<void(const LabeledArray&)>& f);
void for_each_leaf_pair(DataContainer& x, const DataContainer& y,
                        const std::function<void(LabeledArray&, const LabeledArray&)>& f);

double dot(const DataContainer& a, const DataContainer& b);
double squared_norm(const DataContainer& a);
double norm(const DataContainer& a);
void fill(DataContainer& a, double value);
/// out = a * x + b * y; `out` may alias x or y.
void axpby(double a, const DataContainer& x, double b, const DataContainer& y, DataContainer& out);
DataContainer zeros_like(const DataContainer& x);

/// Describes the shape of an operand: an array layout or a list of spaces.
/// Operators use spaces as their domain and range.
class Space {
public:
    Space(ArraySpec spec) : node_(std::move(spec)) {}
    Space(const Geometry& g) : node_(ArraySpec(g)) {}
    explicit Space(std::vector<Space> entries);

    static Space of(const DataContainer& x);

    bool is_block() const noexcept { return std::holds_alternative<std::vector<Space>>(node_); }
    const ArraySpec& spec() const;
    const std::vector<Space>& entries() const;
    std::size_t num_entries() const { return is_block() ? entries().size() : 1; }
    const Space& operator[](std::size_t i) const { return entries().at(i); }

    DataContainer allocate(double value = 0.0) const;
    bool matches(const DataContainer& x) const;
    /// Throws ShapeError naming `what` when x does not match.
    void require(const DataContainer& x, const std::string& what) const;
    bool operator==(const Space& other) const;
    std::string describe() const;

private:
    std::variant<ArraySpec, std::vector<Space>> node_;
};

}  // namespace tomo
