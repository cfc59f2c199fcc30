#include "tomo/data_container.hpp"

#include <cmath>

#include "tomo/error.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

// ---------------------------------------------------------------------------
// BlockContainer

BlockContainer::BlockContainer(std::vector<DataContainer> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ShapeError("block container must not be empty");
}

std::size_t BlockContainer::size() const noexcept { return entries_.size(); }

DataContainer& BlockContainer::operator[](std::size_t i) {
    if (i >= entries_.size()) throw ShapeError("block index out of range");
    return entries_[i];
}

const DataContainer& BlockContainer::operator[](std::size_t i) const {
    if (i >= entries_.size()) throw ShapeError("block index out of range");
    return entries_[i];
}

// ---------------------------------------------------------------------------
// DataContainer

LabeledArray& DataContainer::array() {
    if (auto* a = std::get_if<LabeledArray>(&node_)) return *a;
    throw ShapeError("expected an array, got a block container");
}

const LabeledArray& DataContainer::array() const {
    if (const auto* a = std::get_if<LabeledArray>(&node_)) return *a;
    throw ShapeError("expected an array, got a block container");
}

BlockContainer& DataContainer::block() {
    if (auto* b = std::get_if<BlockContainer>(&node_)) return *b;
    throw ShapeError("expected a block container, got an array");
}

const BlockContainer& DataContainer::block() const {
    if (const auto* b = std::get_if<BlockContainer>(&node_)) return *b;
    throw ShapeError("expected a block container, got an array");
}

std::size_t DataContainer::total_size() const {
    if (!is_block()) return array().size();
    std::size_t n = 0;
    for (const auto& e : block()) n += e.total_size();
    return n;
}

std::string DataContainer::describe() const {
    if (!is_block()) return array().spec().describe();
    std::string s = "[";
    for (std::size_t i = 0; i < block().size(); ++i) s += (i ? ", " : "") + block()[i].describe();
    return s + "]";
}

bool same_structure(const DataContainer& a, const DataContainer& b) {
    if (a.is_block() != b.is_block()) return false;
    if (!a.is_block()) return a.array().spec().same_layout(b.array().spec());
    if (a.block().size() != b.block().size()) return false;
    for (std::size_t i = 0; i < a.block().size(); ++i)
        if (!same_structure(a.block()[i], b.block()[i])) return false;
    return true;
}

void require_same_structure(const DataContainer& a, const DataContainer& b, const std::string& what) {
    if (!same_structure(a, b))
        throw ShapeError(what + ": container structure mismatch " + a.describe() + " vs " + b.describe());
}

void for_each_leaf(DataContainer& x, const std::function<void(LabeledArray&)>& f) {
    if (!x.is_block()) {
        f(x.array());
        return;
    }
    for (auto& e : x.block()) for_each_leaf(e, f);
}

void for_each_leaf(const DataContainer& x, const std::function<void(const LabeledArray&)>& f) {
    if (!x.is_block()) {
        f(x.array());
        return;
    }
    for (const auto& e : x.block()) for_each_leaf(e, f);
}

void for_each_leaf_pair(DataContainer& x, const DataContainer& y,
                        const std::function<void(LabeledArray&, const LabeledArray&)>& f) {
    if (x.is_block() != y.is_block() || (x.is_block() && x.block().size() != y.block().size()))
        throw ShapeError("container structure mismatch " + x.describe() + " vs " + y.describe());
    if (!x.is_block()) {
        f(x.array(), y.array());
        return;
    }
    for (std::size_t i = 0; i < x.block().size(); ++i) for_each_leaf_pair(x.block()[i], y.block()[i], f);
}

DataContainer& DataContainer::operator+=(const DataContainer& o) {
    for_each_leaf_pair(*this, o, [](LabeledArray& a, const LabeledArray& b) { a += b; });
    return *this;
}

DataContainer& DataContainer::operator-=(const DataContainer& o) {
    for_each_leaf_pair(*this, o, [](LabeledArray& a, const LabeledArray& b) { a -= b; });
    return *this;
}

DataContainer& DataContainer::operator*=(const DataContainer& o) {
    for_each_leaf_pair(*this, o, [](LabeledArray& a, const LabeledArray& b) { a *= b; });
    return *this;
}

DataContainer& DataContainer::operator/=(const DataContainer& o) {
    for_each_leaf_pair(*this, o, [](LabeledArray& a, const LabeledArray& b) { a /= b; });
    return *this;
}

DataContainer& DataContainer::operator+=(double s) {
    for_each_leaf(*this, [s](LabeledArray& a) { a += s; });
    return *this;
}

DataContainer& DataContainer::operator-=(double s) {
    for_each_leaf(*this, [s](LabeledArray& a) { a -= s; });
    return *this;
}

DataContainer& DataContainer::operator*=(double s) {
    for_each_leaf(*this, [s](LabeledArray& a) { a *= s; });
    return *this;
}

DataContainer& DataContainer::operator/=(double s) {
    for_each_leaf(*this, [s](LabeledArray& a) { a /= s; });
    return *this;
}

bool DataContainer::operator==(const DataContainer& o) const {
    if (!same_structure(*this, o)) return false;
    if (!is_block()) return array() == o.array();
    for (std::size_t i = 0; i < block().size(); ++i)
        if (!(block()[i] == o.block()[i])) return false;
    return true;
}

DataContainer operator+(DataContainer a, const DataContainer& b) { return a += b; }
DataContainer operator-(DataContainer a, const DataContainer& b) { return a -= b; }
DataContainer operator*(DataContainer a, const DataContainer& b) { return a *= b; }
DataContainer operator*(double s, DataContainer a) { return a *= s; }
DataContainer operator*(DataContainer a, double s) { return a *= s; }

double dot(const DataContainer& a, const DataContainer& b) {
    require_same_structure(a, b, "dot");
    if (!a.is_block()) return a.array().dot(b.array());
    double s = 0.0;
    for (std::size_t i = 0; i < a.block().size(); ++i) s += dot(a.block()[i], b.block()[i]);
    return s;
}

double squared_norm(const DataContainer& a) {
    if (!a.is_block()) return a.array().squared_norm();
    double s = 0.0;
    for (const auto& e : a.block()) s += squared_norm(e);
    return s;
}

double norm(const DataContainer& a) { return std::sqrt(squared_norm(a)); }

void fill(DataContainer& a, double value) {
    for_each_leaf(a, [value](LabeledArray& x) { x.fill(value); });
}

void axpby(double a, const DataContainer& x, double b, const DataContainer& y, DataContainer& out) {
    require_same_structure(x, y, "axpby");
    require_same_structure(x, out, "axpby");
    if (!x.is_block()) {
        const double* px = x.array().data();
        const double* py = y.array().data();
        double* po = out.array().data();
        parallel_for(x.array().size(), [=](std::size_t i) { po[i] = a * px[i] + b * py[i]; });
        return;
    }
    for (std::size_t i = 0; i < x.block().size(); ++i) axpby(a, x.block()[i], b, y.block()[i], out.block()[i]);
}

DataContainer zeros_like(const DataContainer& x) { return Space::of(x).allocate(0.0); }

// ---------------------------------------------------------------------------
// Space

Space::Space(std::vector<Space> entries) : node_(std::move(entries)) {
    if (std::get<std::vector<Space>>(node_).empty()) throw ShapeError("block space must not be empty");
}

Space Space::of(const DataContainer& x) {
    if (!x.is_block()) return Space(x.array().spec());
    std::vector<Space> entries;
    for (const auto& e : x.block()) entries.push_back(Space::of(e));
    return Space(std::move(entries));
}

const ArraySpec& Space::spec() const {
    if (const auto* s = std::get_if<ArraySpec>(&node_)) return *s;
    throw ShapeError("expected an array space, got a block space");
}

const std::vector<Space>& Space::entries() const {
    if (const auto* e = std::get_if<std::vector<Space>>(&node_)) return *e;
    throw ShapeError("expected a block space, got an array space");
}

DataContainer Space::allocate(double value) const {
    if (!is_block()) return DataContainer(LabeledArray(spec(), value));
    std::vector<DataContainer> entries;
    for (const auto& e : this->entries()) entries.push_back(e.allocate(value));
    return DataContainer(BlockContainer(std::move(entries)));
}

bool Space::matches(const DataContainer& x) const {
    if (is_block() != x.is_block()) return false;
    if (!is_block()) return spec().same_layout(x.array().spec());
    if (entries().size() != x.block().size()) return false;
    for (std::size_t i = 0; i < entries().size(); ++i)
        if (!entries()[i].matches(x.block()[i])) return false;
    return true;
}

void Space::require(const DataContainer& x, const std::string& what) const {
    if (!matches(x)) throw ShapeError(what + ": expected " + describe() + ", got " + x.describe());
}

bool Space::operator==(const Space& o) const {
    if (is_block() != o.is_block()) return false;
    if (!is_block()) return spec().same_layout(o.spec());
    if (entries().size() != o.entries().size()) return false;
    for (std::size_t i = 0; i < entries().size(); ++i)
        if (!(entries()[i] == o.entries()[i])) return false;
    return true;
}

std::string Space::describe() const {
    if (!is_block()) return spec().describe();
    std::string s = "[";
    for (std::size_t i = 0; i < entries().size(); ++i) s += (i ? ", " : "") + entries()[i].describe();
    return s + "]";
}

}  // namespace tomo
