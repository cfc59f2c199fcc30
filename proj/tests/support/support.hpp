#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tomo/data_container.hpp"
#include "tomo/operator.hpp"

namespace testing {

using namespace tomo;

inline void randomise(DataContainer& x, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for_each_leaf(x, [&](LabeledArray& a) {
        for (double& v : a.values()) v = u(rng);
    });
}

inline DataContainer random_like(const Space& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    DataContainer x = s.allocate();
    randomise(x, seed, lo, hi);
    return x;
}

/// All leaf values in order.
inline std::vector<double> flatten(const DataContainer& x) {
    std::vector<double> out;
    for_each_leaf(x, [&](const LabeledArray& a) { out.insert(out.end(), a.values().begin(), a.values().end()); });
    return out;
}

inline void unflatten(const std::vector<double>& v, DataContainer& x) {
    std::size_t k = 0;
    for_each_leaf(x, [&](LabeledArray& a) {
        for (double& e : a.values()) e = v[k++];
    });
}

/// |<Ax,y> - <x,A*y>| / (|Ax||y| + |x||A*y|)
inline double dot_test(const Operator& op, std::uint64_t seed) {
    const DataContainer x = random_like(op.domain(), seed);
    const DataContainer y = random_like(op.range(), seed + 1000003);
    const DataContainer ax = op.direct(x);
    const DataContainer aty = op.adjoint(y);
    const double lhs = dot(ax, y), rhs = dot(x, aty);
    const double scale = norm(ax) * norm(y) + norm(x) * norm(aty);
    return scale == 0.0 ? std::abs(lhs - rhs) : std::abs(lhs - rhs) / scale;
}

/// Dense matrix (row-major, rows = range size) assembled by applying the
/// direct operator to each basis vector of the domain.
struct Dense {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

inline Dense assemble_direct(const Operator& op) {
    DataContainer e = op.domain().allocate();
    Dense m;
    m.cols = e.total_size();
    m.rows = op.range().allocate().total_size();
    m.a.assign(m.rows * m.cols, 0.0);
    std::vector<double> basis(m.cols, 0.0);
    for (std::size_t j = 0; j < m.cols; ++j) {
        basis[j] = 1.0;
        unflatten(basis, e);
        basis[j] = 0.0;
        const auto col = flatten(op.direct(e));
        for (std::size_t i = 0; i < m.rows; ++i) m.a[i * m.cols + j] = col[i];
    }
    return m;
}

inline Dense assemble_adjoint_transposed(const Operator& op) {
    DataContainer e = op.range().allocate();
    Dense m;
    m.rows = e.total_size();
    m.cols = op.domain().allocate().total_size();
    m.a.assign(m.rows * m.cols, 0.0);
    std::vector<double> basis(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        basis[i] = 1.0;
        unflatten(basis, e);
        basis[i] = 0.0;
        const auto row = flatten(op.adjoint(e));
        for (std::size_t j = 0; j < m.cols; ++j) m.a[i * m.cols + j] = row[j];
    }
    return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Golden-section minimisation of a unimodal scalar function on [lo, hi].
template <class F>
double golden_min(F&& f, double lo, double hi, double tol = 1e-12) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace testing
