#include "tomo/operator.hpp"

#include <cmath>
#include <random>

#include "tomo/error.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

std::optional<double> OperatorImpl::cached_norm() const {
    std::lock_guard lock(norm_mutex_);
    return norm_;
}

void OperatorImpl::cache_norm(double value) const {
    std::lock_guard lock(norm_mutex_);
    norm_ = value;
}

Operator::Operator(std::shared_ptr<const OperatorImpl> impl) : impl_(std::move(impl)) {
    if (!impl_) throw Error("null operator implementation");
}

DataContainer Operator::direct(const DataContainer& x) const {
    domain().require(x, name() + " direct input");
    DataContainer out = range().allocate();
    impl_->direct(x, out);
    return out;
}

void Operator::direct(const DataContainer& x, DataContainer& out) const {
    domain().require(x, name() + " direct input");
    range().require(out, name() + " direct output");
    if (&x == &out) {
        DataContainer tmp = range().allocate();
        impl_->direct(x, tmp);
        out = std::move(tmp);
        return;
    }
    impl_->direct(x, out);
}

DataContainer Operator::adjoint(const DataContainer& y) const {
    range().require(y, name() + " adjoint input");
    DataContainer out = domain().allocate();
    impl_->adjoint(y, out);
    return out;
}

void Operator::adjoint(const DataContainer& y, DataContainer& out) const {
    range().require(y, name() + " adjoint input");
    domain().require(out, name() + " adjoint output");
    if (&y == &out) {
        DataContainer tmp = domain().allocate();
        impl_->adjoint(y, tmp);
        out = std::move(tmp);
        return;
    }
    impl_->adjoint(y, out);
}

double Operator::norm() const {
    if (auto n = impl_->cached_norm()) return *n;
    const double n = estimate_norm(*this);
    impl_->cache_norm(n);
    return n;
}

void Operator::set_norm(double value) const {
    if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError("operator norm must be finite and >= 0");
    impl_->cache_norm(value);
}

double estimate_norm(const Operator& op, const NormOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    DataContainer x = op.domain().allocate();
    for_each_leaf(x, [&](LabeledArray& a) {
        for (double& v : a.values()) v = normal(rng);
    });
    double nx = norm(x);
    if (nx == 0.0) return 0.0;
    x *= 1.0 / nx;

    DataContainer ax = op.range().allocate();
    DataContainer y = op.domain().allocate();
    double estimate = 0.0;
    double best = 0.0;
    for (int k = 0; k < options.max_iterations; ++k) {
        op.direct(x, ax);
        // Rayleigh quotient <x, A*A x> with |x| = 1.
        const double current = norm(ax);
        best = std::max(best, current);
        op.adjoint(ax, y);
        const double ny = norm(y);
        if (current == 0.0 || ny == 0.0) return 0.0;
        if (k > 0 && std::abs(current - estimate) <= 0.1 * options.tolerance * current) return current;
        estimate = current;
        axpby(1.0 / ny, y, 0.0, y, x);
    }
    throw ConvergenceError("operator norm estimate did not converge in " +
                               std::to_string(options.max_iterations) + " iterations",
                           best);
}

namespace {

// ---------------------------------------------------------------------------
// Algebra

class ScaledOperator final : public OperatorImpl {
public:
    ScaledOperator(double alpha, Operator a) : OperatorImpl(a.domain(), a.range()), alpha_(alpha), a_(std::move(a)) {
        if (auto n = a_.impl().cached_norm()) cache_norm(std::abs(alpha_) * *n);
    }
    void direct(const DataContainer& x, DataContainer& out) const override {
        a_.impl().direct(x, out);
        out *= alpha_;
    }
    void adjoint(const DataContainer& y, DataContainer& out) const override {
        a_.impl().adjoint(y, out);
        out *= alpha_;
    }
    std::string name() const override { return "scaled(" + a_.name() + ")"; }

private:
    double alpha_;
    Operator a_;
};

class SumOperator final : public OperatorImpl {
public:
    SumOperator(Operator a, Operator b, double sign)
        : OperatorImpl(a.domain(), a.range()), a_(std::move(a)), b_(std::move(b)), sign_(sign) {
        if (!(a_.domain() == b_.domain()) || !(a_.range() == b_.range()))
            throw ShapeError("operator sum requires equal domains and ranges: " + a_.name() + ", " + b_.name());
    }
    void direct(const DataContainer& x, DataContainer& out) const override {
        a_.impl().direct(x, out);
        DataContainer tmp = range().allocate();
        b_.impl().direct(x, tmp);
        axpby(1.0, out, sign_, tmp, out);
    }
    void adjoint(const DataContainer& y, DataContainer& out) const override {
        a_.impl().adjoint(y, out);
        DataContainer tmp = domain().allocate();
        b_.impl().adjoint(y, tmp);
        axpby(1.0, out, sign_, tmp, out);
    }
    std::string name() const override { return "sum(" + a_.name() + ", " + b_.name() + ")"; }

private:
    Operator a_, b_;
    double sign_;
};

class ComposedOperator final : public OperatorImpl {
public:
    ComposedOperator(Operator a, Operator b) : OperatorImpl(b.domain(), a.range()), a_(std::move(a)), b_(std::move(b)) {
        if (!(a_.domain() == b_.range()))
            throw ShapeError("composition requires matching inner spaces: " + a_.domain().describe() + " vs " +
                             b_.range().describe());
    }
    void direct(const DataContainer& x, DataContainer& out) const override {
        DataContainer tmp = b_.range().allocate();
        b_.impl().direct(x, tmp);
        a_.impl().direct(tmp, out);
    }
    void adjoint(const DataContainer& y, DataContainer& out) const override {
        DataContainer tmp = a_.domain().allocate();
        a_.impl().adjoint(y, tmp);
        b_.impl().adjoint(tmp, out);
    }
    std::string name() const override { return a_.name() + " o " + b_.name(); }

private:
    Operator a_, b_;
};

// ---------------------------------------------------------------------------
// Structural

class IdentityOperator final : public OperatorImpl {
public:
    explicit IdentityOperator(const Space& s) : OperatorImpl(s, s) { cache_norm(1.0); }
    void direct(const DataContainer& x, DataContainer& out) const override { copy(x, out); }
    void adjoint(const DataContainer& y, DataContainer& out) const override { copy(y, out); }
    std::string name() const override { return "identity"; }

private:
    static void copy(const DataContainer& x, DataContainer& out) {
        for_each_leaf_pair(out, x, [](LabeledArray& o, const LabeledArray& i) {
            std::copy(i.values().begin(), i.values().end(), o.values().begin());
        });
    }
};

class ZeroOperator final : public OperatorImpl {
public:
    ZeroOperator(const Space& d, const Space& r) : OperatorImpl(d, r) { cache_norm(0.0); }
    void direct(const DataContainer&, DataContainer& out) const override { fill(out, 0.0); }
    void adjoint(const DataContainer&, DataContainer& out) const override { fill(out, 0.0); }
    std::string name() const override { return "zero"; }
};

class DiagonalOperator final : public OperatorImpl {
public:
    DiagonalOperator(const LabeledArray& d, std::string name)
        : OperatorImpl(Space(d.spec()), Space(d.spec())), d_(d), name_(std::move(name)) {
        double m = 0.0;
        for (double v : d_.values()) m = std::max(m, std::abs(v));
        cache_norm(m);
    }
    void direct(const DataContainer& x, DataContainer& out) const override {
        const double* px = x.array().data();
        const double* pd = d_.data();
        double* po = out.array().data();
        parallel_for(d_.size(), [=](std::size_t i) { po[i] = pd[i] * px[i]; });
    }
    void adjoint(const DataContainer& y, DataContainer& out) const override { direct(y, out); }
    std::string name() const override { return name_; }

private:
    LabeledArray d_;
    std::string name_;
};

class MatrixOperator final : public OperatorImpl {
public:
    MatrixOperator(const ArraySpec& d, const ArraySpec& r, std::vector<double> m)
        : OperatorImpl(Space(d), Space(r)), rows_(r.size()), cols_(d.size()), m_(std::move(m)) {
        if (m_.size() != rows_ * cols_)
            throw ShapeError("matrix has " + std::to_string(m_.size()) + " entries, expected " +
                             std::to_string(rows_ * cols_));
    }
    void direct(const DataContainer& x, DataContainer& out) const override {
        const double* px = x.array().data();
        double* po = out.array().data();
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) s += m_[i * cols_ + j] * px[j];
            po[i] = s;
        }
    }
    void adjoint(const DataContainer& y, DataContainer& out) const override {
        const double* py = y.array().data();
        double* po = out.array().data();
        std::fill(po, po + cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) po[j] += m_[i * cols_ + j] * py[i];
    }
    std::string name() const override { return "matrix"; }

private:
    std::size_t rows_, cols_;
    std::vector<double> m_;
};

// ---------------------------------------------------------------------------
// Block

class BlockOperator final : public OperatorImpl {
public:
    BlockOperator(std::size_t rows, std::size_t cols, std::vector<Operator> ops, Space domain, Space range)
        : OperatorImpl(std::move(domain), std::move(range)),
          rows_(rows),
          cols_(cols),
          ops_(std::move(ops)),
          block_in_(cols > 1),
          block_out_(rows > 1 || !(this->range() == ops_[0].range())) {}

    void direct(const DataContainer& x, DataContainer& out) const override {
        for (std::size_t i = 0; i < rows_; ++i) {
            DataContainer& yi = block_out_ ? out[i] : out;
            for (std::size_t j = 0; j < cols_; ++j) {
                const DataContainer& xj = block_in_ ? x[j] : x;
                const Operator& a = ops_[i * cols_ + j];
                if (j == 0) {
                    a.impl().direct(xj, yi);
                } else {
                    DataContainer tmp = a.range().allocate();
                    a.impl().direct(xj, tmp);
                    yi += tmp;
                }
            }
        }
    }

    void adjoint(const DataContainer& y, DataContainer& out) const override {
        for (std::size_t j = 0; j < cols_; ++j) {
            DataContainer& xj = block_in_ ? out[j] : out;
            for (std::size_t i = 0; i < rows_; ++i) {
                const DataContainer& yi = block_out_ ? y[i] : y;
                const Operator& a = ops_[i * cols_ + j];
                if (i == 0) {
                    a.impl().adjoint(yi, xj);
                } else {
                    DataContainer tmp = a.domain().allocate();
                    a.impl().adjoint(yi, tmp);
                    xj += tmp;
                }
            }
        }
    }

    std::string name() const override {
        return "block(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
    }

private:
    std::size_t rows_, cols_;
    std::vector<Operator> ops_;
    bool block_in_, block_out_;
};

}  // namespace

Operator operator*(double alpha, const Operator& a) { return Operator(std::make_shared<ScaledOperator>(alpha, a)); }

Operator operator+(const Operator& a, const Operator& b) {
    return Operator(std::make_shared<SumOperator>(a, b, 1.0));
}

Operator operator-(const Operator& a, const Operator& b) {
    return Operator(std::make_shared<SumOperator>(a, b, -1.0));
}

Operator compose(const Operator& a, const Operator& b) { return Operator(std::make_shared<ComposedOperator>(a, b)); }

Operator operator*(const Operator& a, const Operator& b) { return compose(a, b); }

Operator identity_operator(const Space& space) { return Operator(std::make_shared<IdentityOperator>(space)); }

Operator zero_operator(const Space& domain, const Space& range) {
    return Operator(std::make_shared<ZeroOperator>(domain, range));
}

Operator zero_operator(const Space& space) { return zero_operator(space, space); }

Operator diagonal_operator(const LabeledArray& d) { return Operator(std::make_shared<DiagonalOperator>(d, "diagonal")); }

Operator mask_operator(const LabeledArray& mask) {
    for (double v : mask.values())
        if (v != 0.0 && v != 1.0) throw DomainError("mask entries must be 0 or 1");
    return Operator(std::make_shared<DiagonalOperator>(mask, "mask"));
}

Operator matrix_operator(const ArraySpec& domain, const ArraySpec& range, std::vector<double> entries) {
    return Operator(std::make_shared<MatrixOperator>(domain, range, std::move(entries)));
}

Operator block_operator(std::size_t rows, std::size_t cols, const std::vector<Operator>& entries) {
    if (rows == 0 || cols == 0) throw ShapeError("block operator needs at least one row and column");
    if (entries.size() != rows * cols)
        throw ShapeError("block operator expects " + std::to_string(rows * cols) + " entries, got " +
                         std::to_string(entries.size()));
    std::vector<Space> domains, ranges;
    for (std::size_t j = 0; j < cols; ++j) {
        const Space& d = entries[j].domain();
        for (std::size_t i = 1; i < rows; ++i)
            if (!(entries[i * cols + j].domain() == d))
                throw ShapeError("block operator column " + std::to_string(j) + " has inconsistent domains");
        domains.push_back(d);
    }
    for (std::size_t i = 0; i < rows; ++i) {
        const Space& r = entries[i * cols].range();
        for (std::size_t j = 1; j < cols; ++j)
            if (!(entries[i * cols + j].range() == r))
                throw ShapeError("block operator row " + std::to_string(i) + " has inconsistent ranges");
        ranges.push_back(r);
    }
    Space domain = cols == 1 ? domains[0] : Space(std::move(domains));
    Space range = rows == 1 ? ranges[0] : Space(std::move(ranges));
    return Operator(std::make_shared<BlockOperator>(rows, cols, entries, std::move(domain), std::move(range)));
}

Operator block_column(const std::vector<Operator>& entries) {
    if (entries.empty()) throw ShapeError("block column must not be empty");
    std::vector<Space> ranges;
    for (const auto& e : entries) {
        if (!(e.domain() == entries[0].domain())) throw ShapeError("block column entries have inconsistent domains");
        ranges.push_back(e.range());
    }
    // A column always produces a block, also for a single entry.
    return Operator(
        std::make_shared<BlockOperator>(entries.size(), 1, entries, entries[0].domain(), Space(std::move(ranges))));
}

}  // namespace tomo
