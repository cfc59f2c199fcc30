#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tomo/data_container.hpp"

namespace tomo {

/// Implementation interface for linear operators. `direct` maps domain to
/// range and `adjoint` maps range to domain; inputs have already been
/// checked against the spaces and `out` never aliases the input.
class OperatorImpl {
public:
    OperatorImpl(Space domain, Space range) : domain_(std::move(domain)), range_(std::move(range)) {}
    virtual ~OperatorImpl() = default;

    const Space& domain() const noexcept { return domain_; }
    const Space& range() const noexcept { return range_; }

    virtual void direct(const DataContainer& x, DataContainer& out) const = 0;
    virtual void adjoint(const DataContainer& y, DataContainer& out) const = 0;
    virtual std::string name() const = 0;

    std::optional<double> cached_norm() const;
    void cache_norm(double value) const;

private:
    Space domain_;
    Space range_;
    mutable std::mutex norm_mutex_;
    mutable std::optional<double> norm_;
};

struct NormOptions {
    double tolerance = 1e-4;
    int max_iterations = 100;
    std::uint64_t seed = 5489;
};

/// Shared handle to a linear operator. Copies share the implementation and
/// its norm cache.
class Operator {
public:
    explicit Operator(std::shared_ptr<const OperatorImpl> impl);

    const Space& domain() const noexcept { return impl_->domain(); }
    const Space& range() const noexcept { return impl_->range(); }
    std::string name() const { return impl_->name(); }
    const OperatorImpl& impl() const noexcept { return *impl_; }

    DataContainer direct(const DataContainer& x) const;
    void direct(const DataContainer& x, DataContainer& out) const;
    DataContainer adjoint(const DataContainer& y) const;
    void adjoint(const DataContainer& y, DataContainer& out) const;

    /// Operator 2-norm, estimated once by power iteration and cached.
    double norm() const;
    /// Store a known norm, skipping estimation.
    void set_norm(double value) const;

private:
    std::shared_ptr<const OperatorImpl> impl_;
};

/// Power iteration on A*A. Throws ConvergenceError (carrying the best
/// estimate) when the relative change is still above tolerance after
/// `max_iterations` steps.
double estimate_norm(const Operator& op, const NormOptions& options = {});

// Algebra. Adjoints follow (aA)* = aA*, (A+B)* = A*+B*, (AB)* = B*A*.
Operator operator*(double alpha, const Operator& a);
Operator operator+(const Operator& a, const Operator& b);
Operator operator-(const Operator& a, const Operator& b);
/// Composition a(b(x)).
Operator compose(const Operator& a, const Operator& b);
Operator operator*(const Operator& a, const Operator& b);

// Structural operators.
Operator identity_operator(const Space& space);
Operator zero_operator(const Space& domain, const Space& range);
Operator zero_operator(const Space& space);
/// (Ax)_i = d_i x_i on d's layout.
Operator diagonal_operator(const LabeledArray& d);
/// Multiplication by a binary (0/1) mask; other values are rejected.
Operator mask_operator(const LabeledArray& mask);

/// Dense row-major matrix acting on flattened arrays.
Operator matrix_operator(const ArraySpec& domain, const ArraySpec& range, std::vector<double> entries);

/// Grid of operators, row-major. Entries of one column share a domain and
/// entries of one row share a range. A single column takes a plain
/// (non-block) input and a single row produces a plain output.
Operator block_operator(std::size_t rows, std::size_t cols, const std::vector<Operator>& entries);
/// Column of operators: x -> (A_1 x, ..., A_k x).
Operator block_column(const std::vector<Operator>& entries);

// Differential operators.
enum class Difference { forward, backward };
enum class Boundary { neumann, periodic };

/// Finite difference along `label`, divided by the grid spacing. Forward
/// differences with Neumann boundary leave the last entry zero; backward
/// ones leave the first entry zero. Spacing defaults to the voxel size of
/// an attached image geometry, else 1.
Operator finite_difference(const ArraySpec& spec, const std::string& label,
                           Difference kind = Difference::forward, Boundary boundary = Boundary::neumann,
                           std::optional<double> spacing = std::nullopt);

/// Column of finite differences, one per axis in label order; the range is
/// always a block, even for 1-D input.
Operator gradient(const ArraySpec& spec, Boundary boundary = Boundary::neumann);

/// Maps a vector field (block with one entry per axis) to the unique
/// components of its symmetrised Jacobian: the d diagonal entries followed
/// by the off-diagonal pairs (i < j) scaled by sqrt(2), so the Euclidean
/// norm of the output equals the Frobenius norm of the tensor.
Operator symmetrised_gradient(const ArraySpec& spec, Boundary boundary = Boundary::neumann);

/// Correlation with an odd-sized kernel under zero padding. The kernel has
/// the image's dimensionality and no larger extents.
Operator blurring(const ArraySpec& spec, const LabeledArray& kernel);

/// Spacing of `label` taken from an attached image geometry (1 otherwise).
double axis_spacing(const ArraySpec& spec, const std::string& label);

}  // namespace tomo
