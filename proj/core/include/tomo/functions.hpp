#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tomo/operator.hpp"

namespace tomo {

/// Function value with an explicit flag for +infinity (outside the domain
/// of an indicator or conjugate), so logs stay finite.
struct FunctionValue {
    double value = 0.0;
    bool infeasible = false;

    FunctionValue& operator+=(const FunctionValue& o) {
        value += o.value;
        infeasible = infeasible || o.infeasible;
        return *this;
    }
};

inline FunctionValue operator+(FunctionValue a, const FunctionValue& b) { return a += b; }
inline FunctionValue operator*(double s, FunctionValue a) {
    a.value *= s;
    return a;
}

/// Implementation interface for convex functions. Each capability is
/// optional; calling a missing one throws CapabilityError. `out` never
/// aliases the input when these are called through Function.
class FunctionImpl {
public:
    virtual ~FunctionImpl() = default;
    virtual std::string name() const = 0;

    virtual FunctionValue value(const DataContainer& x) const = 0;

    virtual bool has_gradient() const { return false; }
    virtual void gradient(const DataContainer& x, DataContainer& out) const;

    virtual bool has_prox() const { return false; }
    /// prox_{tau f}(x) = argmin_v tau f(v) + |v - x|^2 / 2.
    virtual void prox(const DataContainer& x, double tau, DataContainer& out) const;

    virtual bool has_prox_conjugate() const { return has_prox(); }
    /// prox_{tau f*}(x); the default uses the Moreau identity
    /// x - tau prox_{f/tau}(x/tau).
    virtual void prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const;

    virtual bool has_convex_conjugate() const { return false; }
    virtual FunctionValue convex_conjugate(const DataContainer& x) const;

    /// Lipschitz constant of the gradient, when known.
    virtual std::optional<double> lipschitz() const { return std::nullopt; }
};

/// Shared immutable handle to a convex function.
class Function {
public:
    explicit Function(std::shared_ptr<const FunctionImpl> impl);

    std::string name() const { return impl_->name(); }
    const FunctionImpl& impl() const noexcept { return *impl_; }

    FunctionValue value(const DataContainer& x) const { return impl_->value(x); }
    /// Value, throwing DomainError when infeasible.
    double operator()(const DataContainer& x) const;

    bool has_gradient() const { return impl_->has_gradient(); }
    bool has_prox() const { return impl_->has_prox(); }
    bool has_prox_conjugate() const { return impl_->has_prox_conjugate(); }
    bool has_convex_conjugate() const { return impl_->has_convex_conjugate(); }
    std::optional<double> lipschitz() const { return impl_->lipschitz(); }

    DataContainer gradient(const DataContainer& x) const;
    void gradient(const DataContainer& x, DataContainer& out) const;
    DataContainer prox(const DataContainer& x, double tau) const;
    void prox(const DataContainer& x, double tau, DataContainer& out) const;
    DataContainer prox_conjugate(const DataContainer& x, double tau) const;
    void prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const;
    FunctionValue convex_conjugate(const DataContainer& x) const;

private:
    std::shared_ptr<const FunctionImpl> impl_;
};

/// f(x) = c. The conjugate value is reported as -c without checking that
/// its argument is zero, which keeps primal-dual gaps finite for g = 0.
Function constant_function(double c);
Function zero_function();

/// sum_i w_i (x_i - b_i)^2; b defaults to 0 and w to 1.
Function l2_norm_squared(std::optional<DataContainer> b = std::nullopt,
                         std::optional<DataContainer> w = std::nullopt);

/// c * |A x - b|^2 (weighted by w when given). No 1/2 factor.
Function least_squares(const Operator& a, const DataContainer& b, double c = 1.0,
                       std::optional<DataContainer> w = std::nullopt);

/// sum_i |x_i - b_i|.
Function l1_norm(std::optional<DataContainer> b = std::nullopt);

/// Sum over voxels of the Euclidean norm across the entries of a block.
Function mixed_l21();

/// Sum over voxels of sqrt(sum_k U_k^2 + beta^2); beta > 0.
Function smooth_mixed_l21(double beta);

/// sum_i (x_i + eta_i) - b_i + b_i log(b_i / (x_i + eta_i)), with 0 log 0 = 0.
Function kullback_leibler(const DataContainer& b, std::optional<DataContainer> eta = std::nullopt);

/// Indicator of lower <= x <= upper; bounds may be infinite.
Function indicator_box(double lower = -std::numeric_limits<double>::infinity(),
                       double upper = std::numeric_limits<double>::infinity());

struct TotalVariationOptions {
    int iterations = 100;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    Boundary boundary = Boundary::neumann;
};

/// Isotropic TV, the mixed L21 norm of the forward-difference gradient.
/// The prox runs a fixed number of fast gradient projection steps on the
/// dual problem, optionally with a box constraint on the result.
Function total_variation(const TotalVariationOptions& options = {});

// Algebra.
/// f + g: values, gradients and Lipschitz constants add; no prox.
Function operator+(const Function& f, const Function& g);
/// alpha f with alpha >= 0; prox_{tau (alpha f)} = prox_{(tau alpha) f}.
Function operator*(double alpha, const Function& f);
/// x -> f(x - c).
Function translate(const Function& f, const DataContainer& c);
/// x -> f(A x); gradient A* grad f(A x), Lipschitz constant L_f |A|^2.
Function composition(const Function& f, const Operator& a);
/// Separable sum over the entries of a block container.
Function block_function(const std::vector<Function>& parts);

}  // namespace tomo
