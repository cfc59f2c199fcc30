#include "tomo/functions.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "tomo/error.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

// ---------------------------------------------------------------------------
// Defaults and handle

void FunctionImpl::gradient(const DataContainer&, DataContainer&) const {
    throw CapabilityError(name() + " has no gradient");
}

void FunctionImpl::prox(const DataContainer&, double, DataContainer&) const {
    throw CapabilityError(name() + " has no proximal map");
}

void FunctionImpl::prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const {
    if (!has_prox()) throw CapabilityError(name() + " has no conjugate proximal map");
    DataContainer scaled = x;
    scaled *= 1.0 / tau;
    prox(scaled, 1.0 / tau, out);
    axpby(1.0, x, -tau, out, out);
}

FunctionValue FunctionImpl::convex_conjugate(const DataContainer&) const {
    throw CapabilityError(name() + " has no convex conjugate");
}

Function::Function(std::shared_ptr<const FunctionImpl> impl) : impl_(std::move(impl)) {
    if (!impl_) throw Error("null function implementation");
}

double Function::operator()(const DataContainer& x) const {
    const auto v = impl_->value(x);
    if (v.infeasible) throw DomainError(name() + ": argument outside the domain");
    return v.value;
}

DataContainer Function::gradient(const DataContainer& x) const {
    DataContainer out = zeros_like(x);
    impl_->gradient(x, out);
    return out;
}

void Function::gradient(const DataContainer& x, DataContainer& out) const {
    if (&x == &out) {
        out = gradient(x);
        return;
    }
    impl_->gradient(x, out);
}

DataContainer Function::prox(const DataContainer& x, double tau) const {
    DataContainer out = zeros_like(x);
    prox(x, tau, out);
    return out;
}

void Function::prox(const DataContainer& x, double tau, DataContainer& out) const {
    if (!(tau > 0.0)) throw DomainError("prox step must be positive");
    if (&x == &out) {
        out = prox(x, tau);
        return;
    }
    impl_->prox(x, tau, out);
}

DataContainer Function::prox_conjugate(const DataContainer& x, double tau) const {
    DataContainer out = zeros_like(x);
    prox_conjugate(x, tau, out);
    return out;
}

void Function::prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const {
    if (!(tau > 0.0)) throw DomainError("prox step must be positive");
    if (&x == &out) {
        out = prox_conjugate(x, tau);
        return;
    }
    impl_->prox_conjugate(x, tau, out);
}

FunctionValue Function::convex_conjugate(const DataContainer& x) const { return impl_->convex_conjugate(x); }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<const LabeledArray*> leaves(const DataContainer& x) {
    std::vector<const LabeledArray*> out;
    for_each_leaf(x, [&](const LabeledArray& a) { out.push_back(&a); });
    return out;
}

std::vector<LabeledArray*> leaves(DataContainer& x) {
    std::vector<LabeledArray*> out;
    for_each_leaf(x, [&](LabeledArray& a) { out.push_back(&a); });
    return out;
}

/// Elementwise data attached to a function (shift, weights, background),
/// checked against the argument's structure on use.
struct Param {
    std::optional<DataContainer> data;
    double fallback = 0.0;

    void check(const DataContainer& x, const std::string& what) const {
        if (data) require_same_structure(x, *data, what);
    }
    std::vector<const double*> pointers() const {
        std::vector<const double*> p;
        if (data)
            for (const auto* l : leaves(*data)) p.push_back(l->data());
        return p;
    }
};

inline double at(const std::vector<const double*>& p, std::size_t leaf, std::size_t i, double fallback) {
    return p.empty() ? fallback : p[leaf][i];
}

/// out_i = f(x_i, b_i, w_i)
template <class F>
void zip_map(const DataContainer& x, DataContainer& out, const Param& b, const Param& w, F f) {
    const auto xs = leaves(x);
    const auto os = leaves(out);
    const auto bs = b.pointers(), ws = w.pointers();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double* px = xs[k]->data();
        double* po = os[k]->data();
        parallel_for(xs[k]->size(), [&, k, px, po](std::size_t i) {
            po[i] = f(px[i], at(bs, k, i, b.fallback), at(ws, k, i, w.fallback));
        });
    }
}

/// sum_i f(x_i, b_i, w_i), deterministic.
template <class F>
double zip_sum(const DataContainer& x, const Param& b, const Param& w, F f) {
    const auto xs = leaves(x);
    const auto bs = b.pointers(), ws = w.pointers();
    double total = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double* px = xs[k]->data();
        total += deterministic_sum(xs[k]->size(), [&, k, px](std::size_t i) {
            return f(px[i], at(bs, k, i, b.fallback), at(ws, k, i, w.fallback));
        });
    }
    return total;
}

// ---------------------------------------------------------------------------
// Constant

class ConstantFunction final : public FunctionImpl {
public:
    explicit ConstantFunction(double c) : c_(c) {}
    std::string name() const override { return "constant"; }
    FunctionValue value(const DataContainer&) const override { return {c_, false}; }
    bool has_gradient() const override { return true; }
    void gradient(const DataContainer&, DataContainer& out) const override { fill(out, 0.0); }
    bool has_prox() const override { return true; }
    void prox(const DataContainer& x, double, DataContainer& out) const override {
        for_each_leaf_pair(out, x, [](LabeledArray& o, const LabeledArray& i) {
            std::copy(i.values().begin(), i.values().end(), o.values().begin());
        });
    }
    void prox_conjugate(const DataContainer&, double, DataContainer& out) const override { fill(out, 0.0); }
    bool has_convex_conjugate() const override { return true; }
    FunctionValue convex_conjugate(const DataContainer&) const override { return {-c_, false}; }
    std::optional<double> lipschitz() const override { return 0.0; }

private:
    double c_;
};

// ---------------------------------------------------------------------------
// Weighted squared L2

class L2NormSquared final : public FunctionImpl {
public:
    L2NormSquared(std::optional<DataContainer> b, std::optional<DataContainer> w)
        : b_{std::move(b), 0.0}, w_{std::move(w), 1.0} {
        max_w_ = 1.0;
        if (w_.data) {
            max_w_ = 0.0;
            for_each_leaf(*w_.data, [&](const LabeledArray& a) {
                for (double v : a.values()) {
                    if (!(v >= 0.0)) throw DomainError("l2_norm_squared weights must be non-negative");
                    max_w_ = std::max(max_w_, v);
                }
            });
        }
    }
    std::string name() const override { return w_.data ? "weighted_l2_norm_squared" : "l2_norm_squared"; }

    FunctionValue value(const DataContainer& x) const override {
        check(x);
        return {zip_sum(x, b_, w_, [](double u, double b, double w) { return w * (u - b) * (u - b); }), false};
    }
    bool has_gradient() const override { return true; }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        check(x);
        zip_map(x, out, b_, w_, [](double u, double b, double w) { return 2.0 * w * (u - b); });
    }
    std::optional<double> lipschitz() const override { return 2.0 * max_w_; }

    bool has_prox() const override { return true; }
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        check(x);
        zip_map(x, out, b_, w_,
                [tau](double u, double b, double w) { return (u + 2.0 * tau * w * b) / (1.0 + 2.0 * tau * w); });
    }
    void prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const override {
        check(x);
        zip_map(x, out, b_, w_, [tau](double u, double b, double w) {
            return w > 0.0 ? 2.0 * w * (u - tau * b) / (2.0 * w + tau) : 0.0;
        });
    }
    bool has_convex_conjugate() const override { return true; }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        check(y);
        std::atomic<bool> infeasible{false};
        const double v = zip_sum(y, b_, w_, [&infeasible](double s, double b, double w) {
            if (w > 0.0) return s * s / (4.0 * w) + s * b;
            if (s != 0.0) infeasible = true;
            return 0.0;
        });
        return {v, infeasible.load()};
    }

private:
    void check(const DataContainer& x) const {
        b_.check(x, name());
        w_.check(x, name());
    }
    Param b_, w_;
    double max_w_ = 1.0;
};

// ---------------------------------------------------------------------------
// Least squares c |A x - b|^2_w

class LeastSquares final : public FunctionImpl {
public:
    LeastSquares(Operator a, DataContainer b, double c, std::optional<DataContainer> w)
        : a_(std::move(a)), b_(std::move(b)), c_(c), w_{std::move(w), 1.0} {
        a_.range().require(b_, "least_squares data");
        if (w_.data) {
            a_.range().require(*w_.data, "least_squares weights");
            for_each_leaf(*w_.data, [&](const LabeledArray& arr) {
                for (double v : arr.values()) {
                    if (!(v >= 0.0)) throw DomainError("least_squares weights must be non-negative");
                    max_w_ = std::max(max_w_, v);
                }
            });
        } else {
            max_w_ = 1.0;
        }
        if (!(c_ >= 0.0)) throw DomainError("least_squares scale must be non-negative");
    }
    std::string name() const override { return "least_squares"; }

    FunctionValue value(const DataContainer& x) const override {
        DataContainer r = a_.direct(x);
        r -= b_;
        const Param none;
        return {c_ * zip_sum(r, none, w_, [](double v, double, double w) { return w * v * v; }), false};
    }
    bool has_gradient() const override { return true; }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        DataContainer r = a_.direct(x);
        r -= b_;
        const Param none;
        zip_map(r, r, none, w_, [c = c_](double v, double, double w) { return 2.0 * c * w * v; });
        a_.adjoint(r, out);
    }
    std::optional<double> lipschitz() const override {
        const double n = a_.norm();
        return 2.0 * c_ * max_w_ * n * n;
    }

private:
    Operator a_;
    DataContainer b_;
    double c_;
    Param w_;
    double max_w_ = 0.0;
};

// ---------------------------------------------------------------------------
// L1

class L1Norm final : public FunctionImpl {
public:
    explicit L1Norm(std::optional<DataContainer> b) : b_{std::move(b), 0.0} {}
    std::string name() const override { return "l1_norm"; }

    FunctionValue value(const DataContainer& x) const override {
        b_.check(x, name());
        return {zip_sum(x, b_, none_, [](double u, double b, double) { return std::abs(u - b); }), false};
    }
    bool has_prox() const override { return true; }
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        b_.check(x, name());
        zip_map(x, out, b_, none_, [tau](double u, double b, double) {
            const double d = u - b;
            const double m = std::max(std::abs(d) - tau, 0.0);
            return b + (d > 0.0 ? m : (d < 0.0 ? -m : 0.0));
        });
    }
    void prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const override {
        b_.check(x, name());
        zip_map(x, out, b_, none_, [tau](double u, double b, double) { return std::clamp(u - tau * b, -1.0, 1.0); });
    }
    bool has_convex_conjugate() const override { return true; }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        b_.check(y, name());
        std::atomic<bool> infeasible{false};
        const double v = zip_sum(y, b_, none_, [&infeasible](double s, double b, double) {
            if (std::abs(s) > 1.0 + 1e-12) infeasible = true;
            return s * b;
        });
        return {v, infeasible.load()};
    }

private:
    Param b_;
    Param none_;
};

// ---------------------------------------------------------------------------
// Mixed L21 and its smooth variant

/// Leaves of a block of equally shaped arrays.
std::vector<const LabeledArray*> field_leaves(const DataContainer& x, const std::string& what) {
    if (!x.is_block()) throw ShapeError(what + " expects a block container");
    std::vector<const LabeledArray*> out;
    for (const auto& e : x.block()) {
        out.push_back(&e.array());
        if (!out.back()->spec().same_layout(out.front()->spec()))
            throw ShapeError(what + ": block entries must share one shape");
    }
    return out;
}

std::vector<double> pointwise_norms(const std::vector<const LabeledArray*>& f, double beta2) {
    std::vector<double> n(f.front()->size());
    parallel_for(n.size(), [&](std::size_t i) {
        double s = beta2;
        for (const auto* a : f) s += (*a)[i] * (*a)[i];
        n[i] = std::sqrt(s);
    });
    return n;
}

class MixedL21 final : public FunctionImpl {
public:
    std::string name() const override { return "mixed_l21"; }
    FunctionValue value(const DataContainer& x) const override {
        const auto n = pointwise_norms(field_leaves(x, name()), 0.0);
        return {deterministic_sum(n.size(), [&](std::size_t i) { return n[i]; }), false};
    }
    bool has_prox() const override { return true; }
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        const auto f = field_leaves(x, name());
        const auto n = pointwise_norms(f, 0.0);
        auto o = leaves(out);
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double* pf = f[k]->data();
            double* po = o[k]->data();
            parallel_for(n.size(), [&, pf, po](std::size_t i) {
                po[i] = n[i] > 0.0 ? pf[i] * (std::max(n[i] - tau, 0.0) / n[i]) : 0.0;
            });
        }
    }
    void prox_conjugate(const DataContainer& x, double, DataContainer& out) const override {
        const auto f = field_leaves(x, name());
        const auto n = pointwise_norms(f, 0.0);
        auto o = leaves(out);
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double* pf = f[k]->data();
            double* po = o[k]->data();
            parallel_for(n.size(), [&, pf, po](std::size_t i) { po[i] = pf[i] / std::max(1.0, n[i]); });
        }
    }
    bool has_convex_conjugate() const override { return true; }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        const auto n = pointwise_norms(field_leaves(y, name()), 0.0);
        const double m = n.empty() ? 0.0 : *std::max_element(n.begin(), n.end());
        return {0.0, m > 1.0 + 1e-12};
    }
};

class SmoothMixedL21 final : public FunctionImpl {
public:
    explicit SmoothMixedL21(double beta) : beta_(beta) {
        if (!(beta > 0.0)) throw DomainError("smooth_mixed_l21 needs beta > 0");
    }
    std::string name() const override { return "smooth_mixed_l21"; }
    FunctionValue value(const DataContainer& x) const override {
        const auto n = pointwise_norms(field_leaves(x, name()), beta_ * beta_);
        return {deterministic_sum(n.size(), [&](std::size_t i) { return n[i]; }), false};
    }
    bool has_gradient() const override { return true; }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        const auto f = field_leaves(x, name());
        const auto n = pointwise_norms(f, beta_ * beta_);
        auto o = leaves(out);
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double* pf = f[k]->data();
            double* po = o[k]->data();
            parallel_for(n.size(), [&, pf, po](std::size_t i) { po[i] = pf[i] / n[i]; });
        }
    }
    std::optional<double> lipschitz() const override { return 1.0 / beta_; }

private:
    double beta_;
};

// ---------------------------------------------------------------------------
// Kullback-Leibler

class KullbackLeibler final : public FunctionImpl {
public:
    KullbackLeibler(DataContainer b, std::optional<DataContainer> eta) : b_{std::move(b), 0.0}, eta_{std::move(eta), 0.0} {
        if (eta_.data) require_same_structure(*b_.data, *eta_.data, "kullback_leibler background");
        for_each_leaf(*b_.data, [](const LabeledArray& a) {
            for (double v : a.values())
                if (!(v >= 0.0)) throw DomainError("kullback_leibler data must be non-negative");
        });
        if (eta_.data)
            for_each_leaf(*eta_.data, [](const LabeledArray& a) {
                for (double v : a.values())
                    if (!(v >= 0.0)) throw DomainError("kullback_leibler background must be non-negative");
            });
    }
    std::string name() const override { return "kullback_leibler"; }

    FunctionValue value(const DataContainer& x) const override {
        check(x);
        std::atomic<bool> infeasible{false};
        const double v = zip_sum(x, b_, eta_, [&infeasible](double u, double b, double eta) {
            const double s = u + eta;
            if (b > 0.0) {
                if (!(s > 0.0)) {
                    infeasible = true;
                    return 0.0;
                }
                return s - b + b * std::log(b / s);
            }
            if (s < 0.0) infeasible = true;
            return s;
        });
        return {v, infeasible.load()};
    }

    bool has_gradient() const override { return true; }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        check(x);
        std::atomic<bool> bad{false};
        zip_map(x, out, b_, eta_, [&bad](double u, double b, double eta) {
            const double s = u + eta;
            if (b > 0.0 && !(s > 0.0)) {
                bad = true;
                return 0.0;
            }
            return b > 0.0 ? 1.0 - b / s : 1.0;
        });
        if (bad) throw DomainError("kullback_leibler gradient outside the domain (x + eta <= 0 where b > 0)");
    }

    bool has_prox() const override { return true; }
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        check(x);
        zip_map(x, out, b_, eta_, [tau](double u, double b, double eta) {
            const double t = u + eta - tau;
            return 0.5 * (t + std::sqrt(t * t + 4.0 * tau * b)) - eta;
        });
    }
    void prox_conjugate(const DataContainer& x, double sigma, DataContainer& out) const override {
        check(x);
        zip_map(x, out, b_, eta_, [sigma](double z, double b, double eta) {
            const double t = z + sigma * eta;
            return 0.5 * ((t + 1.0) - std::sqrt((t - 1.0) * (t - 1.0) + 4.0 * sigma * b));
        });
    }
    bool has_convex_conjugate() const override { return true; }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        check(y);
        std::atomic<bool> infeasible{false};
        const double v = zip_sum(y, b_, eta_, [&infeasible](double s, double b, double eta) {
            if (b > 0.0) {
                if (!(s < 1.0)) {
                    infeasible = true;
                    return 0.0;
                }
                return -b * std::log1p(-s) - eta * s;
            }
            if (s > 1.0) infeasible = true;
            return -eta * s;
        });
        return {v, infeasible.load()};
    }

private:
    void check(const DataContainer& x) const {
        b_.check(x, name());
    }
    Param b_, eta_;
};

// ---------------------------------------------------------------------------
// Indicator of a box

class IndicatorBox final : public FunctionImpl {
public:
    IndicatorBox(double lo, double hi) : lo_(lo), hi_(hi) {
        if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw DomainError("indicator_box needs lower <= upper");
    }
    std::string name() const override { return "indicator_box"; }
    FunctionValue value(const DataContainer& x) const override {
        bool out = false;
        for_each_leaf(x, [&](const LabeledArray& a) {
            for (double v : a.values())
                if (!(v >= lo_ && v <= hi_)) out = true;
        });
        return {0.0, out};
    }
    bool has_prox() const override { return true; }
    void prox(const DataContainer& x, double, DataContainer& out) const override {
        const Param none;
        zip_map(x, out, none, none, [lo = lo_, hi = hi_](double u, double, double) { return std::clamp(u, lo, hi); });
    }
    bool has_convex_conjugate() const override { return true; }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        std::atomic<bool> infeasible{false};
        const Param none;
        const double v = zip_sum(y, none, none, [&](double s, double, double) {
            if (s > 0.0) {
                if (hi_ == kInf) infeasible = true;
                return hi_ == kInf ? 0.0 : hi_ * s;
            }
            if (s < 0.0) {
                if (lo_ == -kInf) infeasible = true;
                return lo_ == -kInf ? 0.0 : lo_ * s;
            }
            return 0.0;
        });
        return {v, infeasible.load()};
    }

private:
    double lo_, hi_;
};

// ---------------------------------------------------------------------------
// Total variation

class TotalVariation final : public FunctionImpl {
public:
    explicit TotalVariation(const TotalVariationOptions& o) : o_(o) {
        if (o_.iterations < 1) throw DomainError("total_variation needs at least one inner iteration");
        if (o_.lower > o_.upper) throw DomainError("total_variation box needs lower <= upper");
    }
    std::string name() const override { return "total_variation"; }

    FunctionValue value(const DataContainer& x) const override {
        const Operator g = grad(x);
        return MixedL21().value(g.direct(x));
    }

    bool has_prox() const override { return true; }

    // Fast gradient projection on the dual of min_v tau TV(v) + |v - x|^2 / 2.
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        const Operator g = grad(x);
        const ArraySpec& spec = x.array().spec();
        double lsq = 0.0;
        for (const auto& label : spec.labels) {
            const double h = axis_spacing(spec, label);
            lsq += 4.0 / (h * h);
        }
        const double step = 1.0 / (tau * lsq);
        const MixedL21 ball;
        DataContainer p = g.range().allocate();
        DataContainer p_old = p;
        DataContainer q = p;
        DataContainer v = zeros_like(x);
        DataContainer gv = p;
        double t = 1.0;
        for (int k = 0; k < o_.iterations; ++k) {
            primal(x, q, tau, g, v);
            g.direct(v, gv);
            axpby(1.0, q, step, gv, gv);
            std::swap(p_old, p);
            ball.prox_conjugate(gv, 1.0, p);
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            axpby(1.0 + (t - 1.0) / t_next, p, -(t - 1.0) / t_next, p_old, q);
            t = t_next;
        }
        primal(x, p, tau, g, out);
    }

private:
    Operator grad(const DataContainer& x) const {
        if (x.is_block()) throw ShapeError("total_variation expects an image, got a block container");
        return tomo::gradient(x.array().spec(), o_.boundary);
    }

    // v = P_box(x - tau grad^T p)
    void primal(const DataContainer& x, const DataContainer& p, double tau, const Operator& g, DataContainer& v) const {
        g.adjoint(p, v);
        axpby(1.0, x, -tau, v, v);
        if (o_.lower > -kInf || o_.upper < kInf) {
            for_each_leaf(v, [&](LabeledArray& a) {
                for (double& e : a.values()) e = std::clamp(e, o_.lower, o_.upper);
            });
        }
    }

    TotalVariationOptions o_;
};

// ---------------------------------------------------------------------------
// Algebra

class SumFunction final : public FunctionImpl {
public:
    SumFunction(Function f, Function g) : f_(std::move(f)), g_(std::move(g)) {}
    std::string name() const override { return "sum(" + f_.name() + ", " + g_.name() + ")"; }
    FunctionValue value(const DataContainer& x) const override { return f_.value(x) + g_.value(x); }
    bool has_gradient() const override { return f_.has_gradient() && g_.has_gradient(); }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        if (!has_gradient()) FunctionImpl::gradient(x, out);
        f_.gradient(x, out);
        out += g_.gradient(x);
    }
    bool has_prox_conjugate() const override { return false; }
    std::optional<double> lipschitz() const override {
        auto a = f_.lipschitz(), b = g_.lipschitz();
        if (a && b) return *a + *b;
        return std::nullopt;
    }

private:
    Function f_, g_;
};

class ScaledFunction final : public FunctionImpl {
public:
    ScaledFunction(double alpha, Function f) : alpha_(alpha), f_(std::move(f)) {
        if (!(alpha >= 0.0)) throw DomainError("functions may only be scaled by alpha >= 0");
    }
    std::string name() const override { return "scaled(" + f_.name() + ")"; }
    FunctionValue value(const DataContainer& x) const override { return alpha_ * f_.value(x); }
    bool has_gradient() const override { return f_.has_gradient(); }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        f_.gradient(x, out);
        out *= alpha_;
    }
    bool has_prox() const override { return f_.has_prox(); }
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        if (alpha_ == 0.0) {
            ConstantFunction(0.0).prox(x, tau, out);
            return;
        }
        f_.impl().prox(x, tau * alpha_, out);
    }
    bool has_prox_conjugate() const override { return f_.has_prox_conjugate(); }
    // (alpha f)*(y) = alpha f*(y / alpha), hence
    // prox_{tau (alpha f)*}(x) = alpha prox_{(tau / alpha) f*}(x / alpha).
    void prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const override {
        if (alpha_ == 0.0) {
            fill(out, 0.0);
            return;
        }
        DataContainer scaled = x;
        scaled *= 1.0 / alpha_;
        f_.impl().prox_conjugate(scaled, tau / alpha_, out);
        out *= alpha_;
    }
    bool has_convex_conjugate() const override { return f_.has_convex_conjugate() && alpha_ > 0.0; }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        if (alpha_ == 0.0) return FunctionImpl::convex_conjugate(y);
        DataContainer scaled = y;
        scaled *= 1.0 / alpha_;
        return alpha_ * f_.convex_conjugate(scaled);
    }
    std::optional<double> lipschitz() const override {
        if (auto l = f_.lipschitz()) return alpha_ * *l;
        return std::nullopt;
    }

private:
    double alpha_;
    Function f_;
};

class TranslatedFunction final : public FunctionImpl {
public:
    TranslatedFunction(Function f, DataContainer c) : f_(std::move(f)), c_(std::move(c)) {}
    std::string name() const override { return "translated(" + f_.name() + ")"; }
    FunctionValue value(const DataContainer& x) const override { return f_.value(x - c_); }
    bool has_gradient() const override { return f_.has_gradient(); }
    void gradient(const DataContainer& x, DataContainer& out) const override { f_.gradient(x - c_, out); }
    bool has_prox() const override { return f_.has_prox(); }
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        f_.impl().prox(x - c_, tau, out);
        out += c_;
    }
    bool has_prox_conjugate() const override { return f_.has_prox_conjugate(); }
    // f(. - c)*(y) = f*(y) + <y, c>
    void prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const override {
        DataContainer shifted = x;
        axpby(1.0, x, -tau, c_, shifted);
        f_.impl().prox_conjugate(shifted, tau, out);
    }
    bool has_convex_conjugate() const override { return f_.has_convex_conjugate(); }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        return f_.convex_conjugate(y) + FunctionValue{dot(y, c_), false};
    }
    std::optional<double> lipschitz() const override { return f_.lipschitz(); }

private:
    Function f_;
    DataContainer c_;
};

class CompositionFunction final : public FunctionImpl {
public:
    CompositionFunction(Function f, Operator a) : f_(std::move(f)), a_(std::move(a)) {}
    std::string name() const override { return f_.name() + " o " + a_.name(); }
    FunctionValue value(const DataContainer& x) const override { return f_.value(a_.direct(x)); }
    bool has_gradient() const override { return f_.has_gradient(); }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        a_.adjoint(f_.gradient(a_.direct(x)), out);
    }
    std::optional<double> lipschitz() const override {
        if (auto l = f_.lipschitz()) {
            const double n = a_.norm();
            return *l * n * n;
        }
        return std::nullopt;
    }

private:
    Function f_;
    Operator a_;
};

class BlockFunction final : public FunctionImpl {
public:
    explicit BlockFunction(std::vector<Function> parts) : parts_(std::move(parts)) {
        if (parts_.empty()) throw ShapeError("block function must not be empty");
    }
    std::string name() const override { return "block_function"; }
    FunctionValue value(const DataContainer& x) const override {
        check(x);
        FunctionValue v;
        for (std::size_t i = 0; i < parts_.size(); ++i) v += parts_[i].value(x[i]);
        return v;
    }
    bool has_gradient() const override {
        return std::all_of(parts_.begin(), parts_.end(), [](const Function& f) { return f.has_gradient(); });
    }
    void gradient(const DataContainer& x, DataContainer& out) const override {
        check(x);
        for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i].gradient(x[i], out[i]);
    }
    bool has_prox() const override {
        return std::all_of(parts_.begin(), parts_.end(), [](const Function& f) { return f.has_prox(); });
    }
    void prox(const DataContainer& x, double tau, DataContainer& out) const override {
        check(x);
        for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i].prox(x[i], tau, out[i]);
    }
    bool has_prox_conjugate() const override {
        return std::all_of(parts_.begin(), parts_.end(), [](const Function& f) { return f.has_prox_conjugate(); });
    }
    void prox_conjugate(const DataContainer& x, double tau, DataContainer& out) const override {
        check(x);
        for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i].prox_conjugate(x[i], tau, out[i]);
    }
    bool has_convex_conjugate() const override {
        return std::all_of(parts_.begin(), parts_.end(), [](const Function& f) { return f.has_convex_conjugate(); });
    }
    FunctionValue convex_conjugate(const DataContainer& y) const override {
        check(y);
        FunctionValue v;
        for (std::size_t i = 0; i < parts_.size(); ++i) v += parts_[i].convex_conjugate(y[i]);
        return v;
    }
    std::optional<double> lipschitz() const override {
        double m = 0.0;
        for (const auto& f : parts_) {
            auto l = f.lipschitz();
            if (!l) return std::nullopt;
            m = std::max(m, *l);
        }
        return m;
    }

private:
    void check(const DataContainer& x) const {
        if (!x.is_block() || x.block().size() != parts_.size())
            throw ShapeError("block function of " + std::to_string(parts_.size()) + " parts applied to " +
                             x.describe());
    }
    std::vector<Function> parts_;
};

}  // namespace

Function constant_function(double c) { return Function(std::make_shared<ConstantFunction>(c)); }
Function zero_function() { return constant_function(0.0); }

Function l2_norm_squared(std::optional<DataContainer> b, std::optional<DataContainer> w) {
    if (b && w) require_same_structure(*b, *w, "l2_norm_squared");
    return Function(std::make_shared<L2NormSquared>(std::move(b), std::move(w)));
}

Function least_squares(const Operator& a, const DataContainer& b, double c, std::optional<DataContainer> w) {
    return Function(std::make_shared<LeastSquares>(a, b, c, std::move(w)));
}

Function l1_norm(std::optional<DataContainer> b) { return Function(std::make_shared<L1Norm>(std::move(b))); }
Function mixed_l21() { return Function(std::make_shared<MixedL21>()); }
Function smooth_mixed_l21(double beta) { return Function(std::make_shared<SmoothMixedL21>(beta)); }

Function kullback_leibler(const DataContainer& b, std::optional<DataContainer> eta) {
    return Function(std::make_shared<KullbackLeibler>(b, std::move(eta)));
}

Function indicator_box(double lower, double upper) { return Function(std::make_shared<IndicatorBox>(lower, upper)); }

Function total_variation(const TotalVariationOptions& options) {
    return Function(std::make_shared<TotalVariation>(options));
}

Function operator+(const Function& f, const Function& g) { return Function(std::make_shared<SumFunction>(f, g)); }

Function operator*(double alpha, const Function& f) { return Function(std::make_shared<ScaledFunction>(alpha, f)); }

Function translate(const Function& f, const DataContainer& c) {
    return Function(std::make_shared<TranslatedFunction>(f, c));
}

Function composition(const Function& f, const Operator& a) {
    return Function(std::make_shared<CompositionFunction>(f, a));
}

Function block_function(const std::vector<Function>& parts) {
    return Function(std::make_shared<BlockFunction>(parts));
}

}  // namespace tomo
