#include "tomo/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "tomo/error.hpp"

namespace tomo {

// ---------------------------------------------------------------------------
// Run loop

Algorithm::Algorithm(const SolverOptions& options) : options_(options) {}

bool Algorithm::should_log(std::size_t k) const {
    if (options_.log_interval == 0) return k < 100 || k % 10 == 0;
    return k % options_.log_interval == 0;
}

void Algorithm::log(std::ostream* verbose) {
    const Objective o = objective();
    HistoryEntry e;
    e.iteration = iteration_;
    e.primal = o.primal.value;
    e.primal_infeasible = o.primal.infeasible;
    if (o.dual) {
        e.dual = o.dual->value;
        e.dual_infeasible = o.dual->infeasible;
        if (!e.primal_infeasible && !e.dual_infeasible) e.gap = e.primal - e.dual;
    }
    history_.push_back(e);
    if (verbose) {
        char line[160];
        if (o.dual)
            std::snprintf(line, sizeof line, "%8zu  primal %.10e  dual %.10e  gap %.10e%s\n", e.iteration, e.primal,
                          e.dual, e.gap, (e.primal_infeasible || e.dual_infeasible) ? "  (infeasible)" : "");
        else
            std::snprintf(line, sizeof line, "%8zu  objective %.10e%s\n", e.iteration, e.primal,
                          e.primal_infeasible ? "  (infeasible)" : "");
        *verbose << name() << line;
    }
}

RunReport Algorithm::run(std::size_t n, const Observer& observer, std::ostream* verbose) {
    RunReport report;
    const std::size_t remaining = options_.max_iteration - iteration_;
    if (n > remaining) {
        n = remaining;
        report.truncated = true;
    }
    if (n > 0 && history_.empty()) log(verbose);
    for (std::size_t k = 0; k < n && !converged_; ++k) {
        step();
        ++iteration_;
        ++report.iterations;
        if (should_log(iteration_) || converged_) log(verbose);
        if (observer) observer(*this);
    }
    report.converged = converged_;
    return report;
}

namespace {

void put(std::ostream& out, double v, bool infeasible) {
    if (infeasible) {
        out << "inf";
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

void Algorithm::write_history_csv(std::ostream& out) const {
    const bool dual = std::any_of(history_.begin(), history_.end(), [](const auto& e) { return !std::isnan(e.dual); });
    out << (dual ? "iteration,primal,dual,gap\n" : "iteration,primal\n");
    for (const auto& e : history_) {
        out << e.iteration << ',';
        put(out, e.primal, e.primal_infeasible);
        if (dual) {
            out << ',';
            put(out, e.dual, e.dual_infeasible);
            out << ',';
            if (std::isnan(e.gap))
                out << "nan";
            else
                put(out, e.gap, false);
        }
        out << '\n';
    }
}

void Algorithm::write_history_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    write_history_csv(f);
    if (!f) throw IoError("failed writing " + path);
}

namespace {

void require_capability(bool ok, const Function& f, const std::string& what, const std::string& solver) {
    if (!ok) throw CapabilityError(solver + " needs " + what + " of " + f.name());
}

double positive(double v, const std::string& what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(what + " must be positive and finite");
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gradient descent

GradientDescent::GradientDescent(DataContainer initial, Function objective, const GradientDescentOptions& options)
    : Algorithm(options.solver), f_(std::move(objective)), o_(options), x_(std::move(initial)) {
    require_capability(f_.has_gradient(), f_, "the gradient", "gd");
    if (o_.step) {
        step_ = positive(*o_.step, "gd step");
    } else {
        const auto l = f_.lipschitz();
        step_ = (l && *l > 0.0) ? 1.0 / *l : 1.0;
    }
    if (!(o_.shrink > 0.0 && o_.shrink < 1.0)) throw DomainError("gd shrink factor must lie in (0, 1)");
    g_ = zeros_like(x_);
    trial_ = zeros_like(x_);
}

void GradientDescent::step() {
    f_.gradient(x_, g_);
    if (!o_.backtracking) {
        axpby(1.0, x_, -step_, g_, x_);
        return;
    }
    const double fx = f_.value(x_).value;
    const double gg = squared_norm(g_);
    if (gg == 0.0) {
        mark_converged();
        return;
    }
    double t = step_ * o_.growth;
    for (int k = 0; k < 60; ++k) {
        axpby(1.0, x_, -t, g_, trial_);
        const auto ft = f_.value(trial_);
        if (!ft.infeasible && ft.value <= fx - o_.armijo * t * gg) {
            std::swap(x_, trial_);
            step_ = t;
            return;
        }
        t *= o_.shrink;
    }
    mark_converged();
}

Algorithm::Objective GradientDescent::objective() const { return {f_.value(x_), std::nullopt}; }

// ---------------------------------------------------------------------------
// CGLS

Cgls::Cgls(DataContainer initial, Operator a, DataContainer b, const CglsOptions& options)
    : Algorithm(options.solver), a_(std::move(a)), o_(options), x_(std::move(initial)) {
    a_.domain().require(x_, "cgls initial");
    a_.range().require(b, "cgls data");
    r_ = a_.direct(x_);
    axpby(1.0, b, -1.0, r_, r_);
    s_ = a_.adjoint(r_);
    p_ = s_;
    q_ = zeros_like(r_);
    gamma_ = gamma0_ = squared_norm(s_);
    if (gamma_ == 0.0) mark_converged();
}

void Cgls::step() {
    a_.direct(p_, q_);
    const double qq = squared_norm(q_);
    if (qq == 0.0 || gamma_ == 0.0) {
        mark_converged();
        return;
    }
    const double alpha = gamma_ / qq;
    axpby(1.0, x_, alpha, p_, x_);
    axpby(1.0, r_, -alpha, q_, r_);
    a_.adjoint(r_, s_);
    const double gamma_new = squared_norm(s_);
    const double beta = gamma_new / gamma_;
    gamma_ = gamma_new;
    axpby(1.0, s_, beta, p_, p_);
    if (gamma_ == 0.0 || (o_.tolerance && std::sqrt(gamma_) <= *o_.tolerance * std::sqrt(gamma0_))) mark_converged();
}

Algorithm::Objective Cgls::objective() const { return {{squared_norm(r_), false}, std::nullopt}; }

// ---------------------------------------------------------------------------
// SIRT

namespace {

// 1 / s where |s| exceeds a small fraction of the largest sum, else 0.
void invert_sums(DataContainer& s) {
    double m = 0.0;
    for_each_leaf(s, [&](const LabeledArray& a) {
        for (double v : a.values()) m = std::max(m, std::abs(v));
    });
    const double floor = 1e-12 * m;
    for_each_leaf(s, [&](LabeledArray& a) {
        for (double& v : a.values()) v = std::abs(v) > floor ? 1.0 / std::abs(v) : 0.0;
    });
}

void clamp_all(DataContainer& x, double lo, double hi) {
    if (lo == -std::numeric_limits<double>::infinity() && hi == std::numeric_limits<double>::infinity()) return;
    for_each_leaf(x, [&](LabeledArray& a) {
        for (double& v : a.values()) v = std::clamp(v, lo, hi);
    });
}

}  // namespace

Sirt::Sirt(DataContainer initial, Operator a, DataContainer b, const SirtOptions& options)
    : Algorithm(options.solver), a_(std::move(a)), b_(std::move(b)), o_(options), x_(std::move(initial)) {
    a_.domain().require(x_, "sirt initial");
    a_.range().require(b_, "sirt data");
    if (!(o_.lower <= o_.upper)) throw DomainError("sirt bounds need lower <= upper");
    positive(o_.relaxation, "sirt relaxation");
    row_w_ = a_.direct(a_.domain().allocate(1.0));
    invert_sums(row_w_);
    col_w_ = a_.adjoint(a_.range().allocate(1.0));
    invert_sums(col_w_);
    r_ = zeros_like(b_);
    c_ = zeros_like(x_);
    clamp_all(x_, o_.lower, o_.upper);
}

void Sirt::step() {
    a_.direct(x_, r_);
    axpby(1.0, b_, -1.0, r_, r_);
    r_ *= row_w_;
    a_.adjoint(r_, c_);
    c_ *= col_w_;
    axpby(1.0, x_, o_.relaxation, c_, x_);
    clamp_all(x_, o_.lower, o_.upper);
}

Algorithm::Objective Sirt::objective() const {
    DataContainer r = a_.direct(x_);
    r -= b_;
    return {{squared_norm(r), false}, std::nullopt};
}

// ---------------------------------------------------------------------------
// FISTA

Fista::Fista(DataContainer initial, Function f, Function g, const FistaOptions& options)
    : Algorithm(options.solver), f_(std::move(f)), g_(std::move(g)), x_(std::move(initial)) {
    require_capability(f_.has_gradient(), f_, "the gradient", "fista");
    require_capability(g_.has_prox(), g_, "the proximal map", "fista");
    if (options.step) {
        step_ = positive(*options.step, "fista step");
    } else {
        const auto l = f_.lipschitz();
        if (!l) throw CapabilityError("fista needs a step or a known Lipschitz constant of " + f_.name());
        step_ = positive(1.0 / *l, "fista step 1/L");
    }
    x_old_ = x_;
    y_ = x_;
    grad_ = zeros_like(x_);
}

void Fista::step() {
    std::swap(x_old_, x_);
    f_.gradient(y_, grad_);
    axpby(1.0, y_, -step_, grad_, y_);
    g_.prox(y_, step_, x_);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_ * t_));
    const double m = (t_ - 1.0) / t_next;
    axpby(1.0 + m, x_, -m, x_old_, y_);
    t_ = t_next;
}

Algorithm::Objective Fista::objective() const { return {f_.value(x_) + g_.value(x_), std::nullopt}; }

// ---------------------------------------------------------------------------
// PDHG

Pdhg::Pdhg(DataContainer initial, Function f, Operator k, Function g, const PdhgOptions& options)
    : Algorithm(options.solver),
      f_(std::move(f)),
      k_(std::move(k)),
      g_(std::move(g)),
      theta_(options.theta),
      x_(std::move(initial)) {
    require_capability(f_.has_prox_conjugate(), f_, "the conjugate proximal map", "pdhg");
    require_capability(g_.has_prox(), g_, "the proximal map", "pdhg");
    k_.domain().require(x_, "pdhg initial");
    const double kn = k_.norm();
    const double safety = 0.99 * 0.99;
    if (options.sigma && options.tau) {
        sigma_ = positive(*options.sigma, "pdhg sigma");
        tau_ = positive(*options.tau, "pdhg tau");
    } else if (options.sigma) {
        sigma_ = positive(*options.sigma, "pdhg sigma");
        tau_ = safety / (sigma_ * kn * kn);
    } else if (options.tau) {
        tau_ = positive(*options.tau, "pdhg tau");
        sigma_ = safety / (tau_ * kn * kn);
    } else {
        sigma_ = tau_ = 0.99 / kn;
    }
    if (sigma_ * tau_ * kn * kn > 1.0 + 1e-12)
        throw DomainError("pdhg step sizes violate sigma tau |K|^2 <= 1");
    if (options.initial_dual) {
        k_.range().require(*options.initial_dual, "pdhg initial dual");
        y_ = *options.initial_dual;
    } else {
        y_ = k_.range().allocate();
    }
    x_old_ = x_;
    x_bar_ = x_;
    y_tmp_ = zeros_like(y_);
    x_tmp_ = zeros_like(x_);
}

void Pdhg::step() {
    std::swap(x_old_, x_);
    k_.direct(x_bar_, y_tmp_);
    axpby(1.0, y_, sigma_, y_tmp_, y_tmp_);
    f_.prox_conjugate(y_tmp_, sigma_, y_);
    k_.adjoint(y_, x_tmp_);
    axpby(1.0, x_old_, -tau_, x_tmp_, x_tmp_);
    g_.prox(x_tmp_, tau_, x_);
    axpby(1.0 + theta_, x_, -theta_, x_old_, x_bar_);
}

Algorithm::Objective Pdhg::objective() const {
    Objective o{f_.value(k_.direct(x_)) + g_.value(x_), std::nullopt};
    if (f_.has_convex_conjugate() && g_.has_convex_conjugate()) {
        DataContainer kty = k_.adjoint(y_);
        kty *= -1.0;
        const FunctionValue fc = f_.convex_conjugate(y_), gc = g_.convex_conjugate(kty);
        o.dual = FunctionValue{-fc.value - gc.value, fc.infeasible || gc.infeasible};
    }
    return o;
}

// ---------------------------------------------------------------------------
// LADMM

Ladmm::Ladmm(DataContainer initial, Function f, Operator k, Function g, const LadmmOptions& options)
    : Algorithm(options.solver), f_(std::move(f)), k_(std::move(k)), g_(std::move(g)), x_(std::move(initial)) {
    require_capability(f_.has_prox(), f_, "the proximal map", "ladmm");
    require_capability(g_.has_prox(), g_, "the proximal map", "ladmm");
    k_.domain().require(x_, "ladmm initial");
    const double kn = k_.norm();
    sigma_ = options.sigma ? positive(*options.sigma, "ladmm sigma") : 1.0;
    tau_ = options.tau ? positive(*options.tau, "ladmm tau") : 0.99 * sigma_ / (kn * kn);
    if (tau_ > sigma_ / (kn * kn) * (1.0 + 1e-12)) throw DomainError("ladmm step sizes violate tau <= sigma / |K|^2");
    kx_ = k_.direct(x_);
    z_ = kx_;
    u_ = zeros_like(z_);
    tmp_range_ = zeros_like(z_);
    tmp_domain_ = zeros_like(x_);
}

void Ladmm::step() {
    // x = prox_{tau g}(x - (tau / sigma) K^T (K x - z + u))
    axpby(1.0, kx_, -1.0, z_, tmp_range_);
    tmp_range_ += u_;
    k_.adjoint(tmp_range_, tmp_domain_);
    axpby(1.0, x_, -tau_ / sigma_, tmp_domain_, tmp_domain_);
    g_.prox(tmp_domain_, tau_, x_);
    k_.direct(x_, kx_);
    // z = prox_{sigma f}(K x + u)
    axpby(1.0, kx_, 1.0, u_, tmp_range_);
    f_.prox(tmp_range_, sigma_, z_);
    // u = u + K x - z
    u_ += kx_;
    u_ -= z_;
}

Algorithm::Objective Ladmm::objective() const { return {f_.value(kx_) + g_.value(x_), std::nullopt}; }

}  // namespace tomo
