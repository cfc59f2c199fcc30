#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tomo/functions.hpp"

namespace tomo {

/// One logged objective evaluation. `dual` and `gap` are NaN when the
/// algorithm does not track them; infeasible values carry a flag.
struct HistoryEntry {
    std::size_t iteration = 0;
    double primal = 0.0;
    double dual = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();
    bool primal_infeasible = false;
    bool dual_infeasible = false;
};

struct SolverOptions {
    std::size_t max_iteration = std::numeric_limits<std::size_t>::max();
    /// 0 logs every iteration below 100 and every 10th after that.
    std::size_t log_interval = 0;
};

struct RunReport {
    std::size_t iterations = 0;
    bool truncated = false;  ///< request exceeded the remaining budget
    bool converged = false;  ///< the solver stopped on its own criterion
};

class Algorithm {
public:
    using Observer = std::function<void(const Algorithm&)>;

    explicit Algorithm(const SolverOptions& options);
    virtual ~Algorithm() = default;
    Algorithm(const Algorithm&) = delete;
    Algorithm& operator=(const Algorithm&) = delete;

    virtual std::string name() const = 0;

    /// Perform up to n further iterations. The observer runs after each one;
    /// with `verbose` set, every logged entry is printed.
    RunReport run(std::size_t n, const Observer& observer = {}, std::ostream* verbose = nullptr);

    std::size_t iteration() const noexcept { return iteration_; }
    std::size_t max_iteration() const noexcept { return options_.max_iteration; }
    bool converged() const noexcept { return converged_; }
    const std::vector<HistoryEntry>& history() const noexcept { return history_; }
    virtual const DataContainer& solution() const = 0;

    /// iteration,primal[,dual,gap] with one row per logged entry.
    void write_history_csv(std::ostream& out) const;
    void write_history_csv(const std::string& path) const;

protected:
    struct Objective {
        FunctionValue primal;
        std::optional<FunctionValue> dual;
    };
    virtual void step() = 0;
    virtual Objective objective() const = 0;
    void mark_converged() noexcept { converged_ = true; }

private:
    bool should_log(std::size_t k) const;
    void log(std::ostream* verbose);

    SolverOptions options_;
    std::size_t iteration_ = 0;
    bool converged_ = false;
    std::vector<HistoryEntry> history_;
};

/// Gradient descent on a differentiable objective.
struct GradientDescentOptions {
    /// Constant step; defaults to 1/L (or 1 when L is unknown).
    std::optional<double> step;
    bool backtracking = false;
    double armijo = 1e-4;
    double shrink = 0.5;
    double growth = 1.1;
    SolverOptions solver;
};

class GradientDescent final : public Algorithm {
public:
    GradientDescent(DataContainer initial, Function objective, const GradientDescentOptions& options = {});
    std::string name() const override { return "gd"; }
    const DataContainer& solution() const override { return x_; }
    double step_size() const noexcept { return step_; }

private:
    void step() override;
    Objective objective() const override;

    Function f_;
    GradientDescentOptions o_;
    DataContainer x_, g_, trial_;
    double step_;
};

/// Conjugate gradient least squares for min |A x - b|^2.
struct CglsOptions {
    /// Stop once |A^T r| <= tolerance |A^T r_0|.
    std::optional<double> tolerance;
    SolverOptions solver;
};

class Cgls final : public Algorithm {
public:
    Cgls(DataContainer initial, Operator a, DataContainer b, const CglsOptions& options = {});
    std::string name() const override { return "cgls"; }
    const DataContainer& solution() const override { return x_; }

private:
    void step() override;
    Objective objective() const override;

    Operator a_;
    CglsOptions o_;
    DataContainer x_, r_, s_, p_, q_;
    double gamma_ = 0.0, gamma0_ = 0.0;
};

/// Simultaneous iterative reconstruction with row and column sum weights.
struct SirtOptions {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double relaxation = 1.0;
    SolverOptions solver;
};

class Sirt final : public Algorithm {
public:
    Sirt(DataContainer initial, Operator a, DataContainer b, const SirtOptions& options = {});
    std::string name() const override { return "sirt"; }
    const DataContainer& solution() const override { return x_; }

private:
    void step() override;
    Objective objective() const override;

    Operator a_;
    DataContainer b_;
    SirtOptions o_;
    DataContainer x_, r_, c_, row_w_, col_w_;
};

/// FISTA for min f(x) + g(x) with f smooth and g prox-capable.
struct FistaOptions {
    /// Defaults to 1/L.
    std::optional<double> step;
    SolverOptions solver;
};

class Fista final : public Algorithm {
public:
    Fista(DataContainer initial, Function f, Function g, const FistaOptions& options = {});
    std::string name() const override { return "fista"; }
    const DataContainer& solution() const override { return x_; }
    double step_size() const noexcept { return step_; }

private:
    void step() override;
    Objective objective() const override;

    Function f_, g_;
    double step_;
    DataContainer x_, x_old_, y_, grad_;
    double t_ = 1.0;
};

/// Primal-dual hybrid gradient for min f(K x) + g(x).
struct PdhgOptions {
    /// Defaults sigma = tau = 0.99 / |K|; when only one is given the other
    /// is 0.99^2 / (given |K|^2).
    std::optional<double> sigma;
    std::optional<double> tau;
    double theta = 1.0;
    std::optional<DataContainer> initial_dual;
    SolverOptions solver;
};

class Pdhg final : public Algorithm {
public:
    Pdhg(DataContainer initial, Function f, Operator k, Function g, const PdhgOptions& options = {});
    std::string name() const override { return "pdhg"; }
    const DataContainer& solution() const override { return x_; }
    const DataContainer& dual() const noexcept { return y_; }
    double sigma() const noexcept { return sigma_; }
    double tau() const noexcept { return tau_; }

private:
    void step() override;
    Objective objective() const override;

    Function f_;
    Operator k_;
    Function g_;
    double sigma_, tau_, theta_;
    DataContainer x_, x_old_, x_bar_, y_, y_tmp_, x_tmp_;
};

/// Linearised ADMM for min f(K x) + g(x), both prox-capable.
struct LadmmOptions {
    /// Defaults sigma = 1 and tau = 0.99 sigma / |K|^2.
    std::optional<double> sigma;
    std::optional<double> tau;
    SolverOptions solver;
};

class Ladmm final : public Algorithm {
public:
    Ladmm(DataContainer initial, Function f, Operator k, Function g, const LadmmOptions& options = {});
    std::string name() const override { return "ladmm"; }
    const DataContainer& solution() const override { return x_; }

private:
    void step() override;
    Objective objective() const override;

    Function f_;
    Operator k_;
    Function g_;
    double sigma_, tau_;
    DataContainer x_, z_, u_, kx_, tmp_range_, tmp_domain_;
};

}  // namespace tomo
