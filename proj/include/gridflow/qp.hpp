#pragma once

#include <Eigen/Dense>

#include <limits>
#include <utility>
#include <vector>

/// Convex quadratic programming by a primal-dual interior-point method.
///
///   minimise   1/2 x'Hx + c'x + c0
///   subject to lo_r <= a_r'x <= hi_r   (one range per row; lo == hi is an equality)
///              lb <= x <= ub           (lb == ub fixes a variable)
///
/// Rows flagged `elastic` may be violated by a single shared nonnegative
/// slack that carries an exact-penalty cost. When the penalised optimum
/// keeps a positive slack, a phase-one solve (minimise the slack alone)
/// decides: a positive minimum means infeasible, reported with the tag of
/// the most violated row; otherwise the penalty is raised and the solve
/// repeated.
namespace gridflow::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Row {
    std::vector<std::pair<int, double>> terms;
    double lo = -kInf;
    double hi = kInf;
    bool elastic = false;
    int tag = -1;
};

struct HessianEntry {
    int i = 0;
    int j = 0;
    double value = 0.0;  ///< H(i,j); off-diagonal entries must be given for both (i,j) and (j,i)
};

struct Problem {
    int n = 0;
    std::vector<HessianEntry> hessian;
    Eigen::VectorXd c;
    double c0 = 0.0;
    std::vector<Row> rows;
    Eigen::VectorXd lb;
    Eigen::VectorXd ub;

    explicit Problem(int variables = 0)
        : n(variables), c(Eigen::VectorXd::Zero(variables)), lb(Eigen::VectorXd::Constant(variables, -kInf)),
          ub(Eigen::VectorXd::Constant(variables, kInf)) {}

    int add_variable(double lower = -kInf, double upper = kInf);
    void add_row(Row row) { rows.push_back(std::move(row)); }
};

enum class Status { Optimal, Infeasible, Failed };

struct Settings {
    double tol = 1e-9;           ///< relative residual / gap tolerance
    int max_iter = 120;
    double penalty = 1e6;        ///< initial exact-penalty weight for elastic rows
    double feasibility_tol = 1e-8;
};

struct Result {
    Status status = Status::Failed;
    Eigen::VectorXd x;
    double objective = 0.0;   ///< without the elastic penalty
    double elastic = 0.0;     ///< final shared slack
    int worst_tag = -1;       ///< tag of the most violated row when infeasible
    int iterations = 0;
};

Result solve(const Problem& problem, const Settings& settings = {});

/// Objective value of `x` for `problem` (no penalty).
double evaluate(const Problem& problem, const Eigen::VectorXd& x);

} // namespace gridflow::qp
