#include "gridflow/qp.hpp"

#include <Eigen/Sparse>
#include <Eigen/OrderingMethods>

#include <algorithm>
#include <cmath>
#include <vector>

namespace gridflow::qp {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

int Problem::add_variable(double lower, double upper) {
    c.conservativeResize(n + 1);
    lb.conservativeResize(n + 1);
    ub.conservativeResize(n + 1);
    c(n) = 0.0;
    lb(n) = lower;
    ub(n) = upper;
    return n++;
}

double evaluate(const Problem& p, const Eigen::VectorXd& x) {
    double f = p.c0 + p.c.dot(x);
    for (const auto& e : p.hessian) f += 0.5 * e.value * x(e.i) * x(e.j);
    return f;
}

namespace {

// Standard form after removing fixed variables:
//   min 1/2 x'Hx + c'x   s.t.  Ax = b,  Gx <= h
struct StandardForm {
    SpMat H, A, G;
    Eigen::VectorXd c, b, h;
};

struct IpmOutcome {
    bool converged = false;
    Eigen::VectorXd x;
    int iterations = 0;
};

// Up-looking sparse LDL' with sign-aware dynamic regularisation: a pivot
// whose sign disagrees with the expected inertia, or that is tiny, is
// replaced by +-delta. Quasi-definite KKT matrices factor without pivoting.
class SparseLdl {
public:
    // `upper` holds the upper triangle of the already permuted matrix,
    // diagonal present in every column.
    void analyze(const SpMat& upper) {
        const int n = static_cast<int>(upper.cols());
        n_ = n;
        etree_.assign(n, -1);
        std::vector<int> lnz(n, 0), work(n, -1);
        for (int j = 0; j < n; ++j) {
            work[j] = j;
            for (SpMat::InnerIterator it(upper, j); it; ++it) {
                int i = static_cast<int>(it.row());
                while (i < j && work[i] != j) {
                    if (etree_[i] == -1) etree_[i] = j;
                    ++lnz[i];
                    work[i] = j;
                    i = etree_[i];
                }
            }
        }
        lp_.assign(n + 1, 0);
        for (int i = 0; i < n; ++i) lp_[i + 1] = lp_[i] + lnz[i];
        li_.assign(lp_[n], 0);
        lx_.assign(lp_[n], 0.0);
    }

    bool factor(const SpMat& upper, const std::vector<signed char>& sign, double eps, double delta) {
        const int n = n_;
        d_.assign(n, 0.0);
        dinv_.assign(n, 0.0);
        std::vector<double> y(n, 0.0);
        std::vector<char> mark(n, 0);
        std::vector<int> next(lp_.begin(), lp_.end() - 1), pattern, stack;
        pattern.reserve(n);
        stack.reserve(n);
        for (int k = 0; k < n; ++k) {
            pattern.clear();
            for (SpMat::InnerIterator it(upper, k); it; ++it) {
                const int i = static_cast<int>(it.row());
                if (i == k) {
                    d_[k] = it.value();
                    continue;
                }
                y[i] = it.value();
                if (mark[i]) continue;
                stack.clear();
                for (int u = i; u != -1 && u < k && !mark[u]; u = etree_[u]) {
                    mark[u] = 1;
                    stack.push_back(u);
                }
                while (!stack.empty()) {
                    pattern.push_back(stack.back());
                    stack.pop_back();
                }
            }
            for (int t = static_cast<int>(pattern.size()) - 1; t >= 0; --t) {
                const int c = pattern[t];
                const double yc = y[c];
                for (int j = lp_[c]; j < next[c]; ++j) y[li_[j]] -= lx_[j] * yc;
                const int slot = next[c]++;
                li_[slot] = k;
                lx_[slot] = yc * dinv_[c];
                d_[k] -= yc * lx_[slot];
                y[c] = 0.0;
                mark[c] = 0;
            }
            if (!std::isfinite(d_[k])) return false;
            if (sign[k] * d_[k] < eps) d_[k] = sign[k] * delta;
            dinv_[k] = 1.0 / d_[k];
        }
        return true;
    }

    void solve_in_place(Eigen::VectorXd& x) const {
        for (int i = 0; i < n_; ++i)
            for (int j = lp_[i]; j < lp_[i + 1]; ++j) x(li_[j]) -= lx_[j] * x(i);
        for (int i = 0; i < n_; ++i) x(i) *= dinv_[i];
        for (int i = n_ - 1; i >= 0; --i)
            for (int j = lp_[i]; j < lp_[i + 1]; ++j) x(i) -= lx_[j] * x(li_[j]);
    }

private:
    int n_ = 0;
    std::vector<int> etree_, lp_, li_;
    std::vector<double> lx_, d_, dinv_;
};

// Augmented KKT system
//   [H + rI   A'    G'  ] [dx]
//   [A       -rI    0   ] [dy]
//   [G        0   -W - rI] [dz]
// with W = diag(s/z). The pattern is fixed, so ordering and elimination
// tree are computed once per problem.
class KktSolver {
public:
    KktSolver(const StandardForm& sf, double reg, double refine_tol)
        : base_reg_(reg), refine_tol_(refine_tol), n_(static_cast<int>(sf.H.rows())), p_(static_cast<int>(sf.A.rows())), m_(static_cast<int>(sf.G.rows())) {
        const int N = n_ + p_ + m_;
        std::vector<Trip> trips;
        for (int k = 0; k < sf.H.outerSize(); ++k)
            for (SpMat::InnerIterator it(sf.H, k); it; ++it)
                if (it.row() <= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
        for (int k = 0; k < sf.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(sf.A, k); it; ++it) trips.emplace_back(it.col(), n_ + it.row(), it.value());
        for (int k = 0; k < sf.G.outerSize(); ++k)
            for (SpMat::InnerIterator it(sf.G, k); it; ++it)
                trips.emplace_back(it.col(), n_ + p_ + it.row(), it.value());
        for (int i = 0; i < N; ++i) trips.emplace_back(i, i, 0.0);
        base_.resize(N, N);
        base_.setFromTriplets(trips.begin(), trips.end());
        base_.makeCompressed();
        // diagonal positions for fast updates
        diag_pos_.resize(N);
        for (int j = 0; j < N; ++j) {
            const int* inner = base_.innerIndexPtr();
            int q = base_.outerIndexPtr()[j + 1] - 1;
            while (inner[q] != j) --q;
            diag_pos_[j] = q;
        }
        base_diag_.resize(N);
        for (int j = 0; j < N; ++j) base_diag_[j] = base_.valuePtr()[diag_pos_[j]];

        Eigen::AMDOrdering<int> amd;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
        amd(base_.selfadjointView<Eigen::Upper>(), pinv);
        perm_ = pinv.inverse();
        sign_.assign(N, 1);
        for (int i = 0; i < N; ++i) sign_[perm_.indices()(i)] = i < n_ ? 1 : -1;

        // Permute a copy holding entry numbers to learn where each value lands.
        SpMat numbered = base_;
        const int nnz = static_cast<int>(base_.nonZeros());
        for (int q = 0; q < nnz; ++q) numbered.valuePtr()[q] = q + 1;
        SpMat full;
        full = numbered.selfadjointView<Eigen::Upper>().twistedBy(perm_);
        permuted_ = full.triangularView<Eigen::Upper>();
        permuted_.makeCompressed();
        target_.assign(nnz, -1);
        for (int q = 0; q < permuted_.nonZeros(); ++q)
            target_[static_cast<int>(permuted_.valuePtr()[q]) - 1] = q;
        for (int q = 0; q < nnz; ++q) permuted_.valuePtr()[target_[q]] = base_.valuePtr()[q];
        exact_ = permuted_;
        ldl_.analyze(permuted_);
    }

    bool factor(const Eigen::VectorXd& w) {
        w_ = w;
        return refactor(base_reg_);
    }

    // Solve, refined against the unregularised matrix (in permuted order).
    // A solve that refinement cannot repair is redone with more regularisation.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) {
        const Eigen::VectorXd b = perm_ * rhs;
        const double scale = 1.0 + b.lpNorm<Eigen::Infinity>();
        while (true) {
            Eigen::VectorXd sol = b;
            ldl_.solve_in_place(sol);
            Eigen::VectorXd best = sol;
            double norm = kInf;
            for (int k = 0; k <= 10 && sol.allFinite(); ++k) {
                Eigen::VectorXd r = b - exact_.selfadjointView<Eigen::Upper>() * sol;
                const double next = r.lpNorm<Eigen::Infinity>();
                if (!(next < norm)) break;
                norm = next;
                best = sol;
                if (norm <= refine_tol_ * scale) break;
                ldl_.solve_in_place(r);
                sol += r;
            }
            if (norm <= 1e-3 * scale || reg_ >= kMaxReg || !refactor(reg_ * 100.0)) return perm_.inverse() * best;
        }
    }

private:
    bool refactor(double reg) {
        reg_ = reg;
        const int N = n_ + p_ + m_;
        for (int j = 0; j < N; ++j) {
            double v = base_diag_[j];
            if (j >= n_ + p_) v -= w_(j - n_ - p_);
            const int q = target_[diag_pos_[j]];
            exact_.valuePtr()[q] = v;
            permuted_.valuePtr()[q] = v + (j < n_ ? reg_ : -reg_);
        }
        return ldl_.factor(permuted_, sign_, 1e-13, 1e-7);
    }

    static constexpr double kMaxReg = 1e-5;
    double base_reg_, refine_tol_;
    double reg_ = 0.0;
    Eigen::VectorXd w_;
    int n_, p_, m_;
    SpMat base_, exact_, permuted_;
    std::vector<int> diag_pos_, target_;
    std::vector<double> base_diag_;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_;
    std::vector<signed char> sign_;
    SparseLdl ldl_;
};

// Accuracy accepted when the iteration stalls short of the tolerance.
constexpr double kAcceptable = 1e-6;

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = 1.0;
    for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    return a;
}

IpmOutcome interior_point(const StandardForm& sf, const Settings& settings, double reg, double refine_tol) {
    const int n = static_cast<int>(sf.H.rows());
    const int p = static_cast<int>(sf.A.rows());
    const int m = static_cast<int>(sf.G.rows());
    IpmOutcome out;
    KktSolver kkt(sf, reg, refine_tol);

    const double nb = 1.0 + (p ? sf.b.lpNorm<Eigen::Infinity>() : 0.0);
    const double nh = 1.0 + (m ? sf.h.lpNorm<Eigen::Infinity>() : 0.0);
    const double nc = 1.0 + (n ? sf.c.lpNorm<Eigen::Infinity>() : 0.0);

    // Initial point: least-squares solve with W = I, then shift s and z
    // into the positive orthant.
    Eigen::VectorXd x(n), y(p), z(m), s(m);
    {
        if (!kkt.factor(Eigen::VectorXd::Ones(m))) return out;
        Eigen::VectorXd rhs(n + p + m);
        rhs << -sf.c, sf.b, sf.h;
        const Eigen::VectorXd sol = kkt.solve(rhs);
        x = sol.head(n);
        y = sol.segment(n, p);
        if (m == 0) {
            out.converged = x.allFinite();
            out.x = x;
            out.iterations = 1;
            return out;
        }
        z = sol.tail(m);
        s = -z;
        const double ap = -s.minCoeff();
        if (ap >= -1e-8) s.array() += 1.0 + ap;
        const double ad = -z.minCoeff();
        if (ad >= -1e-8) z.array() += 1.0 + ad;
    }

    double best_merit = kInf;
    int best_it = 0;
    Eigen::VectorXd best_x = x;
    for (int it = 0; it < settings.max_iter; ++it) {
        out.iterations = it + 1;
        const Eigen::VectorXd Hx = sf.H * x;
        const Eigen::VectorXd rd = Hx + sf.c + sf.A.transpose() * y + sf.G.transpose() * z;
        const Eigen::VectorXd rp = sf.A * x - sf.b;
        const Eigen::VectorXd rg = sf.G * x + s - sf.h;
        const double gap = s.dot(z);
        const double mu = gap / m;
        const double pobj = 0.5 * x.dot(Hx) + sf.c.dot(x);

        const double merit = std::max({p ? rp.lpNorm<Eigen::Infinity>() / nb : 0.0, rg.lpNorm<Eigen::Infinity>() / nh,
                                       rd.lpNorm<Eigen::Infinity>() / nc, gap / std::max(1.0, std::abs(pobj))});
        if (!std::isfinite(merit)) break;
        if (merit < best_merit) {
            best_merit = merit;
            best_it = it;
            best_x = x;
        }
        if (merit <= settings.tol) {
            out.converged = true;
            out.x = x;
            return out;
        }
        // Round-off has taken over: settle for the best iterate.
        if (it - best_it >= 15) break;
        if (!kkt.factor(s.cwiseQuotient(z))) break;

        auto newton = [&](const Eigen::VectorXd& rsz, Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                          Eigen::VectorXd& ds) {
            Eigen::VectorXd rhs(n + p + m);
            rhs << -rd, -rp, -rg + rsz.cwiseQuotient(z);
            const Eigen::VectorXd sol = kkt.solve(rhs);
            dx = sol.head(n);
            dy = sol.segment(n, p);
            dz = sol.tail(m);
            ds = -(rsz + s.cwiseProduct(dz)).cwiseQuotient(z);
        };

        Eigen::VectorXd dx, dy, dz, ds;
        const Eigen::VectorXd sz = s.cwiseProduct(z);
        newton(sz, dx, dy, dz, ds);
        const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
        const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / m;
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        const Eigen::VectorXd rsz = sz + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(m, sigma * mu);
        newton(rsz, dx, dy, dz, ds);
        const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
        x += a * dx;
        y += a * dy;
        z += a * dz;
        s += a * ds;
        if (!x.allFinite() || !s.allFinite() || !z.allFinite()) break;
    }
    out.x = best_x;
    out.converged = best_merit <= kAcceptable;
    return out;
}

// Fast linear algebra first; on failure, tighter refinement, then more
// static regularisation.
IpmOutcome robust_interior_point(const StandardForm& sf, const Settings& settings) {
    static constexpr std::pair<double, double> kLadder[] = {{1e-9, 1e-10}, {1e-9, 1e-14}, {1e-8, 1e-14}, {1e-7, 1e-14}};
    IpmOutcome out;
    int iterations = 0;
    for (auto [reg, refine] : kLadder) {
        out = interior_point(sf, settings, reg, refine);
        iterations += out.iterations;
        if (out.converged) break;
    }
    out.iterations = iterations;
    return out;
}

struct Reduction {
    std::vector<int> free_index;    // original -> reduced (-1 if fixed)
    std::vector<int> original;      // reduced -> original
    Eigen::VectorXd fixed_value;    // per original variable
    int elastic_var = -1;
    std::vector<int> g_source_row;  // per G row, original row index (-1 for bounds)
    std::vector<int> g_sign;        // +1: a'x <= hi, -1: -a'x <= -lo
    bool trivially_infeasible = false;
    int infeasible_tag = -1;
};

StandardForm reduce(const Problem& prob, double penalty, Reduction& red) {
    const int n = prob.n;
    red.free_index.assign(n, -1);
    red.original.clear();
    red.fixed_value = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(prob.lb(j)) && prob.ub(j) - prob.lb(j) <= 1e-12 * std::max(1.0, std::abs(prob.lb(j)))) {
            red.fixed_value(j) = prob.lb(j);
        } else {
            red.free_index[j] = static_cast<int>(red.original.size());
            red.original.push_back(j);
        }
    }
    int nf = static_cast<int>(red.original.size());

    bool any_elastic = false;
    for (const auto& r : prob.rows) any_elastic = any_elastic || r.elastic;
    if (any_elastic) red.elastic_var = nf++;

    StandardForm sf;
    sf.c = Eigen::VectorXd::Zero(nf);
    for (int j = 0; j < n; ++j)
        if (red.free_index[j] >= 0) sf.c(red.free_index[j]) = prob.c(j);
    if (red.elastic_var >= 0) sf.c(red.elastic_var) = penalty;

    std::vector<Trip> htrips;
    for (const auto& e : prob.hessian) {
        const int fi = red.free_index[e.i];
        const int fj = red.free_index[e.j];
        if (fi >= 0 && fj >= 0) {
            htrips.emplace_back(fi, fj, e.value);
        } else if (fi >= 0) {
            sf.c(fi) += e.value * red.fixed_value(e.j);
        }
    }
    sf.H.resize(nf, nf);
    sf.H.setFromTriplets(htrips.begin(), htrips.end());

    std::vector<Trip> atrips, gtrips;
    std::vector<double> b, h;
    auto add_g = [&](const std::vector<std::pair<int, double>>& terms, double rhs, double sign, bool elastic,
                     int source) {
        const int r = static_cast<int>(h.size());
        for (auto [j, v] : terms) gtrips.emplace_back(r, j, sign * v);
        if (elastic) gtrips.emplace_back(r, red.elastic_var, -1.0);
        h.push_back(sign * rhs);
        red.g_source_row.push_back(source);
        red.g_sign.push_back(static_cast<int>(sign));
    };

    for (std::size_t ri = 0; ri < prob.rows.size(); ++ri) {
        const auto& row = prob.rows[ri];
        double shift = 0.0;
        double scale = 0.0;
        std::vector<std::pair<int, double>> terms;
        for (auto [j, v] : row.terms) {
            if (v == 0.0) continue;
            if (red.free_index[j] >= 0) {
                terms.emplace_back(red.free_index[j], v);
                scale = std::max(scale, std::abs(v));
            } else {
                shift += v * red.fixed_value(j);
            }
        }
        const double lo = row.lo - shift;
        const double hi = row.hi - shift;
        if (terms.empty()) {
            const double slack = 1e-9 * std::max(1.0, std::abs(shift));
            if (lo > slack || hi < -slack) {
                red.trivially_infeasible = true;
                if (red.infeasible_tag < 0) red.infeasible_tag = row.tag;
            }
            continue;
        }
        if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-12 * std::max(1.0, std::abs(lo)) &&
            !row.elastic) {
            const int r = static_cast<int>(b.size());
            for (auto [j, v] : terms) atrips.emplace_back(r, j, v);
            b.push_back(0.5 * (lo + hi));
            continue;
        }
        if (std::isfinite(hi)) add_g(terms, hi, 1.0, row.elastic, static_cast<int>(ri));
        if (std::isfinite(lo)) add_g(terms, lo, -1.0, row.elastic, static_cast<int>(ri));
    }
    for (int j = 0; j < n; ++j) {
        const int f = red.free_index[j];
        if (f < 0) continue;
        if (std::isfinite(prob.ub(j))) add_g({{f, 1.0}}, prob.ub(j), 1.0, false, -1);
        if (std::isfinite(prob.lb(j))) add_g({{f, 1.0}}, prob.lb(j), -1.0, false, -1);
    }
    if (red.elastic_var >= 0) add_g({{red.elastic_var, 1.0}}, 0.0, -1.0, false, -1);

    sf.A.resize(static_cast<int>(b.size()), nf);
    sf.A.setFromTriplets(atrips.begin(), atrips.end());
    sf.b = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<int>(b.size()));
    sf.G.resize(static_cast<int>(h.size()), nf);
    sf.G.setFromTriplets(gtrips.begin(), gtrips.end());
    sf.h = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<int>(h.size()));
    return sf;
}

} // namespace

namespace {

Eigen::VectorXd expand(const Reduction& red, const Eigen::VectorXd& reduced) {
    Eigen::VectorXd x = red.fixed_value;
    for (std::size_t k = 0; k < red.original.size(); ++k) x(red.original[k]) = reduced(static_cast<int>(k));
    return x;
}

int worst_elastic_row(const Problem& prob, const Eigen::VectorXd& x) {
    double worst = 0.0;
    int tag = -1;
    for (const auto& row : prob.rows) {
        if (!row.elastic) continue;
        double ax = 0.0;
        for (auto [j, v] : row.terms) ax += v * x(j);
        const double viol = std::max(row.lo - ax, ax - row.hi);
        if (viol > worst) {
            worst = viol;
            tag = row.tag;
        }
    }
    return tag;
}

} // namespace

Result solve(const Problem& prob, const Settings& settings) {
    Result res;
    double penalty = settings.penalty;
    bool phase1_done = false;
    for (int attempt = 0; attempt < 3; ++attempt) {
        Reduction red;
        StandardForm sf = reduce(prob, penalty, red);
        if (red.trivially_infeasible) {
            res.status = Status::Infeasible;
            res.worst_tag = red.infeasible_tag;
            return res;
        }
        IpmOutcome ipm = robust_interior_point(sf, settings);
        res.iterations += ipm.iterations;
        if (ipm.converged) {
            res.x = expand(red, ipm.x);
            res.objective = evaluate(prob, res.x);
            res.elastic = red.elastic_var >= 0 ? std::max(0.0, ipm.x(red.elastic_var)) : 0.0;
            if (res.elastic <= settings.feasibility_tol) {
                res.status = Status::Optimal;
                return res;
            }
        } else if (red.elastic_var < 0) {
            res.status = Status::Failed;
            return res;
        }
        if (phase1_done) break;
        // Phase one: the smallest shared violation, objective dropped.
        StandardForm feas = sf;
        feas.H.setZero();
        feas.c.setZero();
        feas.c(red.elastic_var) = 1.0;
        IpmOutcome f = robust_interior_point(feas, settings);
        res.iterations += f.iterations;
        phase1_done = true;
        if (!f.converged) {
            res.status = Status::Failed;
            return res;
        }
        const double t = std::max(0.0, f.x(red.elastic_var));
        if (t > settings.feasibility_tol) {
            res.x = expand(red, f.x);
            res.objective = evaluate(prob, res.x);
            res.elastic = t;
            res.worst_tag = worst_elastic_row(prob, res.x);
            res.status = Status::Infeasible;
            return res;
        }
        // Feasible after all: the penalty was too small to be exact.
        penalty *= 100.0;
    }
    res.status = Status::Failed;
    return res;
}

} // namespace gridflow::qp
