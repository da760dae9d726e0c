#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "core.hpp"

// Abundance estimation with a fixed reference endmember matrix S0:
//   lmm          x = S0 a
//   elmm-global  x = psi S0 a           (one scale per pixel)
//   elmm-full    x = S0 (psi .* a)      (one scale per pixel and material)
// with a >= 0 and, by default, sum(a) = 1.
namespace elmm::solver {

enum class Model { lmm, elmm_global, elmm_full };

inline std::string_view to_string(Model m)
{
    switch (m) {
    case Model::lmm: return "lmm";
    case Model::elmm_global: return "elmm-global";
    case Model::elmm_full: return "elmm-full";
    }
    return "?";
}

inline Model parse_model(std::string_view s)
{
    if (s == "lmm" || s == "fcls") return Model::lmm;
    if (s == "elmm-global") return Model::elmm_global;
    if (s == "elmm-full") return Model::elmm_full;
    throw InputError("unknown solver model '" + std::string(s) + "' (expected lmm, elmm-global or elmm-full)");
}

// Starting point of the block-coordinate descent in elmm-full.
enum class Init {
    global, // the elmm-global solution, replicated across materials
    lmm,    // FCLS abundances with all scales at 1
};

struct SolverConfig {
    Model model = Model::elmm_full;
    bool sum_to_one = true;
    int max_iters = 500;
    double tol = 1e-8;
    double psi_min = 1e-2;
    double psi_max = 1e2;
    Init init = Init::global;
    unsigned threads = 1;

    void validate() const
    {
        if (!(psi_min > 0.0 && psi_min <= 1.0 && psi_max >= 1.0 && std::isfinite(psi_max)))
            throw InputError("psi bounds must satisfy 0 < psi_min <= 1 <= psi_max");
        if (!(tol > 0.0)) throw InputError("solver tolerance must be > 0");
        if (max_iters < 1) throw InputError("solver max_iters must be >= 1");
    }
};

/// Minimizer of 0.5 a'Qa - c'a over a >= 0 (and optionally 1'a = 1),
/// by a primal active-set method. Q must be symmetric positive definite.
///
/// The working set holds the indices pinned at zero. Each step solves the
/// equality-constrained problem on the free indices through its KKT system,
/// walks toward it until a free variable would turn negative, and releases
/// the pinned index with the most negative multiplier once the step vanishes.
/// Ties go to the lowest index so the result is deterministic.
struct QpResult {
    Vector a;
    int iterations = 0;
    bool converged = false;
};

inline QpResult solve_nonnegative_qp(const Matrix& Q, const Vector& c, bool sum_to_one)
{
    const Eigen::Index P = Q.rows();
    const double scale = std::max({Q.diagonal().cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff(), 1e-300});
    const double mult_tol = 1e-13 * scale;
    const int max_steps = 100 + 20 * static_cast<int>(P);

    std::vector<char> pinned(P, sum_to_one ? 0 : 1);
    Vector a = sum_to_one ? Vector::Constant(P, 1.0 / static_cast<double>(P)) : Vector::Zero(P);

    QpResult res;
    for (int step = 0; step < max_steps; ++step) {
        res.iterations = step + 1;

        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < P; ++i)
            if (!pinned[i]) free.push_back(i);
        const auto F = static_cast<Eigen::Index>(free.size());

        Vector target = Vector::Zero(P);
        if (F > 0) {
            const Eigen::Index K = F + (sum_to_one ? 1 : 0);
            Matrix kkt = Matrix::Zero(K, K);
            Vector rhs(K);
            for (Eigen::Index i = 0; i < F; ++i) {
                for (Eigen::Index j = 0; j < F; ++j) kkt(i, j) = Q(free[i], free[j]);
                rhs(i) = c(free[i]);
            }
            if (sum_to_one) {
                kkt.row(F).head(F).setOnes();
                kkt.col(F).head(F).setOnes();
                rhs(F) = 1.0;
            }
            const Vector sol = kkt.fullPivLu().solve(rhs);
            for (Eigen::Index i = 0; i < F; ++i) target(free[i]) = sol(i);
        }

        const Vector dir = target - a;
        if (dir.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + a.cwiseAbs().maxCoeff())) {
            // Stationary on the current face: check the multipliers of the pinned bounds.
            a = target;
            const Vector grad = Q * a - c;
            double shift = 0.0;
            if (sum_to_one && F > 0) {
                for (auto i : free) shift -= grad(i);
                shift /= static_cast<double>(F);
            }
            Eigen::Index release = -1;
            double most_negative = -mult_tol;
            for (Eigen::Index i = 0; i < P; ++i) {
                if (!pinned[i]) continue;
                const double mu = grad(i) + shift;
                if (mu < most_negative) {
                    most_negative = mu;
                    release = i;
                }
            }
            if (release < 0) {
                res.converged = true;
                break;
            }
            pinned[release] = 0;
            continue;
        }

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index i = 0; i < P; ++i) {
            if (pinned[i] || dir(i) >= 0.0) continue;
            const double limit = -a(i) / dir(i);
            if (limit < alpha) {
                alpha = limit;
                blocking = i;
            }
        }
        a += alpha * dir;
        if (blocking >= 0) {
            a(blocking) = 0.0;
            pinned[blocking] = 1;
        }
    }
    for (Eigen::Index i = 0; i < P; ++i)
        if (pinned[i] || a(i) < 0.0) a(i) = 0.0;
    res.a = std::move(a);
    return res;
}

/// Most negative bound multiplier at `a` (0 when the KKT conditions hold exactly).
inline double kkt_violation(const Matrix& Q, const Vector& c, const Vector& a, bool sum_to_one)
{
    const Vector grad = Q * a - c;
    double shift = 0.0;
    int free = 0;
    if (sum_to_one) {
        for (Eigen::Index i = 0; i < a.size(); ++i)
            if (a(i) > 0.0) {
                shift -= grad(i);
                ++free;
            }
        if (free > 0) shift /= free;
    }
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) <= 0.0) worst = std::min(worst, grad(i) + shift);
    return worst;
}

inline void check_problem(const Matrix& S, Eigen::Index x_size)
{
    if (S.rows() == 0 || S.cols() == 0) throw InputError("endmember matrix is empty");
    if (x_size != S.rows())
        throw InputError("pixel has " + std::to_string(x_size) + " bands but endmembers have " +
                         std::to_string(S.rows()));
    if (S.rows() < S.cols())
        throw InputError("need at least as many bands as endmembers (L=" + std::to_string(S.rows()) +
                         ", P=" + std::to_string(S.cols()) + ")");
}

inline void check_rank(const Matrix& S)
{
    Eigen::ColPivHouseholderQR<Matrix> qr(S);
    qr.setThreshold(1e-10);
    if (qr.rank() < S.cols())
        throw InputError("endmember matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                         std::to_string(S.cols()) + ")");
}

inline double objective(const Matrix& S, const Vector& x, const Vector& z) { return (x - S * z).squaredNorm(); }

/// Fully constrained least squares: min ||x - S a|| s.t. a >= 0 (and sum(a) = 1).
inline Vector fcls(const Vector& x, const Matrix& S, bool sum_to_one = true)
{
    check_problem(S, x.size());
    check_rank(S);
    return solve_nonnegative_qp(S.transpose() * S, S.transpose() * x, sum_to_one).a;
}

struct GlobalEstimate {
    Vector a;
    double psi = 1.0;
    bool degenerate = false;
};

namespace detail {

// Global-scaling fit with precomputed Gram matrix; S rank is assumed checked.
inline GlobalEstimate global_fit(const Matrix& gram, const Vector& corr, const SolverConfig& cfg)
{
    const Eigen::Index P = gram.rows();
    GlobalEstimate out;
    const Vector z = solve_nonnegative_qp(gram, corr, false).a;
    if (!cfg.sum_to_one) {
        // Without the simplex constraint psi and a are not separable; fold everything into a.
        out.a = z;
        out.psi = 1.0;
        return out;
    }
    const double total = z.sum();
    if (!(total > 0.0)) {
        out.a = Vector::Constant(P, 1.0 / static_cast<double>(P));
        out.psi = cfg.psi_min;
        out.degenerate = true;
        return out;
    }
    if (total >= cfg.psi_min && total <= cfg.psi_max) {
        out.a = z / total;
        out.psi = total;
        return out;
    }
    // The objective is convex in z = psi a, so with the unconstrained sum out of
    // bounds the optimum sits on the violated bound: an FCLS problem on x / psi.
    out.psi = total < cfg.psi_min ? cfg.psi_min : cfg.psi_max;
    out.a = solve_nonnegative_qp(gram, corr / out.psi, true).a;
    return out;
}

} // namespace detail

/// Global-scaling ELMM for one pixel: min ||x - psi S a|| with a on the simplex
/// and psi within the configured bounds.
inline GlobalEstimate unmix_elmm_global(const Vector& x, const Matrix& S, const SolverConfig& cfg = {})
{
    cfg.validate();
    check_problem(S, x.size());
    check_rank(S);
    return detail::global_fit(S.transpose() * S, S.transpose() * x, cfg);
}

struct PixelFit {
    Vector a;
    Vector psi;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;
};

namespace detail {

// Block-coordinate descent on ||x - S diag(psi) a||^2 for one pixel.
inline PixelFit full_fit(const Matrix& S, const Matrix& gram, const Vector& x, const SolverConfig& cfg)
{
    const Eigen::Index P = S.cols();
    const Vector corr = S.transpose() * x;
    const Vector col_sq = gram.diagonal();

    PixelFit fit;
    if (cfg.init == Init::global) {
        auto g = global_fit(gram, corr, cfg);
        fit.a = std::move(g.a);
        fit.psi = Vector::Constant(P, g.psi);
        fit.degenerate = g.degenerate;
    } else {
        fit.a = solve_nonnegative_qp(gram, corr, cfg.sum_to_one).a;
        fit.psi = Vector::Ones(P);
    }

    auto eval = [&](const Vector& a, const Vector& psi) {
        const Vector z = psi.cwiseProduct(a);
        return objective(S, x, z);
    };

    auto update_psi = [&](Vector& psi, const Vector& a) {
        for (Eigen::Index p = 0; p < P; ++p) {
            if (a(p) <= 0.0) {
                psi(p) = 1.0; // not identifiable when the material is absent
                continue;
            }
            // Exact 1-D minimizer of the quadratic in psi_p, then clipped.
            const Vector z = psi.cwiseProduct(a);
            const double others = corr(p) - (gram.row(p).dot(z) - gram(p, p) * z(p));
            const double unconstrained = others / (a(p) * col_sq(p));
            psi(p) = std::clamp(unconstrained, cfg.psi_min, cfg.psi_max);
        }
    };

    // Scales of absent materials are set by convention; objective unchanged.
    for (Eigen::Index p = 0; p < P; ++p)
        if (fit.a(p) <= 0.0) fit.psi(p) = 1.0;

    double f = eval(fit.a, fit.psi);
    fit.trace.push_back(f);
    const double floor = 1e-30 * std::max(x.squaredNorm(), 1e-300);

    for (int it = 0; it < cfg.max_iters; ++it) {
        if (f <= floor) {
            fit.converged = true;
            break;
        }
        fit.iterations = it + 1;

        // Abundance step against the column-scaled endmembers.
        const Matrix gram_psi = fit.psi.asDiagonal() * gram * fit.psi.asDiagonal();
        const Vector corr_psi = fit.psi.cwiseProduct(corr);
        Vector a_new = solve_nonnegative_qp(gram_psi, corr_psi, cfg.sum_to_one).a;
        if (eval(a_new, fit.psi) <= f) fit.a = std::move(a_new);

        Vector psi_new = fit.psi;
        update_psi(psi_new, fit.a);
        const double f_psi = eval(fit.a, psi_new);
        double f_next = eval(fit.a, fit.psi);
        if (f_psi <= f_next) {
            fit.psi = std::move(psi_new);
            f_next = f_psi;
        }
        fit.trace.push_back(f_next);

        const double decrease = (f - f_next) / std::max(f, 1e-300);
        f = f_next;
        if (decrease < cfg.tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

template <class Fn>
void parallel_for(Eigen::Index n, unsigned threads, Fn&& fn)
{
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2) {
        for (Eigen::Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const Eigen::Index chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const Eigen::Index begin = t * chunk;
        const Eigen::Index end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (Eigen::Index i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

/// Per-material ELMM for one pixel.
inline PixelFit unmix_elmm_full(const Vector& x, const Matrix& S, const SolverConfig& cfg = {})
{
    cfg.validate();
    check_problem(S, x.size());
    check_rank(S);
    return detail::full_fit(S, S.transpose() * S, x, cfg);
}

/// Unmixes every pixel of a cube with the configured model. Pixels are
/// independent; the threaded path produces the same bits as the serial one.
inline UnmixResult unmix(const Matrix& X, const EndmemberMatrix& endmembers, const SolverConfig& cfg)
{
    cfg.validate();
    check_endmembers(endmembers);
    const Matrix& S = endmembers.S;
    check_problem(S, X.rows());
    check_rank(S);
    if (X.cols() < 1) throw InputError("cube has no pixels");

    const Eigen::Index P = S.cols();
    const Eigen::Index N = X.cols();
    const Matrix gram = S.transpose() * S;

    UnmixResult res;
    res.A = Matrix::Zero(P, N);
    res.Psi = Matrix::Ones(P, N);
    res.residual_rmse.assign(N, 0.0);
    res.iterations.assign(N, 0);
    res.converged.assign(N, 1);
    res.degenerate.assign(N, 0);
    res.objective_trace.assign(N, {});

    detail::parallel_for(N, cfg.threads, [&](Eigen::Index n) {
        const Vector x = X.col(n);
        Vector a, psi;
        switch (cfg.model) {
        case Model::lmm: {
            auto qp = solve_nonnegative_qp(gram, S.transpose() * x, cfg.sum_to_one);
            a = std::move(qp.a);
            psi = Vector::Ones(P);
            res.iterations[n] = qp.iterations;
            res.converged[n] = qp.converged;
            res.objective_trace[n] = {objective(S, x, a)};
            break;
        }
        case Model::elmm_global: {
            auto g = detail::global_fit(gram, S.transpose() * x, cfg);
            a = std::move(g.a);
            psi = Vector::Constant(P, g.psi);
            res.degenerate[n] = g.degenerate;
            res.iterations[n] = 1;
            res.objective_trace[n] = {objective(S, x, psi.cwiseProduct(a))};
            break;
        }
        case Model::elmm_full: {
            auto fit = detail::full_fit(S, gram, x, cfg);
            a = std::move(fit.a);
            psi = std::move(fit.psi);
            res.iterations[n] = fit.iterations;
            res.converged[n] = fit.converged;
            res.degenerate[n] = fit.degenerate;
            res.objective_trace[n] = std::move(fit.trace);
            break;
        }
        }
        res.A.col(n) = a;
        res.Psi.col(n) = psi;
        res.residual_rmse[n] =
            std::sqrt(objective(S, x, psi.cwiseProduct(a)) / static_cast<double>(X.rows()));
    });
    return res;
}

/// Reconstruction S0 (Psi .* A).
inline Matrix reconstruct(const Matrix& S, const Matrix& A, const Matrix& Psi) { return S * Psi.cwiseProduct(A); }

} // namespace elmm::solver
