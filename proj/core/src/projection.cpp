#include "quadgroup/projection.hpp"

#include "quadgroup/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadgroup {

namespace {

Eigen::VectorXd beta_on_group(const Eigen::VectorXd& beta_hat, const GroupSpec& g) {
  Eigen::VectorXd beta_g(static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) beta_g(static_cast<Eigen::Index>(k)) = beta_hat(g.col(k));
  return beta_g;
}

/// Dual of the projection program: minimize over z ∈ R^K
///   h(z) = (1/4)·z⊤Mz + b⊤z + rho·‖z‖₁,
/// where M = W⊤Σ̂W for the constraint matrix W = [e_1 … e_p (, ṽ)] and
/// b = W⊤v = [v (; scale)]. The primal solution is u = −(1/2)Wz; dual
/// unboundedness signals primal infeasibility.
///
/// Solved by a working-set method: grow the support one worst violator at a
/// time, minimize the smooth restriction exactly, and drop coordinates whose
/// sign flips along the way. Termination is certified by the subgradient
/// residual, which for the basis rows equals the primal constraint violation.
class DualSolver {
 public:
  DualSolver(const Eigen::MatrixXd& m_mat, const Eigen::VectorXd& b)
      : m_(m_mat), b_(b), z_(Eigen::VectorXd::Zero(b.size())) {}

  enum class Status { converged, unbounded, step_cap };

  Status run(double rho, long max_steps, double kkt_rel, long& steps_used) {
    const Eigen::Index dim = b_.size();
    const double tol = rho * kkt_rel;
    Eigen::VectorXd grad = b_;
    std::vector<Eigen::Index> active;
    std::vector<double> sign(static_cast<std::size_t>(dim), 0.0);
    z_.setZero();
    long steps = 0;

    const auto finish = [&](Status st) {
      steps_used += steps;
      return st;
    };

    while (true) {
      Eigen::Index enter = -1;
      double worst = tol;
      for (Eigen::Index k = 0; k < dim; ++k) {
        if (sign[static_cast<std::size_t>(k)] != 0.0) continue;
        const double viol = std::abs(grad(k)) - rho;
        if (viol > worst) {
          worst = viol;
          enter = k;
        }
      }
      if (enter < 0) return finish(Status::converged);
      sign[static_cast<std::size_t>(enter)] = grad(enter) > 0.0 ? -1.0 : 1.0;
      active.push_back(enter);

      while (!active.empty()) {
        if (++steps > max_steps) return finish(Status::step_cap);
        const auto a = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd maa(a, a);
        Eigen::VectorXd rhs(a);
        for (Eigen::Index i = 0; i < a; ++i) {
          const Eigen::Index ki = active[static_cast<std::size_t>(i)];
          for (Eigen::Index j = 0; j < a; ++j) {
            maa(i, j) = m_(ki, active[static_cast<std::size_t>(j)]);
          }
          rhs(i) = -2.0 * (b_(ki) + rho * sign[static_cast<std::size_t>(ki)]);
        }
        Eigen::VectorXd zeta = Eigen::LDLT<Eigen::MatrixXd>(maa).solve(rhs);
        const double rhs_scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        if (!zeta.allFinite() ||
            (maa * zeta - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * rhs_scale) {
          // Singular restricted system. The rank-revealing solve settles
          // whether it is consistent; if not, the least-squares residual
          // lies in the null space and is a direction of linear descent,
          // so follow it to the first sign crossing. No crossing means
          // the dual is genuinely unbounded, i.e. the primal constraints
          // cannot be met at this rho.
          zeta = maa.completeOrthogonalDecomposition().solve(rhs);
          const Eigen::VectorXd resid = rhs - maa * zeta;
          if (!zeta.allFinite()) return finish(Status::unbounded);
          if (resid.lpNorm<Eigen::Infinity>() > 1e-8 * rhs_scale) {
            double t_min = 0.0;
            Eigen::Index ray_drop = -1;
            for (Eigen::Index i = 0; i < a; ++i) {
              const Eigen::Index ki = active[static_cast<std::size_t>(i)];
              if (resid(i) * sign[static_cast<std::size_t>(ki)] >= 0.0) continue;
              const double t = -z_(ki) / resid(i);
              if (ray_drop < 0 || t < t_min) {
                t_min = t;
                ray_drop = i;
              }
            }
            if (ray_drop < 0) return finish(Status::unbounded);
            const Eigen::Index kd = active[static_cast<std::size_t>(ray_drop)];
            if (kd == enter && t_min == 0.0) return finish(Status::step_cap);
            for (Eigen::Index i = 0; i < a; ++i) {
              const Eigen::Index ki = active[static_cast<std::size_t>(i)];
              z_(ki) += t_min * resid(i);
            }
            z_(kd) = 0.0;
            sign[static_cast<std::size_t>(kd)] = 0.0;
            active.erase(active.begin() + ray_drop);
            continue;
          }
        }

        double alpha = 1.0;
        Eigen::Index drop = -1;
        for (Eigen::Index i = 0; i < a; ++i) {
          const Eigen::Index ki = active[static_cast<std::size_t>(i)];
          if (zeta(i) * sign[static_cast<std::size_t>(ki)] > 0.0) continue;
          const double zi = z_(ki);
          const double denom = zi - zeta(i);
          const double cross = denom != 0.0 ? std::max(0.0, zi / denom) : 0.0;
          if (cross < alpha) {
            alpha = cross;
            drop = i;
          }
        }
        if (drop < 0) {
          for (Eigen::Index i = 0; i < a; ++i) {
            z_(active[static_cast<std::size_t>(i)]) = zeta(i);
          }
          break;
        }
        const Eigen::Index kd = active[static_cast<std::size_t>(drop)];
        if (kd == enter && alpha == 0.0) return finish(Status::step_cap);
        for (Eigen::Index i = 0; i < a; ++i) {
          const Eigen::Index ki = active[static_cast<std::size_t>(i)];
          z_(ki) += alpha * (zeta(i) - z_(ki));
        }
        z_(kd) = 0.0;
        sign[static_cast<std::size_t>(kd)] = 0.0;
        active.erase(active.begin() + drop);
      }

      grad = b_;
      for (const Eigen::Index k : active) grad.noalias() += 0.5 * m_.col(k) * z_(k);
    }
  }

  const Eigen::VectorXd& z() const { return z_; }

 private:
  const Eigen::MatrixXd& m_;
  const Eigen::VectorXd& b_;
  Eigen::VectorXd z_;
};

}  // namespace

ProjectionProblem build_problem_gram(Eigen::MatrixXd sigma_hat, double m,
                                     const Eigen::VectorXd& beta_hat, const GroupSpec& g,
                                     ProjectionMode mode,
                                     const std::optional<WeightMatrix>& a, double c_lambda) {
  const Eigen::Index p = sigma_hat.rows();
  if (sigma_hat.cols() != p) throw std::invalid_argument("build_problem: sigma_hat not square");
  if (beta_hat.size() != p) throw std::invalid_argument("build_problem: beta_hat length mismatch");
  if (!(c_lambda > 0.0)) throw std::invalid_argument("build_problem: c_lambda must be positive");
  if (!(m >= 1.0)) throw std::invalid_argument("build_problem: sample size must be >= 1");
  validate_group(g, p);

  const auto gsize = static_cast<Eigen::Index>(g.size());
  const Eigen::VectorXd beta_g = beta_on_group(beta_hat, g);

  Eigen::VectorXd loading(gsize);
  switch (mode) {
    case ProjectionMode::sigma: {
      Eigen::MatrixXd sigma_gg(gsize, gsize);
      for (Eigen::Index r = 0; r < gsize; ++r) {
        for (Eigen::Index c = 0; c < gsize; ++c) {
          sigma_gg(r, c) = sigma_hat(g.col(static_cast<std::size_t>(r)),
                                     g.col(static_cast<std::size_t>(c)));
        }
      }
      loading = sigma_gg * beta_g;
      break;
    }
    case ProjectionMode::general: {
      if (!a) throw std::invalid_argument("build_problem: mode=general requires a weight matrix");
      if (a->dim() != gsize) {
        throw std::invalid_argument("build_problem: weight matrix dimension " +
                                    std::to_string(a->dim()) + " mismatches group size " +
                                    std::to_string(gsize));
      }
      loading = a->a() * beta_g;
      break;
    }
    case ProjectionMode::identity:
      loading = beta_g;
      break;
  }

  ProjectionProblem prob;
  prob.sigma_hat_mat = std::move(sigma_hat);
  prob.target = Eigen::VectorXd::Zero(p);
  for (std::size_t k = 0; k < g.size(); ++k) {
    prob.target(g.col(k)) = loading(static_cast<Eigen::Index>(k));
  }
  prob.scale = loading.norm();
  prob.lambda_n = c_lambda * std::sqrt(std::log(static_cast<double>(p)) / m);
  prob.mode = mode;
  return prob;
}

ProjectionProblem build_problem(const InitialFit& fit, const Dataset& d, const GroupSpec& g,
                                ProjectionMode mode, const std::optional<WeightMatrix>& a,
                                double c_lambda) {
  validate_dataset(d);
  Eigen::MatrixXd sigma_hat;
  double m = 0.0;
  if (fit.split) {
    const auto n2 = static_cast<Eigen::Index>(fit.split->second_half.size());
    Eigen::MatrixXd x2(n2, d.p());
    for (Eigen::Index i = 0; i < n2; ++i) {
      x2.row(i) = d.x.row(fit.split->second_half[static_cast<std::size_t>(i)] - 1);
    }
    m = static_cast<double>(n2);
    sigma_hat = (x2.transpose() * x2) / m;
  } else {
    m = static_cast<double>(d.n());
    sigma_hat = (d.x.transpose() * d.x) / m;
  }
  return build_problem_gram(std::move(sigma_hat), m, fit.beta_hat, g, mode, a, c_lambda);
}

ProjectionSolution solve_projection(const ProjectionProblem& prob) {
  const Eigen::Index p = prob.sigma_hat_mat.rows();
  if (prob.sigma_hat_mat.cols() != p || prob.target.size() != p) {
    throw std::invalid_argument("solve_projection: inconsistent problem dimensions");
  }
  if (!(prob.lambda_n > 0.0)) {
    throw std::invalid_argument("solve_projection: lambda_n must be positive");
  }

  ProjectionSolution sol;
  sol.u = Eigen::VectorXd::Zero(p);
  sol.lambda_effective = prob.lambda_n;
  if (prob.scale <= 0.0) return sol;

  const bool extra = prob.mode != ProjectionMode::identity;
  const Eigen::VectorXd v_tilde = prob.target / prob.scale;

  Eigen::MatrixXd m_mat;
  Eigen::VectorXd b;
  if (extra) {
    const Eigen::VectorXd border = prob.sigma_hat_mat * v_tilde;
    m_mat.resize(p + 1, p + 1);
    m_mat.topLeftCorner(p, p) = prob.sigma_hat_mat;
    m_mat.col(p).head(p) = border;
    m_mat.row(p).head(p) = border.transpose();
    m_mat(p, p) = v_tilde.dot(border);
    b.resize(p + 1);
    b.head(p) = prob.target;
    b(p) = prob.scale;
  } else {
    m_mat = prob.sigma_hat_mat;
    b = prob.target;
  }

  constexpr long max_steps = 50000;
  constexpr double kkt_rel = 0.25e-6;
  constexpr int max_escalations = 10;
  constexpr double escalation_factor = 1.5;
  // Acceptance allows twice the solver's own KKT tolerance so the
  // documented feasibility certificate holds with margin.
  constexpr double accept_tol = 0.5e-6;

  double lambda = prob.lambda_n;
  long steps_used = 0;
  double violation = 0.0;

  for (int attempt = 0; attempt <= max_escalations; ++attempt) {
    const double rho = prob.scale * lambda;
    DualSolver solver(m_mat, b);
    const DualSolver::Status status = solver.run(rho, max_steps, kkt_rel, steps_used);
    if (status == DualSolver::Status::converged) {
      Eigen::VectorXd u = -0.5 * solver.z().head(p);
      if (extra) u -= 0.5 * solver.z()(p) * v_tilde;
      const Eigen::VectorXd slack = prob.sigma_hat_mat * u - prob.target;
      violation = slack.lpNorm<Eigen::Infinity>();
      if (extra) violation = std::max(violation, std::abs(v_tilde.dot(slack)));
      if (violation <= rho * (1.0 + accept_tol)) {
        sol.u = std::move(u);
        sol.quad_value = std::max(0.0, sol.u.dot(prob.sigma_hat_mat * sol.u));
        sol.max_violation = violation;
        sol.lambda_effective = lambda;
        sol.iterations = steps_used;
        return sol;
      }
    }
    lambda *= escalation_factor;
  }
  throw SolverError("solve_projection: infeasible after " + std::to_string(max_escalations) +
                    " lambda escalations (final violation " + std::to_string(violation) + ")");
}

}  // namespace quadgroup
