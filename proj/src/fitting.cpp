#include "iontrap/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "iontrap/errors.hpp"

namespace iontrap {

LinearLeastSquares solve_weighted_least_squares(const Eigen::MatrixXd& design,
                                                std::span<const double> ys,
                                                std::span<const double> sigmas,
                                                CovarianceScaling scaling) {
  const auto rows = design.rows();
  const auto cols = design.cols();
  if (static_cast<std::size_t>(rows) != ys.size()) throw InvalidArgument("least squares: row count mismatch");
  if (!sigmas.empty() && sigmas.size() != ys.size()) throw InvalidArgument("least squares: sigma count mismatch");
  if (rows < cols) throw FitError("least squares: fewer points than parameters");

  Eigen::VectorXd w = Eigen::VectorXd::Ones(rows);
  if (!sigmas.empty()) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double s = sigmas[static_cast<std::size_t>(i)];
      if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("least squares: sigmas must be positive");
      w(i) = 1.0 / (s * s);
    }
  }
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), rows);

  // Whiten, then equilibrate columns so that abscissae in seconds or metres
  // do not make the normal matrix look singular.
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd b = sw.asDiagonal() * design;
  Eigen::VectorXd col_scale(cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    const double norm = b.col(k).norm();
    col_scale(k) = norm > 0.0 ? 1.0 / norm : 1.0;
    b.col(k) *= col_scale(k);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b);
  qr.setThreshold(1e-12);
  if (qr.rank() < cols) throw FitError("least squares: singular normal matrix");

  LinearLeastSquares out;
  out.params = col_scale.asDiagonal() * qr.solve(Eigen::VectorXd(sw.cwiseProduct(y)));
  const Eigen::MatrixXd inv = (b.transpose() * b).inverse();
  out.covariance = col_scale.asDiagonal() * inv * col_scale.asDiagonal();
  const Eigen::VectorXd resid = y - design * out.params;
  out.chi2 = resid.cwiseProduct(resid).dot(w);
  out.dof = static_cast<int>(rows - cols);
  if (scaling == CovarianceScaling::reduced_chi2 && out.dof > 0) {
    out.covariance *= out.chi2 / out.dof;
  }
  return out;
}

LinearLeastSquares fit_polynomial(std::span<const double> xs, std::span<const double> ys,
                                  std::span<const double> sigmas, int degree, double x0,
                                  CovarianceScaling scaling) {
  if (degree < 0) throw InvalidArgument("polynomial degree must be >= 0");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(xs.size()), degree + 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      a(static_cast<Eigen::Index>(i), k) = p;
      p *= xs[i] - x0;
    }
  }
  return solve_weighted_least_squares(a, ys, sigmas, scaling);
}

LineFit fit_line(std::span<const double> xs, std::span<const double> ys,
                 std::span<const double> sigmas, CovarianceScaling scaling) {
  if (xs.size() < 2) throw FitError("line fit needs at least two points");
  const bool all_equal = std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
  if (all_equal) throw FitError("line fit: all abscissae are equal");

  const auto ls = fit_polynomial(xs, ys, sigmas, 1, 0.0, scaling);
  LineFit out;
  out.intercept = ls.params(0);
  out.slope = ls.params(1);
  out.intercept_uncertainty = std::sqrt(std::max(0.0, ls.covariance(0, 0)));
  out.slope_uncertainty = std::sqrt(std::max(0.0, ls.covariance(1, 1)));
  out.chi2 = ls.chi2;
  out.dof = ls.dof;
  return out;
}

double line_r_squared(std::span<const double> xs, std::span<const double> ys) {
  const auto fit = fit_line(xs, ys, {}, CovarianceScaling::absolute);
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
}

namespace {

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0, const LevenbergMarquardtOptions& opt) {
  Eigen::MatrixXd j(r0.size(), p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double typical = opt.scale.size() == p.size() ? opt.scale(k) : 1.0;
    const double h = opt.fd_step * std::max(std::abs(p(k)), typical);
    Eigen::VectorXd q = p;
    q(k) += h;
    j.col(k) = (f(q) - r0) / h;
  }
  return j;
}

}  // namespace

NonlinearFit levenberg_marquardt(const ResidualFunction& residuals, Eigen::VectorXd start,
                                 const LevenbergMarquardtOptions& options) {
  NonlinearFit out;
  Eigen::VectorXd p = std::move(start);
  Eigen::VectorXd r = residuals(p);
  double cost = r.squaredNorm();
  double lambda = options.initial_lambda;

  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Eigen::MatrixXd j = numeric_jacobian(residuals, p, r, options);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;

    bool improved = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index k = 0; k < damped.rows(); ++k) {
        damped(k, k) += lambda * std::max(jtj(k, k), 1e-300);
      }
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd trial = p + step;
      const Eigen::VectorXd rt = residuals(trial);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct <= cost) {
        const double rel = (cost - ct) / std::max(cost, 1e-300);
        const double step_rel = step.norm() / std::max(p.norm(), 1e-300);
        p = trial;
        r = rt;
        cost = ct;
        lambda = std::max(lambda / 10.0, 1e-15);
        improved = true;
        if (rel < options.relative_tolerance || step_rel < options.relative_tolerance) {
          out.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      // No descent direction left: at a (possibly degenerate) minimum.
      out.converged = true;
    }
    if (out.converged) break;
  }

  const Eigen::MatrixXd j = numeric_jacobian(residuals, p, r, options);
  const Eigen::MatrixXd jtj = j.transpose() * j;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  out.covariance = lu.rank() == jtj.rows()
                       ? Eigen::MatrixXd(lu.inverse())
                       : Eigen::MatrixXd::Constant(jtj.rows(), jtj.cols(),
                                                   std::numeric_limits<double>::infinity());
  out.params = p;
  out.cost = cost;
  return out;
}

}  // namespace iontrap
