#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace iontrap {

/// A value with a one-sigma uncertainty.
struct Estimate {
  double value = 0.0;
  double uncertainty = 0.0;
};

/// How parameter covariances are reported.
///  - absolute: (J^T W J)^-1 with the supplied sigmas taken at face value.
///  - reduced_chi2: the absolute covariance scaled by chi^2/dof (dof > 0);
///    exact data therefore yields zero uncertainty.
enum class CovarianceScaling { absolute, reduced_chi2 };

struct LinearLeastSquares {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  int dof = 0;
};

/// Weighted linear least squares for y ~ A p. Empty sigmas means unit weights.
/// Throws FitError when A^T W A is singular.
LinearLeastSquares solve_weighted_least_squares(const Eigen::MatrixXd& design,
                                                std::span<const double> ys,
                                                std::span<const double> sigmas,
                                                CovarianceScaling scaling);

/// Polynomial fit y = sum_k c_k (x - x0)^k for k = 0..degree.
LinearLeastSquares fit_polynomial(std::span<const double> xs, std::span<const double> ys,
                                  std::span<const double> sigmas, int degree, double x0,
                                  CovarianceScaling scaling);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_uncertainty = 0.0;
  double intercept_uncertainty = 0.0;
  double chi2 = 0.0;
  int dof = 0;
};

/// Straight-line fit. Throws FitError if all x are equal.
LineFit fit_line(std::span<const double> xs, std::span<const double> ys,
                 std::span<const double> sigmas, CovarianceScaling scaling);

/// Coefficient of determination of an unweighted straight-line fit.
double line_r_squared(std::span<const double> xs, std::span<const double> ys);

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct NonlinearFit {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // (J^T J)^-1 of the final residual Jacobian
  double cost = 0.0;           // sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

struct LevenbergMarquardtOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-12;
  double initial_lambda = 1e-3;
  /// Relative finite-difference step per parameter, scaled by max(|p|, scale).
  double fd_step = 1e-7;
  Eigen::VectorXd scale;  // typical parameter magnitude; empty = ones
};

/// Minimizes |r(p)|^2 with a forward-difference Jacobian.
NonlinearFit levenberg_marquardt(const ResidualFunction& residuals, Eigen::VectorXd start,
                                 const LevenbergMarquardtOptions& options = {});

}  // namespace iontrap
