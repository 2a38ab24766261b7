#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iontrap/heating_analysis.hpp"

namespace iontrap {

/// Electrode strip in the y-invariant plane z = 0, spanning x1 < x < x2.
struct Strip {
  std::string name;
  double x1 = 0.0;  // m
  double x2 = 0.0;  // m
  double voltage = 0.0;  // V (RF strips: amplitude in units of v_rf)
};

/// Gapless-plane surface trap: every point of z = 0 outside the strips is
/// grounded. Gaps between electrodes are absorbed into the strip edges.
struct TrapGeometry {
  std::vector<Strip> rf_strips;
  std::vector<Strip> dc_strips;
  double slot_width = 0.0;  // m; grounded in this model, kept for bookkeeping

  /// Two mirrored RF rails with inner edges at +-inner_edge and the given
  /// width; each edge moves outward (or inward) by half an electrode gap.
  /// Inner DC rails fill slot edge .. RF rail, outer DC rails extend to
  /// +-outer_extent. DC voltages start at zero.
  static TrapGeometry symmetric_six_rail(double inner_edge, double rf_width, double gap, double slot_width,
                                         double outer_extent);
  /// Inner edges +-70 um, 60 um wide, 5 um gaps, 100 um slot.
  static TrapGeometry reference();

  /// All lengths multiplied by s.
  [[nodiscard]] TrapGeometry scaled(double s) const;
  /// Throws InvalidArgument for non-positive widths or overlapping strips.
  void validate() const;
};

struct TrapDrive {
  double v_rf = 0.0;      // V amplitude
  double omega_rf = 0.0;  // rad/s
  IonConstants ion;

  /// 220 V at 2 pi 27.8 MHz on 171Yb+.
  static TrapDrive reference();
  void validate() const;
};

/// Potential of one strip at (x, z), z > 0:
/// (V/pi) [atan((x2 - x)/z) - atan((x1 - x)/z)].
double strip_potential(const Strip& s, double x, double z);
/// E = -grad(potential), closed form.
Eigen::Vector2d strip_field(const Strip& s, double x, double z);
/// dE_i/dx_j, closed form.
Eigen::Matrix2d strip_field_jacobian(const Strip& s, double x, double z);

/// Superposed quantities of a strip set (each strip at its own voltage times `scale`).
double potential(const std::vector<Strip>& strips, double x, double z, double scale = 1.0);
Eigen::Vector2d field(const std::vector<Strip>& strips, double x, double z, double scale = 1.0);
Eigen::Matrix2d field_jacobian(const std::vector<Strip>& strips, double x, double z, double scale = 1.0);

/// Pseudopotential energy e^2 |E_rf|^2 / (4 m Omega^2), J.
double pseudopotential(const TrapGeometry& g, const TrapDrive& d, double x, double z);

/// Position where the RF field vanishes (x, z). Root of E_rf found on the
/// symmetry axis and polished by Newton in 2D. Throws GeometryError if the
/// strips produce no null above the plane.
Eigen::Vector2d rf_null(const TrapGeometry& g);
double rf_null_height(const TrapGeometry& g, const TrapDrive& d);

struct SecularResult {
  Eigen::Vector2d null;               // m
  std::array<double, 2> frequencies;  // rad/s, descending
  std::array<double, 2> mathieu_q;    // along the same principal axes
  Eigen::Matrix2d axes;               // columns: principal directions (x, z components)
  Eigen::Matrix2d hessian;            // J/m^2
  bool pseudopotential_valid = true;  // max omega / Omega <= 0.1
};

/// Secular frequencies from the central-difference Hessian (step 1e-7 m) of
/// the pseudopotential plus any DC potential, evaluated at the RF null.
/// Throws InstabilityError if any |q| >= 0.9 or a curvature is not positive.
SecularResult secular_frequencies(const TrapGeometry& g, const TrapDrive& d, double fd_step = 1e-7);

struct TrapDepth {
  double depth_ev = 0.0;
  double saddle_height = 0.0;  // m
  double null_height = 0.0;    // m
};

/// Pseudopotential barrier from the null to the escape saddle above it on
/// the symmetry axis. Throws GeometryError if no saddle is found.
TrapDepth trap_depth(const TrapGeometry& g, const TrapDrive& d);

struct AxesRotation {
  double angle = 0.0;  // rad, high-frequency axis from +x, in (-pi/2, pi/2]
  std::array<double, 2> frequencies;  // rad/s, descending
  double splitting = 0.0;              // rad/s
  Eigen::Matrix2d axes;
};

/// Principal axes of the RF pseudopotential plus DC potential at the RF null.
/// Throws InstabilityError (anti-trapping) if a curvature is not positive.
AxesRotation dc_axes_rotation(const TrapGeometry& g, const TrapDrive& d);

struct DcCalibration {
  TrapGeometry geometry;  // with calibrated DC voltages
  std::array<double, 2> frequencies;  // achieved, rad/s, descending
  std::array<double, 2> relative_error;
  double dc_field_at_null = 0.0;  // |E_dc| left at the null, V/m
};

/// Least-squares search over the symmetric inner and outer DC voltages so the
/// radial pair approaches (high, low) while the DC field at the null stays zero.
DcCalibration calibrate_dc_split(const TrapGeometry& g, const TrapDrive& d, double high, double low);

struct FieldMapRow {
  double x = 0.0;
  double z = 0.0;
  double ex = 0.0;
  double ez = 0.0;
  double pseudopotential_ev = 0.0;
};

std::vector<FieldMapRow> field_map(const TrapGeometry& g, const TrapDrive& d, double x_min, double x_max,
                                   double z_min, double z_max, int nx, int nz);

}  // namespace iontrap
