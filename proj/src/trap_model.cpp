#include "iontrap/trap_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

TrapGeometry TrapGeometry::symmetric_six_rail(double inner_edge, double rf_width, double gap, double slot_width,
                                              double outer_extent) {
  const double h = 0.5 * gap;
  const double rf_in = inner_edge - h;
  const double rf_out = inner_edge + rf_width + h;
  TrapGeometry g;
  g.slot_width = slot_width;
  g.rf_strips = {{"rf_left", -rf_out, -rf_in, 1.0}, {"rf_right", rf_in, rf_out, 1.0}};
  g.dc_strips = {{"inner_left", -rf_in, -0.5 * slot_width, 0.0},
                 {"inner_right", 0.5 * slot_width, rf_in, 0.0},
                 {"outer_left", -outer_extent, -rf_out, 0.0},
                 {"outer_right", rf_out, outer_extent, 0.0}};
  return g;
}

TrapGeometry TrapGeometry::reference() { return symmetric_six_rail(70e-6, 60e-6, 5e-6, 100e-6, 500e-6); }

TrapGeometry TrapGeometry::scaled(double s) const {
  TrapGeometry g = *this;
  for (auto& st : g.rf_strips) {
    st.x1 *= s;
    st.x2 *= s;
  }
  for (auto& st : g.dc_strips) {
    st.x1 *= s;
    st.x2 *= s;
  }
  g.slot_width *= s;
  return g;
}

void TrapGeometry::validate() const {
  if (rf_strips.empty()) throw InvalidArgument("trap geometry: no RF strips");
  if (slot_width < 0.0) throw InvalidArgument("trap geometry: slot_width must be >= 0");
  std::vector<const Strip*> all;
  for (const auto& s : rf_strips) all.push_back(&s);
  for (const auto& s : dc_strips) all.push_back(&s);
  for (const auto* s : all) {
    if (!(s->x2 > s->x1)) throw InvalidArgument("trap geometry: strip '" + s->name + "' has non-positive width");
  }
  std::sort(all.begin(), all.end(), [](const Strip* a, const Strip* b) { return a->x1 < b->x1; });
  for (std::size_t i = 1; i < all.size(); ++i) {
    // Shared edges are allowed; overlap is not.
    if (all[i]->x1 < all[i - 1]->x2 - 1e-15) {
      throw InvalidArgument("trap geometry: strips '" + all[i - 1]->name + "' and '" + all[i]->name + "' overlap");
    }
  }
}

TrapDrive TrapDrive::reference() {
  TrapDrive d;
  d.v_rf = 220.0;
  d.omega_rf = constants::two_pi * 27.8e6;
  d.ion = IonConstants::yb171(constants::two_pi * 2.1e6);
  return d;
}

void TrapDrive::validate() const {
  if (!(v_rf > 0.0)) throw InvalidArgument("trap drive: v_rf must be > 0");
  if (!(omega_rf > 0.0)) throw InvalidArgument("trap drive: omega_rf must be > 0");
  if (!(ion.mass > 0.0 && ion.charge > 0.0)) throw InvalidArgument("trap drive: ion mass and charge must be > 0");
}

double strip_potential(const Strip& s, double x, double z) {
  return s.voltage / constants::pi * (std::atan((s.x2 - x) / z) - std::atan((s.x1 - x) / z));
}

Eigen::Vector2d strip_field(const Strip& s, double x, double z) {
  // Per edge e with u = e - x: d/dx atan(u/z) = -z/r^2, d/dz atan(u/z) = -u/r^2.
  auto grad = [&](double e) {
    const double u = e - x;
    const double r2 = u * u + z * z;
    return Eigen::Vector2d(-z / r2, -u / r2);
  };
  const Eigen::Vector2d g = (grad(s.x2) - grad(s.x1)) * (s.voltage / constants::pi);
  return -g;
}

Eigen::Matrix2d strip_field_jacobian(const Strip& s, double x, double z) {
  auto hess = [&](double e) {
    const double u = e - x;
    const double r2 = u * u + z * z;
    const double r4 = r2 * r2;
    Eigen::Matrix2d h;
    h(0, 0) = -2.0 * u * z / r4;
    h(1, 1) = 2.0 * u * z / r4;
    h(0, 1) = h(1, 0) = (z * z - u * u) / r4;
    return h;
  };
  const Eigen::Matrix2d h = (hess(s.x2) - hess(s.x1)) * (s.voltage / constants::pi);
  return -h;
}

double potential(const std::vector<Strip>& strips, double x, double z, double scale) {
  double v = 0.0;
  for (const auto& s : strips) v += strip_potential(s, x, z);
  return v * scale;
}

Eigen::Vector2d field(const std::vector<Strip>& strips, double x, double z, double scale) {
  Eigen::Vector2d e = Eigen::Vector2d::Zero();
  for (const auto& s : strips) e += strip_field(s, x, z);
  return e * scale;
}

Eigen::Matrix2d field_jacobian(const std::vector<Strip>& strips, double x, double z, double scale) {
  Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
  for (const auto& s : strips) j += strip_field_jacobian(s, x, z);
  return j * scale;
}

double pseudopotential(const TrapGeometry& g, const TrapDrive& d, double x, double z) {
  const Eigen::Vector2d e = field(g.rf_strips, x, z, d.v_rf);
  const double q = d.ion.charge;
  return q * q * e.squaredNorm() / (4.0 * d.ion.mass * d.omega_rf * d.omega_rf);
}

namespace {

double length_scale(const TrapGeometry& g) {
  double l = 0.0;
  for (const auto& s : g.rf_strips) l = std::max({l, std::abs(s.x1), std::abs(s.x2)});
  return l;
}

// Total potential energy (pseudopotential + DC) at (x, z), J.
double total_energy(const TrapGeometry& g, const TrapDrive& d, double x, double z) {
  return pseudopotential(g, d, x, z) + d.ion.charge * potential(g.dc_strips, x, z);
}

Eigen::Matrix2d fd_hessian(const TrapGeometry& g, const TrapDrive& d, const Eigen::Vector2d& p, double h) {
  auto u = [&](double dx, double dz) { return total_energy(g, d, p.x() + dx, p.y() + dz); };
  const double c = u(0.0, 0.0);
  Eigen::Matrix2d hm;
  hm(0, 0) = (u(h, 0.0) - 2.0 * c + u(-h, 0.0)) / (h * h);
  hm(1, 1) = (u(0.0, h) - 2.0 * c + u(0.0, -h)) / (h * h);
  hm(0, 1) = hm(1, 0) = (u(h, h) - u(h, -h) - u(-h, h) + u(-h, -h)) / (4.0 * h * h);
  return hm;
}

struct Principal {
  Eigen::Vector2d values;  // descending
  Eigen::Matrix2d axes;
};

// Eigen-decomposition with descending eigenvalues; (near-)degenerate
// curvatures keep the coordinate axes.
Principal principal(const Eigen::Matrix2d& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
  Principal p;
  p.values = Eigen::Vector2d(es.eigenvalues()(1), es.eigenvalues()(0));
  const double scale = std::max(std::abs(p.values(0)), std::abs(p.values(1)));
  if (scale > 0.0 && (p.values(0) - p.values(1)) < 1e-7 * scale) {
    p.axes = Eigen::Matrix2d::Identity();
    p.values = Eigen::Vector2d(h(0, 0), h(1, 1));
    if (p.values(1) > p.values(0)) {
      std::swap(p.values(0), p.values(1));
      p.axes.col(0) = Eigen::Vector2d(0.0, 1.0);
      p.axes.col(1) = Eigen::Vector2d(1.0, 0.0);
    }
    return p;
  }
  p.axes.col(0) = es.eigenvectors().col(1);
  p.axes.col(1) = es.eigenvectors().col(0);
  for (int k = 0; k < 2; ++k) {
    // Fix the sign so the dominant component is positive.
    const auto c = p.axes.col(k);
    if ((std::abs(c.x()) >= std::abs(c.y()) ? c.x() : c.y()) < 0.0) p.axes.col(k) = -c;
  }
  return p;
}

}  // namespace

Eigen::Vector2d rf_null(const TrapGeometry& g) {
  g.validate();
  const double l = length_scale(g);
  auto ez = [&](double z) { return field(g.rf_strips, 0.0, z).y(); };
  constexpr int n = 600;
  const double z_lo = 1e-3 * l;
  const double z_hi = 50.0 * l;
  double prev_z = z_lo;
  double prev = ez(prev_z);
  double root = std::numeric_limits<double>::quiet_NaN();
  for (int i = 1; i <= n; ++i) {
    const double z = z_lo * std::pow(z_hi / z_lo, static_cast<double>(i) / n);
    const double v = ez(z);
    if (prev == 0.0) {
      root = prev_z;
      break;
    }
    if ((prev < 0.0) != (v < 0.0)) {
      std::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve(ez, prev_z, z, prev, v,
                                                       boost::math::tools::eps_tolerance<double>(52), iters);
      root = 0.5 * (r.first + r.second);
      break;
    }
    prev_z = z;
    prev = v;
  }
  if (!std::isfinite(root)) throw GeometryError("rf_null: no RF null above the plane on the symmetry axis");

  // Newton polish in 2D (moves off-axis for asymmetric rails).
  Eigen::Vector2d p(0.0, root);
  for (int it = 0; it < 50; ++it) {
    const Eigen::Vector2d e = field(g.rf_strips, p.x(), p.y());
    const Eigen::Matrix2d j = field_jacobian(g.rf_strips, p.x(), p.y());
    const Eigen::Vector2d step = j.fullPivLu().solve(-e);
    if (!step.allFinite()) break;
    p += step;
    if (step.norm() < 1e-15 * l) break;
  }
  if (!(p.y() > 0.0) || !p.allFinite()) throw GeometryError("rf_null: Newton polish left the half-space");
  return p;
}

double rf_null_height(const TrapGeometry& g, const TrapDrive& d) {
  d.validate();
  return rf_null(g).y();
}

SecularResult secular_frequencies(const TrapGeometry& g, const TrapDrive& d, double fd_step) {
  d.validate();
  SecularResult r;
  r.null = rf_null(g);
  r.hessian = fd_hessian(g, d, r.null, fd_step);
  const auto p = principal(r.hessian);
  r.axes = p.axes;
  const double m = d.ion.mass;
  const Eigen::Matrix2d psi = -field_jacobian(g.rf_strips, r.null.x(), r.null.y());
  double max_w = 0.0;
  for (int k = 0; k < 2; ++k) {
    if (!(p.values(k) > 0.0)) throw InstabilityError("secular_frequencies: potential is not trapping");
    r.frequencies[static_cast<std::size_t>(k)] = std::sqrt(p.values(k) / m);
    const Eigen::Vector2d a = p.axes.col(k);
    r.mathieu_q[static_cast<std::size_t>(k)] =
        2.0 * d.ion.charge * d.v_rf * a.dot(psi * a) / (m * d.omega_rf * d.omega_rf);
    max_w = std::max(max_w, r.frequencies[static_cast<std::size_t>(k)]);
  }
  for (double q : r.mathieu_q) {
    if (std::abs(q) >= 0.9) throw InstabilityError("secular_frequencies: Mathieu |q| >= 0.9");
  }
  r.pseudopotential_valid = max_w / d.omega_rf <= 0.1;
  return r;
}

TrapDepth trap_depth(const TrapGeometry& g, const TrapDrive& d) {
  d.validate();
  const Eigen::Vector2d null = rf_null(g);
  auto phi = [&](double z) { return pseudopotential(g, d, null.x(), z); };
  constexpr int n = 800;
  const double z_lo = null.y();
  const double z_hi = 100.0 * null.y();
  int best = 0;
  double best_val = -1.0;
  std::vector<double> zs(n + 1);
  for (int i = 0; i <= n; ++i) {
    zs[static_cast<std::size_t>(i)] = z_lo * std::pow(z_hi / z_lo, static_cast<double>(i) / n);
    const double v = phi(zs[static_cast<std::size_t>(i)]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best == 0 || best == n) throw GeometryError("trap_depth: no escape saddle above the null");
  const auto r = boost::math::tools::brent_find_minima([&](double z) { return -phi(z); },
                                                       zs[static_cast<std::size_t>(best - 1)],
                                                       zs[static_cast<std::size_t>(best + 1)], 50);
  TrapDepth t;
  t.saddle_height = r.first;
  t.null_height = null.y();
  t.depth_ev = (-r.second - phi(null.y())) / constants::elementary_charge;
  return t;
}

AxesRotation dc_axes_rotation(const TrapGeometry& g, const TrapDrive& d) {
  d.validate();
  const Eigen::Vector2d null = rf_null(g);
  const auto p = principal(fd_hessian(g, d, null, 1e-7));
  AxesRotation out;
  for (int k = 0; k < 2; ++k) {
    if (!(p.values(k) > 0.0)) throw InstabilityError("dc_axes_rotation: anti-trapping curvature");
    out.frequencies[static_cast<std::size_t>(k)] = std::sqrt(p.values(k) / d.ion.mass);
  }
  out.axes = p.axes;
  double angle = std::atan2(p.axes(1, 0), p.axes(0, 0));
  if (angle <= -constants::pi / 2) angle += constants::pi;
  if (angle > constants::pi / 2) angle -= constants::pi;
  out.angle = angle;
  out.splitting = out.frequencies[0] - out.frequencies[1];
  return out;
}

namespace {

void set_dc(TrapGeometry& g, const std::string& prefix, double v) {
  for (auto& s : g.dc_strips) {
    if (s.name.rfind(prefix, 0) == 0) s.voltage = v;
  }
}

}  // namespace

DcCalibration calibrate_dc_split(const TrapGeometry& g, const TrapDrive& d, double high, double low) {
  if (!(high > 0.0 && low > 0.0)) throw InvalidArgument("calibrate_dc_split: targets must be > 0");
  const Eigen::Vector2d null = rf_null(g);

  // The DC field at the null is linear in the voltages: pick the outer/inner
  // ratio that cancels it, leaving one free voltage.
  TrapGeometry unit = g;
  for (auto& s : unit.dc_strips) s.voltage = 0.0;
  TrapGeometry inner = unit;
  set_dc(inner, "inner", 1.0);
  TrapGeometry outer = unit;
  set_dc(outer, "outer", 1.0);
  const double a = field(inner.dc_strips, null.x(), null.y()).y();
  const double b = field(outer.dc_strips, null.x(), null.y()).y();
  if (b == 0.0) throw GeometryError("calibrate_dc_split: outer DC rails have no field at the null");

  auto configure = [&](double vi) {
    TrapGeometry c = g;
    set_dc(c, "inner", vi);
    set_dc(c, "outer", -a * vi / b);
    return c;
  };
  auto cost = [&](double vi) {
    try {
      const auto rot = dc_axes_rotation(configure(vi), d);
      const double e1 = rot.frequencies[0] / high - 1.0;
      const double e2 = rot.frequencies[1] / low - 1.0;
      return e1 * e1 + e2 * e2;
    } catch (const InstabilityError&) {
      return 1e6;
    }
  };

  // Coarse scan, then Brent.
  constexpr int n = 400;
  const double v_max = 50.0;
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double v = -v_max + 2.0 * v_max * i / n;
    const double c = cost(v);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  const double step = 2.0 * v_max / n;
  const double lo = -v_max + std::max(0, best - 1) * step;
  const double hi = -v_max + std::min(n, best + 1) * step;
  const auto r = boost::math::tools::brent_find_minima(cost, lo, hi, 50);

  DcCalibration out;
  out.geometry = configure(r.first);
  const auto rot = dc_axes_rotation(out.geometry, d);
  out.frequencies = rot.frequencies;
  out.relative_error = {rot.frequencies[0] / high - 1.0, rot.frequencies[1] / low - 1.0};
  out.dc_field_at_null = field(out.geometry.dc_strips, null.x(), null.y()).norm();
  return out;
}

std::vector<FieldMapRow> field_map(const TrapGeometry& g, const TrapDrive& d, double x_min, double x_max,
                                   double z_min, double z_max, int nx, int nz) {
  if (nx < 2 || nz < 2) throw InvalidArgument("field_map: need at least 2 points per axis");
  if (!(z_min > 0.0)) throw InvalidArgument("field_map: z_min must be > 0");
  std::vector<FieldMapRow> rows;
  rows.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(nz));
  for (int iz = 0; iz < nz; ++iz) {
    const double z = z_min + (z_max - z_min) * iz / (nz - 1);
    for (int ix = 0; ix < nx; ++ix) {
      const double x = x_min + (x_max - x_min) * ix / (nx - 1);
      const Eigen::Vector2d e = field(g.rf_strips, x, z, d.v_rf);
      rows.push_back({x, z, e.x(), e.y(), pseudopotential(g, d, x, z) / constants::elementary_charge});
    }
  }
  return rows;
}

}  // namespace iontrap
