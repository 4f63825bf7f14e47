#include "fluxvol/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fluxvol {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients (quartic continuous extension)
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

struct DenseStep {
  double t0 = 0.0, h = 0.0;
  Vec3 r1, r2, r3, r4, r5;  // Hairer's contiguous dense-output coefficients

  Vec3 eval(double t) const {
    double th = (t - t0) / h;
    double th1 = 1.0 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
  }
};

class Dopri5 {
 public:
  using Rhs = std::function<Vec3(const Vec3&)>;

  Dopri5(Rhs rhs, const Vec3& y0, double dir, const TraceOptions& opts)
      : rhs_(std::move(rhs)), opts_(opts), y_(y0), dir_(dir) {
    k1_ = rhs_(y_);
    h_ = std::min(opts.initial_step, opts.max_step);
  }

  // Advance one accepted step; fills the dense interpolant. Returns false on
  // step-size underflow. h is clamped to h_cap (angular-rate limit) and to
  // the remaining interval.
  bool step(double t_remaining, double h_cap) {
    double h = std::min({h_, h_cap, t_remaining});
    for (int attempt = 0; attempt < 200; ++attempt) {
      // underflow only counts when error control drove h down, not when the
      // remaining interval is itself tiny
      if (h < 1e-14 * std::max(1.0, std::fabs(t_)) && h < t_remaining)
        return false;
      double hs = dir_ * h;
      Vec3 k2 = rhs_(y_ + hs * (a21 * k1_));
      Vec3 k3 = rhs_(y_ + hs * (a31 * k1_ + a32 * k2));
      Vec3 k4 = rhs_(y_ + hs * (a41 * k1_ + a42 * k2 + a43 * k3));
      Vec3 k5 = rhs_(y_ + hs * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
      Vec3 k6 = rhs_(y_ + hs * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      Vec3 ynew = y_ + hs * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      Vec3 k7 = rhs_(ynew);
      Vec3 errv = hs * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double err = 0.0;
      const double* yp = &y_.x;
      const double* np = &ynew.x;
      const double* ep = &errv.x;
      for (int i = 0; i < 3; ++i) {
        double sc = opts_.atol + opts_.rtol * std::max(std::fabs(yp[i]), std::fabs(np[i]));
        double q = ep[i] / sc;
        err += q * q;
      }
      err = std::sqrt(err / 3.0);

      if (err <= 1.0) {
        Vec3 ydiff = ynew - y_;
        Vec3 bspl = hs * k1_ - ydiff;
        dense_.t0 = t_;
        dense_.h = hs;
        dense_.r1 = y_;
        dense_.r2 = ydiff;
        dense_.r3 = bspl;
        dense_.r4 = ydiff - hs * k7 - bspl;
        dense_.r5 = hs * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        t_ += hs;
        y_ = ynew;
        k1_ = k7;  // FSAL
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h_ = h * std::min(5.0, std::max(0.2, fac));
        h_ = std::min(h_, opts_.max_step);
        last_h_ = h;
        return true;
      }
      double fac = 0.9 * std::pow(err, -0.2);
      h *= std::min(0.9, std::max(0.1, fac));
    }
    return false;
  }

  double t() const { return t_; }
  const Vec3& y() const { return y_; }
  const Vec3& deriv() const { return k1_; }
  const DenseStep& dense() const { return dense_; }
  double last_step() const { return last_h_; }

 private:
  Rhs rhs_;
  TraceOptions opts_;
  Vec3 y_;
  Vec3 k1_;
  double t_ = 0.0;
  double h_ = 1e-3;
  double last_h_ = 0.0;
  double dir_ = 1.0;
  DenseStep dense_;
};

// Continuous angle bookkeeping along the orbit: toroidal angle and poloidal
// angle about a center circle, unwrapped by accumulating principal-value
// increments (valid because steps are clamped to small angular advances).
struct AngleTracker {
  double phi = 0.0;
  double theta = 0.0;
  double Rc = 1.0, Zc = 0.0;

  void init(const Vec3& p, double Rc_, double Zc_) {
    Rc = Rc_;
    Zc = Zc_;
    CylPoint c = to_cylindrical(p);
    phi = c.phi;
    theta = std::atan2(c.Z - Zc, c.R - Rc);
  }
  // advance to point q, assuming |increment| < pi for both angles
  void advance(const Vec3& q) {
    CylPoint c = to_cylindrical(q);
    phi += angle_diff(c.phi, wrap_angle(phi));
    double th = std::atan2(c.Z - Zc, c.R - Rc);
    theta += angle_diff(th, wrap_angle(theta));
  }
  double angle_at(const Vec3& q, bool toroidal) const {
    // unwrapped angle at a point within one step of the current state
    CylPoint c = to_cylindrical(q);
    if (toroidal) return phi + angle_diff(c.phi, wrap_angle(phi));
    double th = std::atan2(c.Z - Zc, c.R - Rc);
    return theta + angle_diff(th, wrap_angle(theta));
  }
};

}  // namespace

OrbitSegment trace(const FieldModel& field, const Vec3& start, double t_end,
                   const TraceOptions& opts, const SectionSpec* section,
                   std::size_t max_crossings) {
  OrbitSegment orbit;
  orbit.t_end_requested = t_end;
  double dir = (t_end >= 0.0) ? 1.0 : -1.0;
  double t_total = std::fabs(t_end);

  if (!field.in_domain(start)) throw DomainError("trace: start point outside field domain");

  auto rhs = [&](const Vec3& x) { return field.eval_B(x); };

  // angular center for unwrapping: the section center when given, else the
  // point itself offset to the machine axis estimate (R of the start)
  double Rc = section ? section->R_center : to_cylindrical(start).R;
  double Zc = section ? section->Z_center : 0.0;

  AngleTracker angles;
  angles.init(start, Rc, Zc);

  if (opts.store_points) {
    orbit.times.push_back(0.0);
    orbit.points.push_back(start);
  }

  try {
    Dopri5 integ(rhs, start, dir, opts);

    auto angular_rate = [&](const Vec3& p, const Vec3& v) {
      CylPoint c = to_cylindrical(p);
      double dphi = std::fabs((p.x * v.y - p.y * v.x) / (c.R * c.R));
      double dR = (p.x * v.x + p.y * v.y) / c.R;
      double rx = c.R - Rc, rz = c.Z - Zc;
      double rho2 = rx * rx + rz * rz;
      double dth = rho2 > 1e-20 ? std::fabs((rx * v.z - rz * dR) / rho2) : 0.0;
      return std::max(dphi, dth);
    };

    // previous section-function value for crossing detection
    auto section_value = [&](const AngleTracker& a) {
      if (!section) return 0.0;
      if (section->kind == SectionSpec::Kind::PlanePhi) return a.phi;
      return a.theta;
    };
    double target0 = section ? (section->kind == SectionSpec::Kind::PlanePhi ? section->phi0
                                                                             : section->theta0)
                             : 0.0;

    double prev_w = 0.0;
    if (section) {
      double s0 = section_value(angles);
      // nearest target level strictly ahead/behind is resolved per step below
      prev_w = s0 - target0;
    }

    std::uint64_t nsteps = 0;
    while (integ.t() * dir < t_total) {
      double rate = angular_rate(integ.y(), integ.deriv());
      double h_cap = rate > 1e-12 ? opts.max_angle_per_step / rate : opts.max_step;
      double remaining = t_total - integ.t() * dir;
      if (!integ.step(remaining, h_cap)) {
        orbit.status = TraceStatus::StepUnderflow;
        break;
      }
      if (++nsteps > opts.max_steps) {
        orbit.status = TraceStatus::MaxSteps;
        break;
      }

      AngleTracker prev_angles = angles;
      angles.advance(integ.y());

      if (opts.store_points) {
        orbit.times.push_back(integ.t());
        orbit.points.push_back(integ.y());
      }

      if (section) {
        double w0 = prev_w;
        double w1 = section_value(angles) - target0;
        // count every multiple of 2pi the section function moved through
        double lo = std::min(w0, w1), hi = std::max(w0, w1);
        long k0 = static_cast<long>(std::ceil(lo / kTwoPi - 1e-13));
        long k1 = static_cast<long>(std::floor(hi / kTwoPi + 1e-13));
        for (long k = k0; k <= k1; ++k) {
          double level = k * kTwoPi;
          if (std::fabs(w1 - w0) < 1e-300) continue;
          if ((w0 - level) == 0.0 && integ.t() == 0.0) continue;
          // bracketed root refinement on the dense output (bisection + secant)
          const DenseStep& ds = integ.dense();
          double ta = ds.t0, tb = ds.t0 + ds.h;
          auto wfun = [&](double t) {
            Vec3 p = ds.eval(t);
            return prev_angles.angle_at(p, section->kind == SectionSpec::Kind::PlanePhi) -
                   target0 - level;
          };
          double fa = w0 - level, fb = w1 - level;
          if (fa == 0.0) continue;  // crossing at the very start of the step: found last step
          if (fa * fb > 0.0) continue;
          double tr = tb, fr = fb;
          for (int it = 0; it < 200; ++it) {
            // secant candidate, safeguarded by bisection
            double tc = tr - fr * (tb - ta) / (fb - fa);
            if (!(tc > std::min(ta, tb) && tc < std::max(ta, tb)))
              tc = 0.5 * (ta + tb);
            double fc = wfun(tc);
            if (std::fabs(fc) < 1e-12 || std::fabs(tb - ta) < 1e-15 * std::max(1.0, std::fabs(tb))) {
              tr = tc;
              fr = fc;
              break;
            }
            if (fa * fc <= 0.0) {
              tb = tc;
              fb = fc;
            } else {
              ta = tc;
              fa = fc;
            }
            tr = tc;
            fr = fc;
          }
          CrossingEvent ev;
          ev.t = tr;
          ev.point = ds.eval(tr);
          ev.section_residual = fr;
          CylPoint c = to_cylindrical(ev.point);
          Vec3 v = field.eval_B(ev.point);
          double dwdt;
          if (section->kind == SectionSpec::Kind::PlanePhi) {
            dwdt = (ev.point.x * v.y - ev.point.y * v.x) / (c.R * c.R);
          } else {
            double dR = (ev.point.x * v.x + ev.point.y * v.y) / c.R;
            double rx = c.R - Rc, rz = c.Z - Zc;
            dwdt = (rx * v.z - rz * dR) / (rx * rx + rz * rz);
          }
          ev.direction = dwdt >= 0.0 ? +1 : -1;
          ev.transverse = std::fabs(dwdt) >= 1e-6 * norm(v);
          ev.phi_unwrapped = prev_angles.angle_at(ev.point, true);
          ev.theta_unwrapped = prev_angles.angle_at(ev.point, false);
          orbit.crossings.push_back(ev);
          if (max_crossings > 0 && orbit.crossings.size() >= max_crossings) {
            orbit.t_reached = integ.t();
            orbit.status = TraceStatus::Ok;
            std::sort(orbit.crossings.begin(), orbit.crossings.end(),
                      [](const CrossingEvent& a, const CrossingEvent& b) { return a.t < b.t; });
            return orbit;
          }
        }
        prev_w = w1;
      }
    }
    orbit.t_reached = integ.t();
  } catch (const DomainError&) {
    orbit.status = TraceStatus::DomainExit;
    if (!orbit.times.empty()) orbit.t_reached = orbit.times.back();
  }
  std::sort(orbit.crossings.begin(), orbit.crossings.end(),
            [](const CrossingEvent& a, const CrossingEvent& b) { return a.t < b.t; });
  return orbit;
}

std::vector<CrossingEvent> find_crossings(const FieldModel& field, const Vec3& start,
                                          const SectionSpec& section, std::size_t max_count,
                                          double t_budget, const TraceOptions& opts) {
  TraceOptions o = opts;
  o.store_points = false;
  OrbitSegment orbit = trace(field, start, t_budget, o, &section, max_count);
  return orbit.crossings;
}

AxisResult find_magnetic_axis(const FieldModel& field, const Vec3& guess,
                              const SectionSpec& section, const TraceOptions& opts,
                              int max_iterations, double tol) {
  if (section.kind != SectionSpec::Kind::PlanePhi)
    throw std::invalid_argument("find_magnetic_axis: needs a plane section");

  TraceOptions o = opts;
  o.store_points = false;

  // return map on the section plane in (R, Z)
  auto return_map = [&](double R, double Z, double* time_out) {
    Vec3 p = to_cartesian({R, section.phi0, Z});
    auto evs = find_crossings(field, p, section, 1, 1e5, o);
    // first positive-direction crossing is the return (tracing starts on the plane)
    for (const auto& ev : evs) {
      CylPoint c = to_cylindrical(ev.point);
      if (time_out) *time_out = ev.t;
      return std::pair<double, double>{c.R, c.Z};
    }
    throw ConvergenceError("find_magnetic_axis: no return found within budget");
  };

  AxisResult res;
  CylPoint g = to_cylindrical(guess);
  double R = g.R, Z = g.Z;
  res.point = to_cartesian({R, section.phi0, Z});

  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    double T = 0.0;
    std::pair<double, double> F;
    try {
      F = return_map(R, Z, &T);
    } catch (const std::exception&) {
      res.converged = false;
      return res;
    }
    double fR = F.first - R, fZ = F.second - Z;
    res.residual = std::hypot(fR, fZ);
    res.return_time = T;
    res.point = to_cartesian({R, section.phi0, Z});
    if (res.residual < tol) {
      res.converged = true;
      return res;
    }
    // finite-difference Jacobian of the displacement map
    double h = 1e-7 * std::max(1.0, std::fabs(R));
    std::pair<double, double> FR, FZ;
    try {
      FR = return_map(R + h, Z, nullptr);
      FZ = return_map(R, Z + h, nullptr);
    } catch (const std::exception&) {
      res.converged = false;
      return res;
    }
    double j11 = (FR.first - (R + h) - fR) / h, j12 = (FZ.first - R - fR) / h;
    double j21 = (FR.second - Z - fZ) / h, j22 = (FZ.second - (Z + h) - fZ) / h;
    double det = j11 * j22 - j12 * j21;
    if (std::fabs(det) < 1e-14) {
      res.converged = false;
      return res;
    }
    double dR = (-fR * j22 + fZ * j12) / det;
    double dZ = (-j11 * fZ + j21 * fR) / det;
    // step damping against overshoot out of the domain
    double step = std::hypot(dR, dZ);
    double max_move = 0.2 * std::max(1.0, std::fabs(R));
    if (step > max_move) {
      dR *= max_move / step;
      dZ *= max_move / step;
    }
    R += dR;
    Z += dZ;
  }
  res.converged = false;
  return res;
}

Vec3 flow_vector_field(const std::function<Vec3(const Vec3&)>& f, const Vec3& start, double t,
                       const TraceOptions& opts) {
  double dir = (t >= 0.0) ? 1.0 : -1.0;
  double t_total = std::fabs(t);
  if (t_total == 0.0) return start;
  Dopri5 integ(f, start, dir, opts);
  while (integ.t() * dir < t_total) {
    double remaining = t_total - integ.t() * dir;
    if (!integ.step(remaining, opts.max_step))
      throw ConvergenceError("flow_vector_field: step-size underflow");
  }
  return integ.y();
}

}  // namespace fluxvol
