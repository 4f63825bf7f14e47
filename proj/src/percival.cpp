#include "fluxvol/percival.hpp"

#include <Eigen/Dense>
#include <cstdlib>
#include <cstdio>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fluxvol/parallel.hpp"

namespace fluxvol {

FourierBasis2::FourierBasis2(int K1, int K2) : K1_(K1), K2_(K2) {
  if (K1 < 0 || K2 < 0) throw std::invalid_argument("FourierBasis2: negative cutoff");
  for (int m = 0; m <= K1; ++m) {
    int n_lo = (m == 0) ? 0 : -K2;
    for (int n = n_lo; n <= K2; ++n) {
      modes_.push_back({m, n, false});
      if (!(m == 0 && n == 0)) modes_.push_back({m, n, true});
    }
  }
}

double FourierBasis2::value(int p, double t1, double t2) const {
  const Mode& md = modes_[p];
  double a = kTwoPi * (md.m * t1 + md.n * t2);
  return md.sine ? std::sin(a) : std::cos(a);
}

double FourierBasis2::d1(int p, double t1, double t2) const {
  const Mode& md = modes_[p];
  double a = kTwoPi * (md.m * t1 + md.n * t2);
  double w = kTwoPi * md.m;
  return md.sine ? w * std::cos(a) : -w * std::sin(a);
}

double FourierBasis2::d2(int p, double t1, double t2) const {
  const Mode& md = modes_[p];
  double a = kTwoPi * (md.m * t1 + md.n * t2);
  double w = kTwoPi * md.n;
  return md.sine ? w * std::cos(a) : -w * std::sin(a);
}

int FourierBasis2::find(int m, int n, bool sine) const {
  for (int p = 0; p < size(); ++p) {
    const Mode& md = modes_[p];
    if (md.m == m && md.n == n && md.sine == sine) return p;
  }
  return -1;
}

TorusEmbedding::TorusEmbedding(int K1, int K2, int winding1, int winding2)
    : basis_(K1, K2), winding1_(winding1), winding2_(winding2) {
  coeffs_.assign(n_coeffs(), 0.0);
}

TorusEmbedding TorusEmbedding::circular_guess(double R_axis, double r, int K1, int K2) {
  TorusEmbedding emb(K1, K2, 1, 0);
  int c00 = emb.basis_.find(0, 0, false);
  int c01 = emb.basis_.find(0, 1, false);
  int s01 = emb.basis_.find(0, 1, true);
  emb.coeffs_[emb.offset_R() + c00] = R_axis;
  emb.coeffs_[emb.offset_R() + c01] = r;
  emb.coeffs_[emb.offset_Z() + s01] = -r;
  return emb;
}

TorusEmbedding::CylEval TorusEmbedding::eval_cyl(double t1, double t2) const {
  CylEval e{};
  e.phi = kTwoPi * (winding1_ * t1 + winding2_ * t2);
  e.phi1 = kTwoPi * winding1_;
  e.phi2 = kTwoPi * winding2_;
  const int nb = basis_.size();
  for (int p = 0; p < nb; ++p) {
    double v = basis_.value(p, t1, t2);
    double g1 = basis_.d1(p, t1, t2);
    double g2 = basis_.d2(p, t1, t2);
    double cR = coeffs_[offset_R() + p];
    double cZ = coeffs_[offset_Z() + p];
    double cL = coeffs_[offset_lambda() + p];
    e.R += cR * v;
    e.Z += cZ * v;
    e.phi += cL * v;
    e.R1 += cR * g1;
    e.R2 += cR * g2;
    e.Z1 += cZ * g1;
    e.Z2 += cZ * g2;
    e.phi1 += cL * g1;
    e.phi2 += cL * g2;
  }
  return e;
}

Vec3 TorusEmbedding::eval(double t1, double t2) const {
  CylEval e = eval_cyl(t1, t2);
  return {e.R * std::cos(e.phi), e.R * std::sin(e.phi), e.Z};
}

void TorusEmbedding::eval_with_derivs(double t1, double t2, Vec3* x, Vec3* d1, Vec3* d2) const {
  CylEval e = eval_cyl(t1, t2);
  double cp = std::cos(e.phi), sp = std::sin(e.phi);
  Vec3 eR{cp, sp, 0.0}, ephi{-sp, cp, 0.0};
  if (x) *x = Vec3{e.R * cp, e.R * sp, e.Z};
  if (d1) *d1 = e.R1 * eR + e.R * e.phi1 * ephi + Vec3{0, 0, e.Z1};
  if (d2) *d2 = e.R2 * eR + e.R * e.phi2 * ephi + Vec3{0, 0, e.Z2};
}

Vec3 TorusEmbedding::coeff_derivative(int q, double t1, double t2) const {
  CylEval e = eval_cyl(t1, t2);
  double cp = std::cos(e.phi), sp = std::sin(e.phi);
  Vec3 eR{cp, sp, 0.0}, ephi{-sp, cp, 0.0};
  const int nb = basis_.size();
  int block = q / nb, p = q % nb;
  double v = basis_.value(p, t1, t2);
  if (block == 0) return v * eR;                 // R coefficient
  if (block == 1) return Vec3{0, 0, v};          // Z coefficient
  return e.R * v * ephi;                         // lambda coefficient
}

double TorusEmbedding::mean_minor_radius(double R_axis, double Z_axis, int samples) const {
  double s = 0.0;
  for (int i = 0; i < samples; ++i)
    for (int j = 0; j < samples; ++j) {
      CylEval e = eval_cyl(static_cast<double>(i) / samples, static_cast<double>(j) / samples);
      s += std::hypot(e.R - R_axis, e.Z - Z_axis);
    }
  return s / (static_cast<double>(samples) * samples);
}

double eval_P(const FieldModel& field, const TorusEmbedding& x, const FrequencyVector& omega,
              int N, int M) {
  if (!field.has_vector_potential()) throw CapabilityError("eval_P: field has no vector potential");
  const std::size_t n = static_cast<std::size_t>(N) * M;
  std::vector<double> vals = parallel_map_indexed<double>(n, [&](std::size_t idx) {
    int i = static_cast<int>(idx) / M, j = static_cast<int>(idx) % M;
    double t1 = static_cast<double>(i) / N, t2 = static_cast<double>(j) / M;
    Vec3 p, d1, d2;
    x.eval_with_derivs(t1, t2, &p, &d1, &d2);
    Vec3 D = omega.w1 * d1 + omega.w2 * d2;
    return dot(field.eval_A(p), D);
  });
  return ordered_sum(vals) / static_cast<double>(n);
}

PercivalResult first_variation_residual(const FieldModel& field, const TorusEmbedding& x,
                                        const FrequencyVector& omega, int N, int M) {
  PercivalResult res;
  const std::size_t n = static_cast<std::size_t>(N) * M;
  struct Row {
    double c = 0.0;
    double r2 = 0.0;
  };
  std::vector<Row> rows = parallel_map_indexed<Row>(n, [&](std::size_t idx) {
    int i = static_cast<int>(idx) / M, j = static_cast<int>(idx) % M;
    double t1 = static_cast<double>(i) / N, t2 = static_cast<double>(j) / M;
    Vec3 p, d1, d2;
    x.eval_with_derivs(t1, t2, &p, &d1, &d2);
    Vec3 D = omega.w1 * d1 + omega.w2 * d2;
    Vec3 B = field.eval_B(p);
    double B2 = norm2(B);
    if (B2 < 1e-24)
      throw ConvergenceError("first_variation_residual: B vanishes on the embedding");
    Row row;
    row.c = dot(D, B) / B2;
    row.r2 = norm2(D - row.c * B);
    return row;
  });
  res.c_field.resize(n);
  double csum = 0.0, r2sum = 0.0;
  res.c_min = rows.front().c;
  res.c_max = rows.front().c;
  for (std::size_t k = 0; k < n; ++k) {
    res.c_field[k] = rows[k].c;
    csum += rows[k].c;
    r2sum += rows[k].r2;
    res.c_min = std::min(res.c_min, rows[k].c);
    res.c_max = std::max(res.c_max, rows[k].c);
  }
  res.c_bar = csum / static_cast<double>(n);
  res.residual = std::sqrt(r2sum / static_cast<double>(n));
  res.P = field.has_vector_potential() ? eval_P(field, x, omega, N, M)
                                       : std::numeric_limits<double>::quiet_NaN();
  return res;
}

double directional_dP(const FieldModel& field, const TorusEmbedding& x,
                      const FrequencyVector& omega, int N, int M,
                      const std::vector<double>& dcoeffs) {
  if (dcoeffs.size() != static_cast<std::size_t>(x.n_coeffs()))
    throw std::invalid_argument("directional_dP: wrong perturbation size");
  const std::size_t n = static_cast<std::size_t>(N) * M;
  const int nb = x.basis().size();
  std::vector<double> vals = parallel_map_indexed<double>(n, [&](std::size_t idx) {
    int i = static_cast<int>(idx) / M, j = static_cast<int>(idx) % M;
    double t1 = static_cast<double>(i) / N, t2 = static_cast<double>(j) / M;
    Vec3 p, d1, d2;
    x.eval_with_derivs(t1, t2, &p, &d1, &d2);
    Vec3 D = omega.w1 * d1 + omega.w2 * d2;
    Vec3 B = field.eval_B(p);
    Vec3 G = cross(D, B);
    // v(theta) = sum_q dq * dx/dq; assemble from the cylindrical frame
    TorusEmbedding::CylEval e = x.eval_cyl(t1, t2);
    double cp = std::cos(e.phi), sp = std::sin(e.phi);
    Vec3 eR{cp, sp, 0.0}, ephi{-sp, cp, 0.0}, eZ{0, 0, 1};
    double vR = 0.0, vZ = 0.0, vLam = 0.0;
    for (int pmode = 0; pmode < nb; ++pmode) {
      double bv = x.basis().value(pmode, t1, t2);
      vR += dcoeffs[x.offset_R() + pmode] * bv;
      vZ += dcoeffs[x.offset_Z() + pmode] * bv;
      vLam += dcoeffs[x.offset_lambda() + pmode] * bv;
    }
    Vec3 v = vR * eR + vZ * eZ + e.R * vLam * ephi;
    return dot(G, v);
  });
  return ordered_sum(vals) / static_cast<double>(n);
}

std::pair<double, double> flux_from_dP_domega(
    const FieldModel& field,
    const std::function<TorusEmbedding(const FrequencyVector&)>& stationary,
    const FrequencyVector& omega, double h, int N, int M) {
  auto P_at = [&](double w1, double w2) {
    FrequencyVector w(w1, w2);
    TorusEmbedding x = stationary(w);
    return eval_P(field, x, w, N, M);
  };
  double dP1 = (P_at(omega.w1 + h, omega.w2) - P_at(omega.w1 - h, omega.w2)) / (2.0 * h);
  double dP2 = (P_at(omega.w1, omega.w2 + h) - P_at(omega.w1, omega.w2 - h)) / (2.0 * h);
  return {dP1, dP2};
}

namespace {

struct GridPoint {
  Vec3 xp, d1, d2, B;
  Vec3 dB[3];  // columns of grad B (d B / d x_j)
  TorusEmbedding::CylEval cyl;
};

}  // namespace

SolveResult solve_stationary(const FieldModel& field, const FrequencyVector& omega,
                             const TorusEmbedding& init, const SolveOptions& opts) {
  SolveResult out;
  out.x = init;
  const int N = opts.N, M = opts.M;
  const std::size_t n_grid = static_cast<std::size_t>(N) * M;
  const int nb = init.basis().size();
  const int nc = init.n_coeffs();

  // pinned coefficients: lambda (0,0) cosine and R (0,1) sine
  int pin1 = init.offset_lambda() + init.basis().find(0, 0, false);
  int pin2 = init.offset_R() + init.basis().find(0, 1, true);
  std::vector<int> free_of;  // free-index -> coefficient index
  for (int q = 0; q < nc; ++q)
    if (q != pin1 && q != pin2) free_of.push_back(q);
  const int nf = static_cast<int>(free_of.size());

  auto residual_norm = [&](const Eigen::VectorXd& r) {
    return std::sqrt(r.squaredNorm() / static_cast<double>(3 * n_grid));
  };

  auto eval_grid = [&](const TorusEmbedding& emb, std::vector<GridPoint>& grid,
                       Eigen::VectorXd& r) {
    grid = parallel_map_indexed<GridPoint>(n_grid, [&](std::size_t idx) {
      int i = static_cast<int>(idx) / M, j = static_cast<int>(idx) % M;
      double t1 = static_cast<double>(i) / N, t2 = static_cast<double>(j) / M;
      GridPoint g;
      g.cyl = emb.eval_cyl(t1, t2);
      emb.eval_with_derivs(t1, t2, &g.xp, &g.d1, &g.d2);
      g.B = field.eval_B(g.xp);
      double h = opts.fd_jacobian_step;
      const Vec3 ex{h, 0, 0}, ey{0, h, 0}, ez{0, 0, h};
      g.dB[0] = (field.eval_B(g.xp + ex) - field.eval_B(g.xp - ex)) / (2 * h);
      g.dB[1] = (field.eval_B(g.xp + ey) - field.eval_B(g.xp - ey)) / (2 * h);
      g.dB[2] = (field.eval_B(g.xp + ez) - field.eval_B(g.xp - ez)) / (2 * h);
      return g;
    });
    r.resize(3 * n_grid);
    for (std::size_t k = 0; k < n_grid; ++k) {
      const GridPoint& g = grid[k];
      Vec3 D = omega.w1 * g.d1 + omega.w2 * g.d2;
      double B2 = norm2(g.B);
      double c = dot(D, g.B) / B2;
      Vec3 resid = D - c * g.B;
      r[3 * k + 0] = resid.x;
      r[3 * k + 1] = resid.y;
      r[3 * k + 2] = resid.z;
    }
  };

  std::vector<GridPoint> grid;
  Eigen::VectorXd r;
  eval_grid(out.x, grid, r);
  double rnorm = residual_norm(r);
  double lm = opts.lm_lambda;
  const bool verbose = std::getenv("FLUXVOL_SOLVE_VERBOSE") != nullptr;

  // residual rows plus one gauge row per grid point: the reparametrization
  // freedom moves the embedding along the flow direction, a curved manifold
  // on which Newton steps stall; the gauge rows pin steps transverse to it
  const double gauge_weight = 10.0;
  Eigen::MatrixXd J(4 * n_grid, nf);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    out.iterations = iter;
    if (rnorm < opts.target_residual) {
      out.converged = true;
      break;
    }

    // Jacobian: rows filled per grid point in parallel
    std::vector<char> dummy = parallel_map_indexed<char>(n_grid, [&](std::size_t k) {
      int i = static_cast<int>(k) / M, j = static_cast<int>(k) % M;
      double t1 = static_cast<double>(i) / N, t2 = static_cast<double>(j) / M;
      const GridPoint& g = grid[k];
      const auto& e = g.cyl;
      double cp = std::cos(e.phi), sp = std::sin(e.phi);
      Vec3 eR{cp, sp, 0.0}, ephi{-sp, cp, 0.0}, eZ{0, 0, 1};
      Vec3 D = omega.w1 * g.d1 + omega.w2 * g.d2;
      double B2 = norm2(g.B);
      double c = dot(D, g.B) / B2;
      double wphi = omega.w1 * e.phi1 + omega.w2 * e.phi2;
      double wR = omega.w1 * e.R1 + omega.w2 * e.R2;
      Vec3 Dhat = D / std::max(norm(D), 1e-30);
      for (int f = 0; f < nf; ++f) {
        int q = free_of[f];
        int block = q / nb, pmode = q % nb;
        double bv = out.x.basis().value(pmode, t1, t2);
        double b1 = out.x.basis().d1(pmode, t1, t2);
        double b2 = out.x.basis().d2(pmode, t1, t2);
        double wb = omega.w1 * b1 + omega.w2 * b2;
        Vec3 dx, dD;
        if (block == 0) {  // R coefficient
          dx = bv * eR;
          dD = wb * eR + bv * wphi * ephi;
        } else if (block == 1) {  // Z coefficient
          dx = bv * eZ;
          dD = wb * eZ;
        } else {  // lambda coefficient
          dx = e.R * bv * ephi;
          dD = (bv * wR + e.R * wb) * ephi - e.R * wphi * bv * eR;
        }
        Vec3 dBdx = g.dB[0] * dx.x + g.dB[1] * dx.y + g.dB[2] * dx.z;
        double dc = (dot(dD, g.B) + dot(D, dBdx)) / B2 - 2.0 * c * dot(g.B, dBdx) / B2;
        Vec3 dr = dD - dc * g.B - c * dBdx;
        J(3 * k + 0, f) = dr.x;
        J(3 * k + 1, f) = dr.y;
        J(3 * k + 2, f) = dr.z;
        J(3 * n_grid + k, f) = gauge_weight * dot(Dhat, dx);
      }
      return char(0);
    });
    (void)dummy;

    // Levenberg step in the singular basis: step = V diag(s/(s^2+lm^2)) U^T (-r).
    // Absolute damping suppresses the weak directions (the reparametrization
    // gauge freedom and modes beyond the solution's spectrum) in proportion
    // to their weakness while leaving the strong subspace Newton-like; one
    // decomposition serves every damping retry.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sig = svd.singularValues();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(4 * n_grid);
    rhs.head(3 * n_grid) = -r;  // the gauge rows drive the step, not the residual
    Eigen::VectorXd c = svd.matrixU().transpose() * rhs;
    double sig_max = sig.size() ? sig[0] : 1.0;

    bool stepped = false;
    for (int attempt = 0; attempt < 18; ++attempt) {
      Eigen::VectorXd damped(sig.size());
      for (int i = 0; i < sig.size(); ++i)
        damped[i] = sig[i] * c[i] / (sig[i] * sig[i] + lm * lm);
      Eigen::VectorXd step = svd.matrixV() * damped;
      TorusEmbedding trial = out.x;
      for (int f = 0; f < nf; ++f) trial.coeffs()[free_of[f]] += step[f];
      std::vector<GridPoint> trial_grid;
      Eigen::VectorXd trial_r;
      double trial_norm;
      try {
        eval_grid(trial, trial_grid, trial_r);
        trial_norm = residual_norm(trial_r);
      } catch (const DomainError&) {
        trial_norm = std::numeric_limits<double>::infinity();  // step left the field domain
      }
      if (trial_norm < rnorm) {
        out.x = std::move(trial);
        grid = std::move(trial_grid);
        r = std::move(trial_r);
        rnorm = trial_norm;
        lm = std::max(lm * 0.25, 1e-13 * sig_max);
        stepped = true;
        break;
      }
      lm = std::min(lm * 8.0, 1e3 * sig_max);
    }
    if (verbose)
      std::fprintf(stderr, "  solve iter %3d  residual %.3e  lm %.2e%s\n", iter, rnorm, lm,
                   stepped ? "" : "  (plateau)");
    if (!stepped) break;  // residual plateau; report without claiming convergence
  }
  if (rnorm < opts.target_residual) out.converged = true;
  out.result = first_variation_residual(field, out.x, omega, N, M);
  return out;
}

}  // namespace fluxvol
