// Loop-average functional on Fourier-represented torus embeddings: value,
// first-variation residual, flux extraction from the omega-derivative, and a
// Gauss-Newton stationary solve.
#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fluxvol/field.hpp"

namespace fluxvol {

struct FrequencyVector {
  double w1 = 1.0, w2 = 0.0;
  FrequencyVector() = default;
  FrequencyVector(double w1_, double w2_) : w1(w1_), w2(w2_) {
    if (w1 == 0.0 && w2 == 0.0)
      throw std::invalid_argument("FrequencyVector: omega must be nonzero");
  }
  double iota() const { return w2 / w1; }
};

// Real 2D Fourier basis with cutoffs K1 (theta1) and K2 (theta2): modes
// cos/sin(2 pi (m theta1 + n theta2)) over the half-plane m > 0 or
// (m == 0, n >= 0), excluding the (0,0) sine.
class FourierBasis2 {
 public:
  FourierBasis2() = default;
  FourierBasis2(int K1, int K2);

  struct Mode {
    int m = 0, n = 0;
    bool sine = false;
  };

  int size() const { return static_cast<int>(modes_.size()); }
  const Mode& mode(int p) const { return modes_[p]; }
  int K1() const { return K1_; }
  int K2() const { return K2_; }

  double value(int p, double t1, double t2) const;
  double d1(int p, double t1, double t2) const;
  double d2(int p, double t1, double t2) const;

  // index of the given mode, -1 if absent
  int find(int m, int n, bool sine) const;

 private:
  int K1_ = 0, K2_ = 0;
  std::vector<Mode> modes_;
};

// Torus embedding in cylindrical form: R and Z are double-periodic Fourier
// series; the geometric toroidal angle is phi = 2 pi (w1 theta1 + w2 theta2)
// plus a double-periodic correction lambda. The configured integer winding
// (w1, w2) carries the homology class in phi; the poloidal winding is carried
// by the (R, Z) curve encircling the axis once per unit theta2.
class TorusEmbedding {
 public:
  TorusEmbedding() = default;
  TorusEmbedding(int K1, int K2, int winding1 = 1, int winding2 = 0);

  static TorusEmbedding circular_guess(double R_axis, double r, int K1, int K2);

  const FourierBasis2& basis() const { return basis_; }
  int n_coeffs() const { return 3 * basis_.size(); }
  std::vector<double>& coeffs() { return coeffs_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  int winding1() const { return winding1_; }
  int winding2() const { return winding2_; }

  // blocks in the coefficient vector
  int offset_R() const { return 0; }
  int offset_Z() const { return basis_.size(); }
  int offset_lambda() const { return 2 * basis_.size(); }

  Vec3 eval(double t1, double t2) const;
  void eval_with_derivs(double t1, double t2, Vec3* x, Vec3* d1, Vec3* d2) const;

  // derivative of the embedding point with respect to one coefficient
  Vec3 coeff_derivative(int q, double t1, double t2) const;

  // cylindrical scalar fields at a parameter point
  struct CylEval {
    double R, Z, phi;
    double R1, R2, Z1, Z2, phi1, phi2;  // partials along theta1, theta2
  };
  CylEval eval_cyl(double t1, double t2) const;

  // mean minor radius about (R_axis, Z_axis), sampled on a grid
  double mean_minor_radius(double R_axis, double Z_axis, int samples = 32) const;

 private:
  FourierBasis2 basis_;
  std::vector<double> coeffs_;
  int winding1_ = 1, winding2_ = 0;
};

struct PercivalResult {
  double P = 0.0;             // functional value (NaN when A is unavailable)
  double residual = 0.0;      // L2 norm of the parallelism defect over the grid
  std::vector<double> c_field;  // c(theta) on the evaluation grid, row-major
  double c_bar = 0.0;
  double c_min = 0.0, c_max = 0.0;
};

// Spectral quadrature of A(x(theta)) . (d1 w1 + d2 w2) over the unit torus.
double eval_P(const FieldModel& field, const TorusEmbedding& x, const FrequencyVector& omega,
              int N, int M);

// Euler-Lagrange defect: D = d1 w1 + d2 w2, c = D.B/|B|^2 pointwise,
// residual = sqrt(mean |D - c B|^2). Fills P when A is available.
PercivalResult first_variation_residual(const FieldModel& field, const TorusEmbedding& x,
                                        const FrequencyVector& omega, int N, int M);

// Directional derivative of eval_P along a coefficient direction, from the
// integrated-by-parts form int (D x B) . v d2theta.
double directional_dP(const FieldModel& field, const TorusEmbedding& x,
                      const FrequencyVector& omega, int N, int M,
                      const std::vector<double>& dcoeffs);

// Central differences of the stationary value of P with respect to omega.
// stationary maps a frequency vector to a stationary embedding.
std::pair<double, double> flux_from_dP_domega(
    const FieldModel& field, const std::function<TorusEmbedding(const FrequencyVector&)>& stationary,
    const FrequencyVector& omega, double h, int N, int M);

struct SolveOptions {
  int N = 64, M = 64;          // residual grid
  int max_iterations = 60;
  double target_residual = 1e-8;
  double lm_lambda = 1e-8;     // initial Levenberg damping
  double fd_jacobian_step = 1e-6;  // for grad B at grid points
};

struct SolveResult {
  TorusEmbedding x;
  PercivalResult result;
  bool converged = false;
  int iterations = 0;
};

// Gauss-Newton (Levenberg-damped) solve of D(theta) = c(theta) B(x(theta))
// over the Fourier coefficients, with two pinned coefficients fixing the
// angle phases: the lambda constant mode (toroidal phase) and the R (0,1)
// sine mode (poloidal phase).
SolveResult solve_stationary(const FieldModel& field, const FrequencyVector& omega,
                             const TorusEmbedding& init, const SolveOptions& opts = {});

}  // namespace fluxvol
