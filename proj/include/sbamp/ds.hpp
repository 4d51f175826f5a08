#pragma once

// Lyapunov-stable mixture-of-linear-systems controller. The vector field is
//   f(xi) = sum_k gamma_k(xi) (A_k xi + b_k)
// with Gaussian-posterior responsibilities gamma_k, each A_k + A_k^T
// negative definite with margin eps_stab, and b_k = -A_k * attractor so the
// active waypoint is a global equilibrium. Fitting recovers the
// responsibilities by EM on positions and the A_k by gradient descent on a
// stability-preserving parameterization, so every iterate is feasible.

#include <span>
#include <string>
#include <vector>

#include "sbamp/errors.hpp"
#include "sbamp/geometry.hpp"
#include "sbamp/planner.hpp"

namespace sbamp {
namespace ds {

struct LinearSubsystem {
  Mat2 A;  // 1/s
  Vec2 b;  // m/s
};

struct MixtureModel {
  std::vector<LinearSubsystem> components;
  std::vector<Vec2> means;        // responsibility Gaussian means
  std::vector<Mat2> covariances;  // SPD, m^2
  std::vector<double> priors;     // nonnegative, sums to 1
  Vec2 attractor;
  double eps_stab = 0.1;

  int k() const { return static_cast<int>(components.size()); }
  /// Validates the structural invariants (sizes, SPD covariances, prior
  /// normalization, stability margin, b_k = -A_k * attractor).
  void check_invariants() const;
};

struct Responsibilities {
  std::vector<double> weights;    // length K, nonnegative, sums to 1
  bool underflow_fallback = false;  // true when densities vanished and the
                                    // nearest-mean one-hot was used
};

Responsibilities responsibilities(const MixtureModel& model, const Vec2& xi);

/// Field evaluation sum_k gamma_k(xi) (A_k xi + b_k).
Vec2 evaluate(const MixtureModel& model, const Vec2& xi);

/// Recenter the attractor: b_k = -A_k * x; everything else unchanged.
MixtureModel shift_attractor(const MixtureModel& model, const Vec2& x);

struct DemoSample {
  Vec2 position;
  Vec2 velocity;
};

struct DemoDataset {
  std::vector<DemoSample> samples;
  double rate_hz = 0.0;
};

/// Spline the waypoints, sample every `sample_spacing` meters of arclength,
/// and emit (position, unit tangent * nominal_speed) pairs. The final sample
/// sits on the last waypoint with zero velocity (terminal attractor).
DemoDataset synthesize_demo(const WaypointPath& path, double nominal_speed,
                            double sample_spacing);

/// Unconstrained parameterization of a stable component:
///   A = S - (L L^T + eps_stab I),  S = [[0, s], [-s, 0]],  L lower-triangular,
/// which guarantees eig(A + A^T) <= -2 eps_stab at every iterate.
struct StableParam {
  double skew = 0.0;
  double l00 = 0.0, l10 = 0.0, l11 = 0.0;

  Mat2 to_matrix(double eps_stab) const;
  /// Recover parameters from a matrix already satisfying the margin; the
  /// symmetric part is clamped to the margin first, so any matrix yields a
  /// feasible starting point.
  static StableParam from_matrix(const Mat2& A, double eps_stab);
};

/// Weighted residual problem the A-step optimizes:
///   J(theta) = sum_n || v_n - sum_k w_nk A_k(theta_k) u_n ||^2
/// with u_n the sample offset from the attractor and w_nk fixed EM weights.
struct FitProblem {
  std::vector<Vec2> offsets;     // u_n
  std::vector<Vec2> velocities;  // v_n
  std::vector<double> weights;   // row-major n x k
  int k = 1;
  double eps_stab = 0.1;
};

double fit_objective(const FitProblem& problem, std::span<const StableParam> params);
void fit_gradient(const FitProblem& problem, std::span<const StableParam> params,
                  std::span<StableParam> grad);

struct FitConfig {
  int em_max_iterations = 60;
  double em_tol = 1e-9;
  double covariance_floor = 1e-3;
  double prune_prior = 1e-3;       // components below this prior are dropped
  int gd_max_iterations = 400;
  double gd_tol = 1e-10;
  const MixtureModel* warm_start = nullptr;  // previous model, optional
};

struct FitResult {
  MixtureModel model;
  int components_pruned = 0;
  double mean_squared_residual = 0.0;
  int gd_iterations = 0;
};

/// Fit a K-component model to the demonstration. Attractor is the last demo
/// position. Throws InvalidDataError on non-finite input or too few samples.
FitResult fit(const DemoDataset& data, int k, double eps_stab, const FitConfig& config = {});

std::string model_to_json(const MixtureModel& model);
MixtureModel model_from_json(const std::string& text);
void save_model(const MixtureModel& model, const std::string& path);
MixtureModel load_model(const std::string& path);

}  // namespace ds
}  // namespace sbamp
