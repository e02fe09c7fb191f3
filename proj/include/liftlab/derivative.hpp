#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftlab/gibbs.hpp"
#include "liftlab/ladder.hpp"
#include "liftlab/schedule.hpp"
#include "liftlab/sets.hpp"

namespace liftlab {

// Closed-form derivative split into its phi terms:
//   dpsi/dt = sign(s) beta / (2 sqrt(n)) * (sum_k1 phi[k1] + phi01 + phi02).
// phi/phi_se are indexed k1 = 1..r+1 (slot 0 unused). The identity above
// holds exactly over the stored fields.
struct PhiBreakdown {
  std::vector<double> phi;
  std::vector<double> phi_se;
  double phi01 = 0.0, phi01_se = 0.0;
  double phi02 = 0.0, phi02_se = 0.0;
  double dpsi_dt = 0.0;
  double dpsi_dt_se = 0.0;
  std::uint64_t n_outer = 0;
  std::uint64_t bracket_samples = 0;
  std::uint64_t bracket_violations = 0;
};

// Hidden hooks for harness mutation tests: flipping either sign corrupts the
// closed form so verify_derivative must fail.
struct DerivativeDebug {
  bool flip_phi_sign = false;    // phi_{k1} family coefficients
  bool flip_phi02_sign = false;  // the phi02 boundary coefficient
};

// Evaluates every phi term of the closed form by gibbs_average with the
// matching observable and coupling level. Terms with an exactly zero
// coefficient (p0 = q0 = 1 boundary terms, m_{k1-1} = m_{k1}) are not
// evaluated.
PhiBreakdown phi_terms(const LiftingSchedule& schedule, const IndexedSets& sets, double beta,
                       double s, double t, const EstimatorConfig& config, int threads = 0,
                       const DerivativeDebug* debug = nullptr);

// Independent straight-line implementations of the first- and second-level
// specializations. They reuse only the environment draw primitives (same
// seed addressing), so they agree with phi_terms to reduction-order accuracy
// on identical seed trees.
PhiBreakdown dpsi_dt_r1_explicit(const LiftingSchedule& schedule, const IndexedSets& sets,
                                 double beta, double s, double t,
                                 const EstimatorConfig& config, int threads = 0);
PhiBreakdown dpsi_dt_r2_explicit(const LiftingSchedule& schedule, const IndexedSets& sets,
                                 double beta, double s, double t,
                                 const EstimatorConfig& config, int threads = 0);

// Central-difference oracle (psi(t+h) - psi(t-h)) / 2h with common random
// numbers; the std error comes from the per-outer paired differences.
Estimate fd_derivative(const LiftingSchedule& schedule, const IndexedSets& sets, double beta,
                       double s, double t, const EstimatorConfig& config, int threads = 0);

struct VerificationReport {
  double beta = 0.0, s = 0.0, t = 0.0, fd_step = 0.0;
  std::uint64_t seed = 0;
  int r = 0;
  PhiBreakdown closed;
  Estimate fd;
  Estimate fd_coarse;               // second FD step used for the curvature term
  double difference = 0.0;          // closed - fd
  double combined_std_error = 0.0;  // sd of per-outer paired differences
  double curvature_estimate = 0.0;  // |fd - fd_coarse| / 3  (~ c h^2)
  bool pass = false;
  std::vector<int> sign_ok;  // per k1: 1 ok, 0 violated, -1 not applicable
  double wall_ms_closed = 0.0;
  double wall_ms_fd = 0.0;

  std::string to_json_string() const;
};

// Compares the closed-form derivative against the FD oracle on a shared seed
// tree. PASS iff |difference| <= 3 * combined_std_error + curvature_estimate.
VerificationReport verify_derivative(const LiftingSchedule& schedule, const IndexedSets& sets,
                                     double beta, double s, double t,
                                     const EstimatorConfig& config, int threads = 0,
                                     const DerivativeDebug* debug = nullptr);

}  // namespace liftlab
