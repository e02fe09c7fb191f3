#include "nested_engine.hpp"

#include <cmath>

#include "liftlab/error.hpp"
#include "liftlab/mathutil.hpp"
#include "liftlab/rng.hpp"

namespace liftlab::detail {

Geometry::Geometry(const IndexedSets& s) : sets(&s) {
  lx = s.lx();
  ly = s.ly();
  n = s.n;
  m = s.m_dim;
  xn = s.x_norms;
  yn = s.y_norms;
  xn2.resize(xn.size());
  yn2.resize(yn.size());
  for (std::size_t i = 0; i < xn.size(); ++i) xn2[i] = xn[i] * xn[i];
  for (std::size_t i = 0; i < yn.size(); ++i) yn2[i] = yn[i] * yn[i];
  xgram = gram_matrix(s.X);
  ygram = gram_matrix(s.Y);
  // Pin the Gram diagonals to the squared cached norms so the bracket
  // (p|x||x'| - x'^T x) vanishes exactly on the diagonal at p = 1.
  for (int i = 0; i < lx; ++i)
    xgram(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = xn2[static_cast<std::size_t>(i)];
  for (int i = 0; i < ly; ++i)
    ygram(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = yn2[static_cast<std::size_t>(i)];
}

Matrix Geometry::bracket_x(double p_ref) const {
  Matrix b(static_cast<std::size_t>(lx), static_cast<std::size_t>(lx));
  for (int i = 0; i < lx; ++i)
    for (int p = 0; p < lx; ++p)
      b(static_cast<std::size_t>(i), static_cast<std::size_t>(p)) =
          p_ref * xn[static_cast<std::size_t>(i)] * xn[static_cast<std::size_t>(p)] -
          xgram(static_cast<std::size_t>(i), static_cast<std::size_t>(p));
  return b;
}

Matrix Geometry::bracket_y(double q_ref) const {
  Matrix b(static_cast<std::size_t>(ly), static_cast<std::size_t>(ly));
  for (int i = 0; i < ly; ++i)
    for (int p = 0; p < ly; ++p)
      b(static_cast<std::size_t>(i), static_cast<std::size_t>(p)) =
          q_ref * yn[static_cast<std::size_t>(i)] * yn[static_cast<std::size_t>(p)] -
          ygram(static_cast<std::size_t>(i), static_cast<std::size_t>(p));
  return b;
}

RunParams make_run_params(const LiftingSchedule& sched, const Geometry& geo, double beta,
                          double s, double t, const EstimatorConfig& config) {
  validate_config(config, sched);
  RunParams rp;
  rp.sched = &sched;
  rp.geo = &geo;
  rp.beta = beta;
  rp.s = s;
  rp.t = t;
  rp.master = config.seed;
  rp.n_outer = config.samples_per_level[0];
  rp.counts.assign(static_cast<std::size_t>(sched.r) + 1, 0);
  for (int k = 1; k <= sched.r; ++k) {
    // samples_per_level is outermost first; entry i counts draws of U_{r+1-i}.
    rp.counts[static_cast<std::size_t>(k)] =
        config.samples_per_level[static_cast<std::size_t>(sched.r + 1 - k)];
  }
  rp.replica_independent = config.replica_streams_independent;
  return rp;
}

std::uint64_t Walker::outer_node_key(std::uint64_t master, std::uint64_t outer_index) {
  return rng::key_combine(rng::key_combine(master, rng::kTagOuterNode), outer_index);
}

std::uint64_t Walker::child_key(std::uint64_t parent_key, int level, std::uint64_t index) {
  return rng::key_combine(
      rng::key_combine(rng::key_combine(parent_key, rng::kTagLevelNode),
                       static_cast<std::uint64_t>(level)),
      index);
}

std::uint64_t Walker::replica_key(std::uint64_t node_key, bool second) const {
  if (!rp_.replica_independent) return rng::key_combine(node_key, rng::kTagReplicaA);
  bool use_b = second;
  if (rp_.swap_replica_tags) use_b = !use_b;
  return rng::key_combine(node_key, use_b ? rng::kTagReplicaB : rng::kTagReplicaA);
}

Walker::Walker(const RunParams& rp) : rp_(rp), geo_(*rp.geo) {
  sqrt_t_ = std::sqrt(rp_.t);
  sqrt_1mt_ = std::sqrt(1.0 - rp_.t);
  skip_coupled_ = (rp_.t == 0.0);
  skip_decoupled_ = (rp_.t == 1.0);
  g_ = Matrix(static_cast<std::size_t>(geo_.m), static_cast<std::size_t>(geo_.n));
  g_proj_ = Matrix(static_cast<std::size_t>(geo_.lx), static_cast<std::size_t>(geo_.ly));
  outer_state_.yu2.assign(static_cast<std::size_t>(geo_.ly), 0.0);
  outer_state_.hx.assign(static_cast<std::size_t>(geo_.lx), 0.0);
  const std::size_t L = static_cast<std::size_t>(geo_.lx) * static_cast<std::size_t>(geo_.ly);
  bd0_.resize(L);
  log_c_.resize(static_cast<std::size_t>(geo_.lx));
  srow_.resize(static_cast<std::size_t>(geo_.lx));
  gamma_.resize(L);
  cond_.resize(static_cast<std::size_t>(geo_.ly));
  tmp_t_.resize(L);
  const std::size_t levels = rp_.counts.size();
  child_state_.resize(levels);
  lz_a_.resize(levels);
  sc_a_.resize(levels);
  sc_vals_.resize(levels);
  mc_a_.resize(levels);
  mc_vals_.resize(levels);
  bc_a_.resize(levels);
  bc_vals_.resize(levels);
  junction_a_.resize(L);
  junction_b_.resize(L);
}

void Walker::descend(int k, std::uint64_t node_key, const FieldState& parent, FieldState& out) {
  const LiftingSchedule& sched = *rp_.sched;
  draw_level_fields(node_key, sched.sd4, sched.sd2, sched.sdh, k, geo_.n, geo_.m, rp_.salts,
                    draw_, /*skip_u4=*/skip_coupled_, /*skip_u2h=*/skip_decoupled_);
  out.u4_sum = parent.u4_sum + draw_.u4;
  out.yu2.assign(static_cast<std::size_t>(geo_.ly), 0.0);
  out.hx.assign(static_cast<std::size_t>(geo_.lx), 0.0);
  if (!skip_decoupled_) {
    for (int i2 = 0; i2 < geo_.ly; ++i2) {
      const auto& y = geo_.sets->Y[static_cast<std::size_t>(i2)];
      double acc = 0.0;
      for (int j = 0; j < geo_.m; ++j) acc += y[static_cast<std::size_t>(j)] * draw_.u2[static_cast<std::size_t>(j)];
      out.yu2[static_cast<std::size_t>(i2)] = parent.yu2[static_cast<std::size_t>(i2)] + acc;
    }
    for (int i1 = 0; i1 < geo_.lx; ++i1) {
      const auto& x = geo_.sets->X[static_cast<std::size_t>(i1)];
      double acc = 0.0;
      for (int i = 0; i < geo_.n; ++i) acc += x[static_cast<std::size_t>(i)] * draw_.h[static_cast<std::size_t>(i)];
      out.hx[static_cast<std::size_t>(i1)] = parent.hx[static_cast<std::size_t>(i1)] + acc;
    }
  }
}

void Walker::begin_outer(std::uint64_t outer_index) {
  outer_key_ = outer_node_key(rp_.master, outer_index);
  FieldState zero;
  zero.u4_sum = 0.0;
  zero.yu2.assign(static_cast<std::size_t>(geo_.ly), 0.0);
  zero.hx.assign(static_cast<std::size_t>(geo_.lx), 0.0);
  descend(rp_.sched->r + 1, outer_key_, zero, outer_state_);

  if (!skip_coupled_) {
    draw_g_matrix(outer_key_, rp_.salts, g_);
    std::vector<double> gx(static_cast<std::size_t>(geo_.m));
    for (int i1 = 0; i1 < geo_.lx; ++i1) {
      const auto& x = geo_.sets->X[static_cast<std::size_t>(i1)];
      for (int j = 0; j < geo_.m; ++j) {
        double acc = 0.0;
        for (int i = 0; i < geo_.n; ++i) acc += g_(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) * x[static_cast<std::size_t>(i)];
        gx[static_cast<std::size_t>(j)] = acc;
      }
      for (int i2 = 0; i2 < geo_.ly; ++i2) {
        const auto& y = geo_.sets->Y[static_cast<std::size_t>(i2)];
        double acc = 0.0;
        for (int j = 0; j < geo_.m; ++j) acc += y[static_cast<std::size_t>(j)] * gx[static_cast<std::size_t>(j)];
        g_proj_(static_cast<std::size_t>(i1), static_cast<std::size_t>(i2)) = acc;
      }
    }
  }
}

void Walker::compute_beta_d0(const FieldState& state) {
  const int lx = geo_.lx;
  const int ly = geo_.ly;
  for (int i1 = 0; i1 < lx; ++i1) {
    const double xn = geo_.xn[static_cast<std::size_t>(i1)];
    const double hx = state.hx[static_cast<std::size_t>(i1)];
    double* row = bd0_.data() + static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly);
    for (int i2 = 0; i2 < ly; ++i2) {
      const double yn = geo_.yn[static_cast<std::size_t>(i2)];
      double v = 0.0;
      if (!skip_coupled_) {
        v += sqrt_t_ * (g_proj_(static_cast<std::size_t>(i1), static_cast<std::size_t>(i2)) +
                        xn * yn * state.u4_sum);
      }
      if (!skip_decoupled_) {
        v += sqrt_1mt_ * (xn * state.yu2[static_cast<std::size_t>(i2)] +
                          yn * hx);
      }
      row[i2] = rp_.beta * v;
    }
  }
}

double Walker::leaf_log_z(const FieldState& state) {
  compute_beta_d0(state);
  const int lx = geo_.lx;
  const int ly = geo_.ly;
  for (int i1 = 0; i1 < lx; ++i1) {
    log_c_[static_cast<std::size_t>(i1)] =
        logsumexp({bd0_.data() + static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly),
                   static_cast<std::size_t>(ly)});
    srow_[static_cast<std::size_t>(i1)] = rp_.s * log_c_[static_cast<std::size_t>(i1)];
  }
  const double log_z = logsumexp(srow_);
  if (!std::isfinite(log_z)) {
    fail(ErrorCode::kNonfiniteInput, "non-finite log Z at a leaf (exponent overflow?)");
  }
  return log_z;
}

double Walker::leaf_gamma0(const FieldState& state, std::span<double> gamma_out) {
  const double log_z = leaf_log_z(state);
  const int lx = geo_.lx;
  const int ly = geo_.ly;
  for (int i1 = 0; i1 < lx; ++i1) {
    const double row_log = rp_.s * log_c_[static_cast<std::size_t>(i1)] - log_z -
                           log_c_[static_cast<std::size_t>(i1)];
    const double* row = bd0_.data() + static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly);
    double* out = gamma_out.data() + static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly);
    for (int i2 = 0; i2 < ly; ++i2) out[i2] = std::exp(row_log + row[i2]);
  }
  return log_z;
}

double Walker::contract_pair(const double* ma, const double* mb, const Matrix& bx,
                             const Matrix& by) {
  const int lx = geo_.lx;
  const int ly = geo_.ly;
  // T = MA * by  (lx x ly), U = T * MB^T (lx x lx), value = sum bx .* U
  for (int i1 = 0; i1 < lx; ++i1) {
    for (int p2 = 0; p2 < ly; ++p2) {
      double acc = 0.0;
      for (int i2 = 0; i2 < ly; ++i2)
        acc += ma[static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly) + static_cast<std::size_t>(i2)] *
               by(static_cast<std::size_t>(i2), static_cast<std::size_t>(p2));
      tmp_t_[static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly) + static_cast<std::size_t>(p2)] = acc;
    }
  }
  double value = 0.0;
  for (int i1 = 0; i1 < lx; ++i1) {
    for (int p1 = 0; p1 < lx; ++p1) {
      double acc = 0.0;
      for (int p2 = 0; p2 < ly; ++p2)
        acc += tmp_t_[static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly) + static_cast<std::size_t>(p2)] *
               mb[static_cast<std::size_t>(p1) * static_cast<std::size_t>(ly) + static_cast<std::size_t>(p2)];
      value += bx(static_cast<std::size_t>(i1), static_cast<std::size_t>(p1)) * acc;
    }
  }
  return value;
}

double Walker::leaf_scalars(const FieldState& state, std::span<const ScalarObsSpec> obs,
                            std::span<double> out) {
  const double log_z = leaf_gamma0(state, gamma_);
  const int lx = geo_.lx;
  const int ly = geo_.ly;
  for (std::size_t oi = 0; oi < obs.size(); ++oi) {
    const ScalarObsSpec& spec = obs[oi];
    switch (spec.kind) {
      case LeafObs::kConstOne: {
        double acc = 0.0;
        for (std::size_t i = 0; i < gamma_.size(); ++i) acc += gamma_[i];
        out[oi] = acc;
        break;
      }
      case LeafObs::kXY2: {
        double acc = 0.0;
        for (int i1 = 0; i1 < lx; ++i1)
          for (int i2 = 0; i2 < ly; ++i2)
            acc += gamma_[static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly) + static_cast<std::size_t>(i2)] *
                   geo_.xn2[static_cast<std::size_t>(i1)] * geo_.yn2[static_cast<std::size_t>(i2)];
        out[oi] = acc;
        break;
      }
      case LeafObs::kXY2Cross: {
        // Row marginal times two conditional i2 replicas sharing i1.
        double acc = 0.0;
        for (int i1 = 0; i1 < lx; ++i1) {
          double rowp = 0.0;
          const double* grow = gamma_.data() + static_cast<std::size_t>(i1) * static_cast<std::size_t>(ly);
          for (int i2 = 0; i2 < ly; ++i2) rowp += grow[i2];
          if (rowp <= 0.0) continue;
          for (int i2 = 0; i2 < ly; ++i2) cond_[static_cast<std::size_t>(i2)] = grow[i2] / rowp;
          double mean_norm = 0.0;
          for (int i2 = 0; i2 < ly; ++i2) mean_norm += cond_[static_cast<std::size_t>(i2)] * geo_.yn[static_cast<std::size_t>(i2)];
          double quad = 0.0;
          for (int i2 = 0; i2 < ly; ++i2) {
            double inner = 0.0;
            for (int p2 = 0; p2 < ly; ++p2)
              inner += geo_.ygram(static_cast<std::size_t>(i2), static_cast<std::size_t>(p2)) * cond_[static_cast<std::size_t>(p2)];
            quad += cond_[static_cast<std::size_t>(i2)] * inner;
          }
          acc += rowp * geo_.xn2[static_cast<std::size_t>(i1)] *
                 (spec.q_ref * mean_norm * mean_norm - quad);
        }
        out[oi] = acc;
        break;
      }
      case LeafObs::kBracketCoupled: {
        const double v = contract_pair(gamma_.data(), gamma_.data(), *spec.bx, *spec.by);
        if (track_brackets_) {
          ++bracket_stats_.samples;
          if (v < 0.0) ++bracket_stats_.violations;
        }
        out[oi] = v;
        break;
      }
    }
  }
  return log_z;
}

double Walker::log_zeta(int k, std::uint64_t parent_key, const FieldState& state) {
  const std::uint64_t count = rp_.counts[static_cast<std::size_t>(k)];
  const double ratio = rp_.sched->exponent_ratio(k);
  std::vector<double>& a = lz_a_[static_cast<std::size_t>(k)];
  a.resize(count);
  FieldState& child = child_state_[static_cast<std::size_t>(k)];
  for (std::uint64_t j = 0; j < count; ++j) {
    const std::uint64_t key = child_key(parent_key, k, j);
    descend(k, key, state, child);
    const double inner = (k == 1) ? leaf_log_z(child) : log_zeta(k - 1, key, child);
    a[j] = ratio * inner;
  }
  return logmeanexp(a);
}

double Walker::scalar_chain(int k, std::uint64_t parent_key, const FieldState& state,
                            std::span<const ScalarObsSpec> obs, std::span<double> obs_out) {
  const std::uint64_t count = rp_.counts[static_cast<std::size_t>(k)];
  const double ratio = rp_.sched->exponent_ratio(k);
  const std::size_t P = obs.size();
  std::vector<double>& a = sc_a_[static_cast<std::size_t>(k)];
  std::vector<double>& vals = sc_vals_[static_cast<std::size_t>(k)];
  a.resize(count);
  vals.resize(count * P);
  FieldState& child = child_state_[static_cast<std::size_t>(k)];
  for (std::uint64_t j = 0; j < count; ++j) {
    const std::uint64_t key = child_key(parent_key, k, j);
    descend(k, key, state, child);
    double inner;
    if (k == 1) {
      inner = leaf_scalars(child, obs, {vals.data() + j * P, P});
    } else {
      inner = scalar_chain(k - 1, key, child, obs, {vals.data() + j * P, P});
    }
    a[j] = ratio * inner;
  }
  const double lse = logsumexp(a);
  for (std::size_t p = 0; p < P; ++p) obs_out[p] = 0.0;
  for (std::uint64_t j = 0; j < count; ++j) {
    const double w = std::exp(a[j] - lse);
    for (std::size_t p = 0; p < P; ++p) obs_out[p] += w * vals[j * P + p];
  }
  return lse - std::log(static_cast<double>(count));
}

double Walker::measure_chain(int k, std::uint64_t parent_key, const FieldState& state,
                             std::span<double> gamma_out) {
  const std::uint64_t count = rp_.counts[static_cast<std::size_t>(k)];
  const double ratio = rp_.sched->exponent_ratio(k);
  const std::size_t L = gamma_out.size();
  std::vector<double>& a = mc_a_[static_cast<std::size_t>(k)];
  std::vector<double>& vals = mc_vals_[static_cast<std::size_t>(k)];
  a.resize(count);
  vals.resize(count * L);
  FieldState& child = child_state_[static_cast<std::size_t>(k)];
  for (std::uint64_t j = 0; j < count; ++j) {
    const std::uint64_t key = child_key(parent_key, k, j);
    descend(k, key, state, child);
    double inner;
    if (k == 1) {
      inner = leaf_gamma0(child, {vals.data() + j * L, L});
    } else {
      inner = measure_chain(k - 1, key, child, {vals.data() + j * L, L});
    }
    a[j] = ratio * inner;
  }
  const double lse = logsumexp(a);
  for (std::size_t i = 0; i < L; ++i) gamma_out[i] = 0.0;
  for (std::uint64_t j = 0; j < count; ++j) {
    const double w = std::exp(a[j] - lse);
    for (std::size_t i = 0; i < L; ++i) gamma_out[i] += w * vals[j * L + i];
  }
  return lse - std::log(static_cast<double>(count));
}

double Walker::bracket_junction(int k, std::uint64_t node_key, const FieldState& state,
                                const Matrix& bx, const Matrix& by, double& log_zeta_sym) {
  const std::uint64_t key_a = replica_key(node_key, false);
  const std::uint64_t key_b = replica_key(node_key, true);
  const double lz_a = measure_chain(k, key_a, state, junction_a_);
  const double lz_b = measure_chain(k, key_b, state, junction_b_);
  log_zeta_sym = 0.5 * (lz_a + lz_b);
  const double v = contract_pair(junction_a_.data(), junction_b_.data(), bx, by);
  if (track_brackets_) {
    ++bracket_stats_.samples;
    if (v < 0.0) ++bracket_stats_.violations;
  }
  return v;
}

double Walker::bracket_chain(int k, int k1, std::uint64_t parent_key, const FieldState& state,
                             const Matrix& bx, const Matrix& by, double& value_out) {
  const std::uint64_t count = rp_.counts[static_cast<std::size_t>(k)];
  const double ratio = rp_.sched->exponent_ratio(k);
  std::vector<double>& a = bc_a_[static_cast<std::size_t>(k)];
  std::vector<double>& vals = bc_vals_[static_cast<std::size_t>(k)];
  a.resize(count);
  vals.resize(count);
  FieldState& child = child_state_[static_cast<std::size_t>(k)];
  for (std::uint64_t j = 0; j < count; ++j) {
    const std::uint64_t key = child_key(parent_key, k, j);
    descend(k, key, state, child);
    if (k == k1) {
      double lz_sym = 0.0;
      vals[j] = bracket_junction(k - 1, key, child, bx, by, lz_sym);
      a[j] = ratio * lz_sym;
    } else {
      double inner_val = 0.0;
      const double lz = bracket_chain(k - 1, k1, key, child, bx, by, inner_val);
      vals[j] = inner_val;
      a[j] = ratio * lz;
    }
  }
  const double lse = logsumexp(a);
  value_out = 0.0;
  for (std::uint64_t j = 0; j < count; ++j) {
    value_out += std::exp(a[j] - lse) * vals[j];
  }
  return lse - std::log(static_cast<double>(count));
}

}  // namespace liftlab::detail
