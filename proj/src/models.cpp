#include "liftlab/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "liftlab/error.hpp"
#include "liftlab/mathutil.hpp"
#include "liftlab/rng.hpp"

namespace liftlab {

namespace {

constexpr int kEnumCap = 20;

void check_enum_size(int n) {
  if (n < 1) fail(ErrorCode::kInvalidParams, "n must be >= 1");
  if (n > kEnumCap) {
    fail(ErrorCode::kSetTooLarge,
         "n = " + std::to_string(n) + " exceeds the 2^n enumeration cap of " +
             std::to_string(kEnumCap));
  }
}

// Visits all 2^n sign patterns of x in {-1/sqrt(n), 1/sqrt(n)}^n by Gray
// code, maintaining v = Gx incrementally, and reports min/max of fn(v).
template <typename Fn>
void enumerate_hypercube(const Matrix& g, Fn&& fn, double& vmin, double& vmax) {
  const int m = static_cast<int>(g.rows());
  const int n = static_cast<int>(g.cols());
  check_enum_size(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> v(static_cast<std::size_t>(m), 0.0);
  std::vector<double> sign(static_cast<std::size_t>(n), 1.0);
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int b = 0; b < n; ++b) acc += g(static_cast<std::size_t>(j), static_cast<std::size_t>(b));
    v[static_cast<std::size_t>(j)] = acc * scale;
  }
  vmin = vmax = fn(v);
  const std::uint64_t total = 1ull << n;
  for (std::uint64_t i = 1; i < total; ++i) {
    const int b = std::countr_zero(i);
    const double delta = -2.0 * sign[static_cast<std::size_t>(b)] * scale;
    sign[static_cast<std::size_t>(b)] = -sign[static_cast<std::size_t>(b)];
    for (int j = 0; j < m; ++j)
      v[static_cast<std::size_t>(j)] += delta * g(static_cast<std::size_t>(j), static_cast<std::size_t>(b));
    const double val = fn(v);
    vmin = std::min(vmin, val);
    vmax = std::max(vmax, val);
  }
}

double l2_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double l1_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += std::fabs(x);
  return acc;
}

double pos_l2_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v)
    if (x > 0.0) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

ModelInstance ModelInstance::make(ModelKind kind, int n, int m_dim, std::uint64_t seed) {
  if (n < 1 || m_dim < 1) fail(ErrorCode::kInvalidParams, "n and m_dim must be >= 1");
  ModelInstance inst;
  inst.kind = kind;
  inst.n = n;
  inst.m_dim = m_dim;
  inst.alpha = static_cast<double>(m_dim) / static_cast<double>(n);
  inst.G = Matrix(static_cast<std::size_t>(m_dim), static_cast<std::size_t>(n));
  const std::uint64_t key = rng::key_combine(rng::key_combine(seed, rng::kTagInstance),
                                             rng::kTagCompG);
  for (std::size_t c = 0; c < inst.G.size(); ++c)
    inst.G.data()[c] = rng::std_normal(key, static_cast<std::uint64_t>(c));
  return inst;
}

double ModelInstance::ground_state() const {
  switch (kind) {
    case ModelKind::kHopfieldPos: return hopfield_ground_state(G, GroundStateSign::kPos);
    case ModelKind::kHopfieldNeg: return hopfield_ground_state(G, GroundStateSign::kNeg);
    case ModelKind::kLittlePos: return little_ground_state(G, GroundStateSign::kPos);
    case ModelKind::kLittleNeg: return little_ground_state(G, GroundStateSign::kNeg);
    case ModelKind::kPercSpherical:
      return perceptron_minmax(G, PercDomain::kSphereAnalytic).value;
    case ModelKind::kPercBinary: return perceptron_minmax(G, PercDomain::kBinary).value;
  }
  fail(ErrorCode::kInvalidParams, "unknown model kind");
}

std::vector<std::vector<double>> hypercube_set(int n) {
  check_enum_size(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const std::uint64_t total = 1ull << n;
  std::vector<std::vector<double>> out;
  out.reserve(total);
  for (std::uint64_t i = 0; i < total; ++i) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
      v[static_cast<std::size_t>(b)] = ((i >> b) & 1ull) ? scale : -scale;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<double>> sphere_set(int dim, int count, bool positive_orthant,
                                            std::uint64_t seed) {
  if (dim < 1 || count < 1) fail(ErrorCode::kInvalidParams, "dim and count must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t key =
        rng::key_combine(rng::key_combine(seed, rng::kTagInstance), static_cast<std::uint64_t>(i));
    std::vector<double> v(static_cast<std::size_t>(dim));
    double nrm = 0.0;
    for (int d = 0; d < dim; ++d) {
      v[static_cast<std::size_t>(d)] = rng::std_normal(key, static_cast<std::uint64_t>(d));
      nrm += v[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
    }
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) nrm = 1.0;
    for (double& x : v) {
      x /= nrm;
      if (positive_orthant) x = std::fabs(x);
    }
    out.push_back(std::move(v));
  }
  return out;
}

double hopfield_ground_state(const Matrix& g, GroundStateSign sign) {
  const double root_n = std::sqrt(static_cast<double>(g.cols()));
  double vmin = 0.0, vmax = 0.0;
  enumerate_hypercube(g, [](const std::vector<double>& v) { return l2_norm(v); }, vmin, vmax);
  return (sign == GroundStateSign::kPos ? vmax : vmin) / root_n;
}

double little_ground_state(const Matrix& g, GroundStateSign sign) {
  const double denom = std::sqrt(static_cast<double>(g.cols())) *
                       std::sqrt(static_cast<double>(g.rows()));
  double vmin = 0.0, vmax = 0.0;
  enumerate_hypercube(g, [](const std::vector<double>& v) { return l1_norm(v); }, vmin, vmax);
  // The max over y in {+-1/sqrt(m)}^m of y^T v equals |v|_1 / sqrt(m).
  return (sign == GroundStateSign::kPos ? vmax : vmin) / denom;
}

PercResult perceptron_minmax(const Matrix& g, PercDomain domain, std::uint64_t seed) {
  const int m = static_cast<int>(g.rows());
  const int n = static_cast<int>(g.cols());
  const double root_n = std::sqrt(static_cast<double>(n));
  if (domain == PercDomain::kBinary) {
    double vmin = 0.0, vmax = 0.0;
    enumerate_hypercube(g, [](const std::vector<double>& v) { return pos_l2_norm(v); }, vmin,
                        vmax);
    return PercResult{vmin / root_n, false};
  }

  // Multi-start projected subgradient descent for min over the unit sphere of
  // |(Gx)_+|_2. Non-convex; results carry the heuristic flag.
  const int starts = 48;
  const int iters = 400;
  double best = HUGE_VAL;
  std::vector<double> x(static_cast<std::size_t>(n)), gx(static_cast<std::size_t>(m)),
      grad(static_cast<std::size_t>(n));
  for (int sidx = 0; sidx < starts; ++sidx) {
    const std::uint64_t key =
        rng::key_combine(rng::key_combine(seed, rng::kTagInstance), static_cast<std::uint64_t>(sidx));
    double nrm = 0.0;
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = rng::std_normal(key, static_cast<std::uint64_t>(i));
      nrm += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    }
    nrm = std::sqrt(nrm);
    for (double& c : x) c /= nrm;

    for (int it = 0; it < iters; ++it) {
      double f = 0.0;
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += g(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) * x[static_cast<std::size_t>(i)];
        gx[static_cast<std::size_t>(j)] = acc;
        if (acc > 0.0) f += acc * acc;
      }
      f = std::sqrt(f);
      if (f == 0.0) break;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          if (gx[static_cast<std::size_t>(j)] > 0.0)
            acc += g(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) * gx[static_cast<std::size_t>(j)];
        }
        grad[static_cast<std::size_t>(i)] = acc / f;
      }
      const double step = 0.5 / (1.0 + 0.05 * it);
      double nn = 0.0;
      for (int i = 0; i < n; ++i) {
        x[static_cast<std::size_t>(i)] -= step * grad[static_cast<std::size_t>(i)];
        nn += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      }
      nn = std::sqrt(nn);
      if (nn == 0.0) break;
      for (double& c : x) c /= nn;
    }
    double f = 0.0;
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += g(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) * x[static_cast<std::size_t>(i)];
      if (acc > 0.0) f += acc * acc;
    }
    best = std::min(best, std::sqrt(f));
    if (best == 0.0) break;
  }
  return PercResult{best / root_n, true};
}

std::vector<GroundStateRow> beta_sweep_ground_state(const IndexedSets& sets,
                                                    const std::vector<double>& betas,
                                                    const SweepConfig& config) {
  if (config.s == 0.0) fail(ErrorCode::kInvalidParams, "s must be nonzero");
  if (config.instances < 1) fail(ErrorCode::kInvalidParams, "instances must be >= 1");
  const int n = sets.n;
  const int m = sets.m_dim;
  const int lx = sets.lx();
  const int ly = sets.ly();
  const double root_n = std::sqrt(static_cast<double>(n));
  const double abs_s = std::fabs(config.s);

  std::vector<GroundStateRow> rows;
  for (int inst = 0; inst < config.instances; ++inst) {
    const std::uint64_t inst_seed =
        rng::key_combine(rng::key_combine(config.seed, rng::kTagInstance),
                         static_cast<std::uint64_t>(inst));
    Matrix g(static_cast<std::size_t>(m), static_cast<std::size_t>(n));
    {
      const std::uint64_t gkey = rng::key_combine(inst_seed, rng::kTagCompG);
      for (std::size_t c = 0; c < g.size(); ++c)
        g.data()[c] = rng::std_normal(gkey, static_cast<std::uint64_t>(c));
    }
    double u4 = 0.0;
    if (!config.zero_external_field && config.p0q0 > 0.0) {
      const std::uint64_t ukey = rng::key_combine(inst_seed, rng::kTagCompU4);
      u4 = std::sqrt(config.p0q0) * rng::std_normal(ukey, 0);
    }

    // D0 at t = 1 over the finite sets.
    Matrix d0(static_cast<std::size_t>(lx), static_cast<std::size_t>(ly));
    std::vector<double> gx(static_cast<std::size_t>(m));
    for (int i1 = 0; i1 < lx; ++i1) {
      const auto& x = sets.X[static_cast<std::size_t>(i1)];
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += g(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) * x[static_cast<std::size_t>(i)];
        gx[static_cast<std::size_t>(j)] = acc;
      }
      for (int i2 = 0; i2 < ly; ++i2) {
        const auto& y = sets.Y[static_cast<std::size_t>(i2)];
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += y[static_cast<std::size_t>(j)] * gx[static_cast<std::size_t>(j)];
        d0(static_cast<std::size_t>(i1), static_cast<std::size_t>(i2)) =
            acc + sets.x_norms[static_cast<std::size_t>(i1)] *
                      sets.y_norms[static_cast<std::size_t>(i2)] * u4;
      }
    }
    double max_pair = d0(0, 0);
    for (std::size_t c = 0; c < d0.size(); ++c) max_pair = std::max(max_pair, d0.data()[c]);

    std::string model;
    double target = 0.0;
    switch (config.target) {
      case SweepTarget::kSphere:
        model = "hopfield_pos";
        target = hopfield_ground_state(g, GroundStateSign::kPos);
        break;
      case SweepTarget::kSpherePos: {
        model = "hypercube_sphere_pos";
        double vmin = 0.0, vmax = 0.0;
        enumerate_hypercube(g, [](const std::vector<double>& v) { return pos_l2_norm(v); },
                            vmin, vmax);
        target = vmax / root_n;
        break;
      }
      case SweepTarget::kHypercubeY:
        model = "little_pos";
        target = little_ground_state(g, GroundStateSign::kPos);
        break;
    }

    for (double beta : betas) {
      if (!(beta > 0.0)) fail(ErrorCode::kInvalidParams, "beta values must be positive");
      std::vector<double> row_lse(static_cast<std::size_t>(lx));
      std::vector<double> scaled(static_cast<std::size_t>(ly));
      for (int i1 = 0; i1 < lx; ++i1) {
        for (int i2 = 0; i2 < ly; ++i2)
          scaled[static_cast<std::size_t>(i2)] =
              beta * d0(static_cast<std::size_t>(i1), static_cast<std::size_t>(i2));
        row_lse[static_cast<std::size_t>(i1)] = config.s * logsumexp(scaled);
      }
      const double log_z = logsumexp(row_lse);
      GroundStateRow row;
      row.model = model;
      row.n = n;
      row.m_dim = m;
      row.alpha = static_cast<double>(m) / static_cast<double>(n);
      row.beta = beta;
      row.estimate = log_z / (beta * abs_s * root_n);
      row.target = target;
      row.gap = row.estimate - row.target;
      row.envelope = std::log(static_cast<double>(lx) * static_cast<double>(ly)) / (beta * root_n);
      row.sampled_max = max_pair / root_n;
      row.seed = inst_seed;
      if (config.s == 1.0) {
        row.sandwich_ok = (row.estimate >= row.sampled_max - 1e-12) &&
                          (row.estimate <= row.sampled_max + row.envelope + 1e-12);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string ground_state_csv(const std::vector<GroundStateRow>& rows) {
  std::ostringstream out;
  out << "model,n,m_dim,alpha,beta,estimate,target,gap,seed\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.model << ',' << r.n << ',' << r.m_dim << ',' << r.alpha << ',' << r.beta << ','
        << r.estimate << ',' << r.target << ',' << r.gap << ',' << r.seed << '\n';
  }
  return out.str();
}

}  // namespace liftlab
