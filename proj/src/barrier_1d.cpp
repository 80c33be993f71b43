#include "logcave/barrier_1d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "logcave/error.hpp"
#include "logcave/integrate.hpp"

namespace logcave {

std::vector<double> grid_hat_weights(double lo, double hi, int cells, const WeightedSample1d& data) {
  std::vector<double> c(cells + 1, 0.0);
  const double h = (hi - lo) / cells;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double pos = (data.x[i] - lo) / h;
    if (pos < -1e-9 || pos > cells + 1e-9) {
      throw Error(ErrorCode::kInvalidInput, "observation outside the oracle grid");
    }
    const int k = std::clamp(static_cast<int>(std::floor(pos)), 0, cells - 1);
    const double t = std::clamp(pos - k, 0.0, 1.0);
    c[k] += data.w[i] * (1.0 - t);
    c[k + 1] += data.w[i] * t;
  }
  return c;
}

namespace {

double grid_objective(const std::vector<double>& c, const Eigen::VectorXd& v, double h) {
  double s = 1.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * v[k];
  for (Eigen::Index k = 0; k + 1 < v.size(); ++k) s -= integrate_exp_segment(v[k], v[k + 1], h);
  return s;
}

}  // namespace

GridFit1d solve_grid_barrier(double lo, double hi, const std::vector<double>& node_weights, double gap) {
  const int cells = static_cast<int>(node_weights.size()) - 1;
  if (cells < 2 || !(hi > lo)) throw Error(ErrorCode::kInvalidInput, "oracle grid needs >= 2 cells and hi > lo");
  // Work on [0, 1]; psi = phi + log(hi - lo). Constraints are the discrete
  // curvatures r_k = (psi_{k-1} - 2 psi_k + psi_{k+1}) / h^2 <= 0 with slacks
  // s = -r and multipliers lam.
  const double h = 1.0 / cells;
  std::vector<double> c = node_weights;
  const double total = std::accumulate(c.begin(), c.end(), 0.0);
  for (double& v : c) v /= total;

  const int n = cells + 1, m = cells - 1;
  const double inv_h2 = 1.0 / (h * h);
  // The state is v_0 and the cell increments g_k = v_{k+1} - v_k, so the
  // curvatures are differences of increments rather than second differences
  // of values (whose rounding floor ~1e-16 / h^2 stalls the method).
  // Extended precision: the multiplier update multiplies A dv by lam / s,
  // which reaches 1e10 and more near the end, and in double the dual residual
  // then grows instead of shrinking once the gap is below ~1e-6.
  using Real = long double;
  using VecL = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  auto curvature = [&](const VecL& g, int k) { return (g[k + 1] - g[k]) * inv_h2; };

  VecL v(n), s(m), lam(m);
  for (int k = 0; k <= cells; ++k) {
    const double u = k * h - 0.5;
    v[k] = -u * u;
  }
  {
    Real mass = 0.0;
    for (int k = 0; k < cells; ++k) mass += integrate_exp_segment(static_cast<double>(v[k]), static_cast<double>(v[k + 1]), h);
    v.array() -= std::log(mass);
  }
  VecL g(cells);
  for (int k = 0; k < cells; ++k) g[k] = v[k + 1] - v[k];
  Real v0 = v[0];
  auto rebuild = [&] {
    v[0] = v0;
    for (int k = 0; k < cells; ++k) v[k + 1] = v[k] + g[k];
  };
  for (int k = 0; k < m; ++k) s[k] = -curvature(g, k);
  lam.setConstant(1.0 / m);
  for (int k = 0; k < m; ++k) lam[k] /= s[k];

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Real>> ldlt;
  bool analysed = false;
  int steps = 0, settled = 0;
  const Real a_row[3] = {inv_h2, -2.0 * inv_h2, inv_h2};
  for (; steps < 500; ++steps) {
    // Residuals of the minimisation of f = -objective.
    VecL rd(n);
    std::vector<Eigen::Triplet<Real>> trip;
    trip.reserve(13 * n);
    for (int k = 0; k <= cells; ++k) rd[k] = -c[k];
    for (int k = 0; k < cells; ++k) {
      const SegmentMoments sm = segment_moments(static_cast<double>(v[k]), static_cast<double>(v[k + 1]), h);
      rd[k] += sm.left;
      rd[k + 1] += sm.right;
      trip.emplace_back(k, k, sm.left2);
      trip.emplace_back(k + 1, k + 1, sm.right2);
      trip.emplace_back(k, k + 1, sm.cross);
      trip.emplace_back(k + 1, k, sm.cross);
    }
    VecL rp(m);
    for (int k = 0; k < m; ++k) {
      rp[k] = curvature(g, k) + s[k];
      for (int p = 0; p < 3; ++p) rd[k + p] += a_row[p] * lam[k];
    }
    const Real mu = s.dot(lam) / m;
    // The dual residual bottoms out near the rounding level of A^T lam, so
    // once the gap is met a few more centring steps are all that helps.
    if (m * mu < gap) {
      if (rd.lpNorm<Eigen::Infinity>() < 1e-8 || ++settled > 5) break;
    }
    // Centre towards 0.1 mu, but not far below the requested gap, where the
    // dual residual would drown in rounding.
    const Real target = std::max<Real>(0.1L * mu, 0.2L * gap / m);
    VecL rc = s.cwiseProduct(lam).array() - target;

    // (H + A^T D A) dv = -rd - A^T D rp + A^T S^{-1} rc
    VecL rhs = -rd;
    for (int k = 0; k < m; ++k) {
      const Real dk = lam[k] / s[k];
      const Real coef = -dk * rp[k] + rc[k] / s[k];
      for (int p = 0; p < 3; ++p) {
        rhs[k + p] += a_row[p] * coef;
        for (int q = 0; q < 3; ++q) trip.emplace_back(k + p, k + q, a_row[p] * a_row[q] * dk);
      }
    }
    Eigen::SparseMatrix<Real> mat(n, n);
    mat.setFromTriplets(trip.begin(), trip.end());
    if (!analysed) {
      ldlt.analyzePattern(mat);
      analysed = true;
    }
    ldlt.factorize(mat);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::kNonConvergence, "oracle Newton system is singular");
    const VecL dv = ldlt.solve(rhs);
    VecL dlam(m), ds(m);
    for (int k = 0; k < m; ++k) {
      const Real adv = a_row[0] * dv[k] + a_row[1] * dv[k + 1] + a_row[2] * dv[k + 2];
      dlam[k] = lam[k] / s[k] * (adv + rp[k]) - rc[k] / s[k];
      ds[k] = -(rc[k] + s[k] * dlam[k]) / lam[k];
    }
    Real alpha = 1.0;
    for (int k = 0; k < m; ++k) {
      if (ds[k] < 0.0) alpha = std::min<Real>(alpha, -0.995 * s[k] / ds[k]);
      if (dlam[k] < 0.0) alpha = std::min<Real>(alpha, -0.995 * lam[k] / dlam[k]);
    }
    v0 += alpha * dv[0];
    for (int k = 0; k < cells; ++k) g[k] += alpha * (dv[k + 1] - dv[k]);
    rebuild();
    s += alpha * ds;
    lam += alpha * dlam;
  }

  GridFit1d fit;
  fit.lo = lo;
  fit.hi = hi;
  fit.newton_steps = steps;
  const double shift = std::log(hi - lo);
  fit.phi.resize(n);
  for (int k = 0; k < n; ++k) fit.phi[k] = static_cast<double>(v[k]) - shift;
  fit.objective = grid_objective(c, v.cast<double>(), h) - shift;
  return fit;
}

}  // namespace logcave
