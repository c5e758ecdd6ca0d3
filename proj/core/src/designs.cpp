#include "kiv/designs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kiv/rng.hpp"

namespace kiv {

const char* design_name(DesignKind kind) {
  switch (kind) {
    case DesignKind::Linear:
      return "linear";
    case DesignKind::Sigmoid:
      return "sigmoid";
    case DesignKind::Demand:
      return "demand";
  }
  return "unknown";
}

DesignKind design_from_name(const std::string& name) {
  if (name == "linear") return DesignKind::Linear;
  if (name == "sigmoid") return DesignKind::Sigmoid;
  if (name == "demand") return DesignKind::Demand;
  throw InvalidSpec("unknown design: " + name);
}

void DesignSpec::validate() const {
  if (sample_size < 8) {
    throw InvalidSpec("design: sample_size must be >= 8");
  }
  if (!(split_ratio > 0.0) || !(split_ratio < 1.0)) {
    throw InvalidSpec("design: split_ratio must be in (0, 1)");
  }
  if (!(rho >= 0.0) || !(rho < 1.0)) {
    throw InvalidSpec("design: rho must be in [0, 1)");
  }
}

double normal_cdf(double x) {
  double p = 0.5 * std::erfc(-x / std::sqrt(2.0));
  // Phi of a finite draw must stay strictly inside (0, 1); extreme
  // arguments (|x| > ~8.3) round to the boundary in double precision.
  constexpr double kEps = 0x1.0p-53;
  return std::clamp(p, kEps, 1.0 - kEps);
}

double demand_psi(double t) {
  const double u = t - 5.0;
  return 2.0 * (std::pow(u, 4) / 600.0 + std::exp(-4.0 * u * u) + t / 10.0 - 2.0);
}

namespace {

double sigmoid_h(double x) {
  const double a = 16.0 * x - 8.0;
  double sgn = 0.0;
  if (x > 0.5) sgn = 1.0;
  if (x < 0.5) sgn = -1.0;
  return std::log(std::abs(a) + 1.0) * sgn;
}

double demand_h(double p, double t, double s) {
  return 100.0 + (10.0 + p) * s * demand_psi(t) - 2.0 * p;
}

}  // namespace

double structural_h(DesignKind kind,
                    const Eigen::Ref<const Eigen::RowVectorXd>& point) {
  switch (kind) {
    case DesignKind::Linear:
      if (point.size() != 1) {
        throw DimensionMismatch("structural_h: linear design is univariate");
      }
      return 4.0 * point[0] - 2.0;
    case DesignKind::Sigmoid:
      if (point.size() != 1) {
        throw DimensionMismatch("structural_h: sigmoid design is univariate");
      }
      return sigmoid_h(point[0]);
    case DesignKind::Demand:
      if (point.size() != 3) {
        throw DimensionMismatch("structural_h: demand design expects (p, t, s)");
      }
      return demand_h(point[0], point[1], point[2]);
  }
  throw InvalidSpec("structural_h: unknown design");
}

GeneratedSample sample_design(const DesignSpec& spec) {
  spec.validate();
  const int n = spec.sample_size;
  Rng rng(spec.seed);
  GeneratedSample out;

  if (spec.kind == DesignKind::Demand) {
    out.x.resize(n, 3);
    out.z.resize(n, 3);
    out.y.resize(n);
    out.confounders.resize(n, 3);
    out.confounder_names = {"e", "C", "V"};
    const double noise = std::sqrt(1.0 - spec.rho * spec.rho);
    for (int i = 0; i < n; ++i) {
      // Draw order pinned: S, T, C, V, eps.
      const double s = 1.0 + std::min(6.0, std::floor(rng.uniform() * 7.0));
      const double t = 10.0 * rng.uniform();
      const double c = rng.normal();
      const double v = rng.normal();
      const double e = spec.rho * v + noise * rng.normal();
      const double p = 25.0 + (c + 3.0) * demand_psi(t) + v;
      out.x(i, 0) = p;
      out.x(i, 1) = t;
      out.x(i, 2) = s;
      out.z(i, 0) = c;
      out.z(i, 1) = t;
      out.z(i, 2) = s;
      out.y[i] = demand_h(p, t, s) + e;
      out.confounders(i, 0) = e;
      out.confounders(i, 1) = c;
      out.confounders(i, 2) = v;
    }
    return out;
  }

  out.x.resize(n, 1);
  out.z.resize(n, 1);
  out.y.resize(n);
  out.confounders.resize(n, 3);
  out.confounder_names = {"e", "V", "W"};
  // Cholesky factor of [[1, 1/2, 0], [1/2, 1, 0], [0, 0, 1]].
  const double l21 = 0.5;
  const double l22 = std::sqrt(0.75);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    // Draw order pinned: the three components of (e, V, W).
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    const double g3 = rng.normal();
    const double e = g1;
    const double v = l21 * g1 + l22 * g2;
    const double w = g3;
    const double x = normal_cdf((w + v) * inv_sqrt2);
    out.x(i, 0) = x;
    out.z(i, 0) = normal_cdf(w);
    out.y[i] = (spec.kind == DesignKind::Linear ? 4.0 * x - 2.0 : sigmoid_h(x)) + e;
    out.confounders(i, 0) = e;
    out.confounders(i, 1) = v;
    out.confounders(i, 2) = w;
  }
  return out;
}

SplitIndices split_indices(int total, double split_ratio, std::uint64_t seed) {
  if (total < 4) {
    throw InvalidSpec("split_indices: need at least 4 samples");
  }
  if (!(split_ratio > 0.0) || !(split_ratio < 1.0)) {
    throw InvalidSpec("split_indices: ratio must be in (0, 1)");
  }
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const int want = static_cast<int>(std::lround(split_ratio * total));
  const int n1 = std::clamp(want, 2, total - 2);
  SplitIndices split;
  split.stage1.assign(order.begin(), order.begin() + n1);
  split.stage2.assign(order.begin() + n1, order.end());
  std::sort(split.stage1.begin(), split.stage1.end());
  std::sort(split.stage2.begin(), split.stage2.end());
  return split;
}

EvalGrid eval_grid(DesignKind kind) {
  EvalGrid grid;
  if (kind == DesignKind::Demand) {
    const int np = 20, nt = 20, ns = 7;
    grid.points.resize(np * nt * ns, 3);
    grid.truth.resize(np * nt * ns);
    Eigen::Index row = 0;
    for (int ip = 0; ip < np; ++ip) {
      const double p = 2.5 + (14.5 - 2.5) * ip / (np - 1);
      for (int it = 0; it < nt; ++it) {
        const double t = 10.0 * it / (nt - 1);
        for (int is = 1; is <= ns; ++is) {
          grid.points(row, 0) = p;
          grid.points(row, 1) = t;
          grid.points(row, 2) = is;
          grid.truth[row] = demand_h(p, t, is);
          ++row;
        }
      }
    }
    return grid;
  }

  const int count = 1000;
  grid.points.resize(count, 1);
  grid.truth.resize(count);
  for (int i = 0; i < count; ++i) {
    const double x = static_cast<double>(i) / (count - 1);
    grid.points(i, 0) = x;
    grid.truth[i] =
        kind == DesignKind::Linear ? 4.0 * x - 2.0 : sigmoid_h(x);
  }
  return grid;
}

MseResult mse_vs_truth(const Vector& predictions, const EvalGrid& grid) {
  if (predictions.size() != grid.truth.size()) {
    throw DimensionMismatch("mse_vs_truth: prediction count must match grid");
  }
  ensure_finite(predictions, "predictions");
  MseResult r;
  r.mse = (predictions - grid.truth).squaredNorm() /
          static_cast<double>(grid.truth.size());
  constexpr double kFloor = 1e-300;
  if (r.mse < kFloor) {
    r.floored = true;
    r.log10_mse = std::log10(kFloor);
  } else {
    r.log10_mse = std::log10(r.mse);
  }
  return r;
}

}  // namespace kiv
