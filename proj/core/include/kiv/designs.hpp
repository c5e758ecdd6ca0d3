#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kiv/types.hpp"

namespace kiv {

// Three simulation designs. Linear and sigmoid are univariate with a
// shared confounding structure; demand is the nonlinear pricing design
// with inputs X = (P, T, S) and instruments Z = (C, T, S).
enum class DesignKind { Linear, Sigmoid, Demand };

const char* design_name(DesignKind kind);
DesignKind design_from_name(const std::string& name);

struct DesignSpec {
  DesignKind kind = DesignKind::Linear;
  double rho = 0.5;  // demand confounding level, in [0, 1)
  int sample_size = 1000;
  double split_ratio = 0.5;  // fraction of samples assigned to stage 1
  std::uint64_t seed = 0;

  void validate() const;
};

// One simulated data set plus the realized confounders for audit.
struct GeneratedSample {
  Matrix x;
  Vector y;
  Matrix z;
  Matrix confounders;
  std::vector<std::string> confounder_names;
};

// Disjoint index sets covering 0..total-1.
struct SplitIndices {
  std::vector<int> stage1;
  std::vector<int> stage2;
};

// Test inputs with the true structural values.
struct EvalGrid {
  Matrix points;
  Vector truth;
};

struct MseResult {
  double mse = 0.0;
  double log10_mse = 0.0;
  bool floored = false;  // mse hit the 1e-300 floor before taking the log
};

// Standard normal CDF via erfc; exact at 0.5, <= 1e-15 absolute error,
// output clamped strictly inside (0, 1).
double normal_cdf(double x);

// Seasonal nonlinearity of the demand design:
// psi(t) = 2 [ (t-5)^4/600 + exp(-4 (t-5)^2) + t/10 - 2 ].
double demand_psi(double t);

// True structural function. Point dimension must match the design: 1 for
// linear/sigmoid, 3 (p, t, s) for demand.
double structural_h(DesignKind kind,
                    const Eigen::Ref<const Eigen::RowVectorXd>& point);

// Draws one data set. Fully determined by the spec (including seed).
//
// Linear/sigmoid: (e, V, W) trivariate normal with unit variances,
// cov(e, V) = 1/2, W independent; X = Phi((W+V)/sqrt(2)), Z = Phi(W),
// Y = h(X) + e. Confounder columns: e, V, W.
//
// Demand: S uniform on {1..7}, T uniform on [0, 10], (C, V) independent
// standard normal, e = rho V + sqrt(1 - rho^2) eps,
// P = 25 + (C+3) psi(T) + V, Y = h(P, T, S) + e.
// Confounder columns: e, C, V.
GeneratedSample sample_design(const DesignSpec& spec);

// Seeded shuffle split; stage-1 share is round(ratio * total) clamped to
// [2, total-2]. Indices ascend within each stage.
SplitIndices split_indices(int total, double split_ratio, std::uint64_t seed);

// Fixed evaluation grids: 1000 evenly spaced x in [0, 1] for
// linear/sigmoid; the 20 x 20 x 7 (p, t, s) product grid with
// p in [2.5, 14.5], t in [0, 10], s in {1..7} for demand.
EvalGrid eval_grid(DesignKind kind);

// Mean squared deviation from the grid truth and its log10. Exact-zero
// MSE is floored at 1e-300 before logging and flagged.
MseResult mse_vs_truth(const Vector& predictions, const EvalGrid& grid);

}  // namespace kiv
