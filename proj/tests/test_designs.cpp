#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "kiv/designs.hpp"

using namespace kiv;

namespace {

double correlation(const Vector& a, const Vector& b) {
  const double ma = a.mean(), mb = b.mean();
  const Vector da = a.array() - ma, db = b.array() - mb;
  return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

}  // namespace

TEST_CASE("structural values") {
  Eigen::RowVectorXd x(1);
  x << 0.5;
  CHECK(structural_h(DesignKind::Linear, x) == doctest::Approx(0.0));
  CHECK(structural_h(DesignKind::Sigmoid, x) == doctest::Approx(0.0));

  CHECK(demand_psi(5.0) == doctest::Approx(-1.0));
  Eigen::RowVectorXd pts(3);
  pts << 10.0, 5.0, 1.0;
  CHECK(structural_h(DesignKind::Demand, pts) == doctest::Approx(60.0));

  CHECK_THROWS_AS(structural_h(DesignKind::Demand, x), DimensionMismatch);
}

TEST_CASE("normal cdf") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_cdf(-40.0) > 0.0);
  CHECK(normal_cdf(40.0) < 1.0);
}

TEST_CASE("sampling is bit-deterministic") {
  DesignSpec spec;
  spec.kind = DesignKind::Demand;
  spec.rho = 0.5;
  spec.sample_size = 64;
  spec.seed = 99;
  const auto a = sample_design(spec);
  const auto b = sample_design(spec);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear/sigmoid confounding structure at 1e5 draws") {
  DesignSpec spec;
  spec.kind = DesignKind::Linear;
  spec.sample_size = 100000;
  spec.seed = 2024;
  const auto s = sample_design(spec);

  const Vector e = s.confounders.col(0);
  const Vector v = s.confounders.col(1);
  const Vector w = s.confounders.col(2);
  CHECK(std::abs(correlation(e, v) - 0.5) < 0.01);
  CHECK(std::abs(w.mean()) < 0.01);
  const double var_e = (e.array() - e.mean()).square().mean();
  CHECK(std::abs(var_e - 1.0) < 0.02);

  CHECK(s.x.minCoeff() > 0.0);
  CHECK(s.x.maxCoeff() < 1.0);
  CHECK(s.z.minCoeff() > 0.0);
  CHECK(s.z.maxCoeff() < 1.0);

  // Y-h(X) recovers the confounder exactly.
  for (int i = 0; i < 100; ++i) {
    CHECK(s.y[i] - (4.0 * s.x(i, 0) - 2.0) == doctest::Approx(e[i]).epsilon(1e-12));
  }
}

TEST_CASE("demand confounding structure at 1e5 draws") {
  DesignSpec spec;
  spec.kind = DesignKind::Demand;
  spec.rho = 0.9;
  spec.sample_size = 100000;
  spec.seed = 55;
  const auto s = sample_design(spec);

  const Vector e = s.confounders.col(0);
  const Vector v = s.confounders.col(2);
  CHECK(std::abs(correlation(e, v) - 0.9) < 0.01);

  const Vector t = s.x.col(1);
  CHECK(std::abs(t.mean() - 5.0) < 0.05);
  CHECK(t.minCoeff() >= 0.0);
  CHECK(t.maxCoeff() <= 10.0);

  const Vector sdim = s.x.col(2);
  CHECK(sdim.minCoeff() == 1.0);
  CHECK(sdim.maxCoeff() == 7.0);
  for (int i = 0; i < 200; ++i) {
    CHECK(sdim[i] == std::floor(sdim[i]));
  }
  // Instruments share the exogenous dimensions.
  CHECK((s.x.col(1) - s.z.col(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.x.col(2) - s.z.col(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("split covers all indices disjointly") {
  const auto split = split_indices(101, 0.5, 7);
  CHECK(split.stage1.size() == 51);  // round(50.5)
  CHECK(split.stage2.size() == 50);
  std::vector<bool> seen(101, false);
  for (int i : split.stage1) {
    CHECK(!seen[static_cast<std::size_t>(i)]);
    seen[static_cast<std::size_t>(i)] = true;
  }
  for (int i : split.stage2) {
    CHECK(!seen[static_cast<std::size_t>(i)]);
    seen[static_cast<std::size_t>(i)] = true;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  CHECK(std::is_sorted(split.stage1.begin(), split.stage1.end()));

  // Extreme ratios still leave two samples per stage.
  const auto tiny = split_indices(8, 0.01, 3);
  CHECK(tiny.stage1.size() == 2);
  CHECK(tiny.stage2.size() == 6);
}

TEST_CASE("eval grids") {
  const auto linear = eval_grid(DesignKind::Linear);
  CHECK(linear.points.rows() == 1000);
  CHECK(linear.points(0, 0) == 0.0);
  CHECK(linear.points(999, 0) == 1.0);
  CHECK(linear.truth[0] == doctest::Approx(-2.0));
  CHECK(linear.truth[999] == doctest::Approx(2.0));

  const auto demand = eval_grid(DesignKind::Demand);
  CHECK(demand.points.rows() == 2800);
  CHECK(demand.points.col(0).minCoeff() == doctest::Approx(2.5));
  CHECK(demand.points.col(0).maxCoeff() == doctest::Approx(14.5));
  CHECK(demand.points.col(1).minCoeff() == 0.0);
  CHECK(demand.points.col(1).maxCoeff() == 10.0);
  CHECK(demand.points.col(2).minCoeff() == 1.0);
  CHECK(demand.points.col(2).maxCoeff() == 7.0);
}

TEST_CASE("mse_vs_truth") {
  const auto grid = eval_grid(DesignKind::Linear);

  const auto exact = mse_vs_truth(grid.truth, grid);
  CHECK(exact.mse == 0.0);
  CHECK(exact.floored);
  CHECK(exact.log10_mse == doctest::Approx(-300.0));

  const auto offset1 = mse_vs_truth(grid.truth.array() + 1.0, grid);
  CHECK(offset1.mse == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(offset1.log10_mse == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(!offset1.floored);

  const auto offset01 = mse_vs_truth(grid.truth.array() + 0.1, grid);
  CHECK(offset01.mse == doctest::Approx(0.01).epsilon(1e-10));
  CHECK(offset01.log10_mse == doctest::Approx(-2.0).epsilon(1e-10));

  CHECK_THROWS_AS(mse_vs_truth(Vector::Zero(3), grid), DimensionMismatch);
  Vector bad = grid.truth;
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(mse_vs_truth(bad, grid), NonFinite);
}

TEST_CASE("design spec validation") {
  DesignSpec spec;
  spec.sample_size = 4;
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
  spec.sample_size = 100;
  spec.split_ratio = 1.0;
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
  spec.split_ratio = 0.5;
  spec.rho = 1.0;
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
}
