#pragma once

#include <variant>
#include <vector>

#include "kiv/types.hpp"

namespace kiv {

// --- Finite feature-map (sieve) bases ---------------------------------

// Univariate B-spline basis of the given order over [lo, hi]. The knot
// vector repeats each boundary knot `order` times around the interior
// knots, so the basis interpolates at the endpoints and has
// order + interior_knots.size() functions. Evaluation clamps x to
// [lo, hi]: test grids touch the boundaries where rounding can exit the
// range.
struct BSplineSpec {
  int order = 4;
  std::vector<double> interior_knots;
  double lo = 0.0;
  double hi = 1.0;
};

// Indicator basis over a fixed set of levels; unmatched inputs snap to
// the nearest level.
struct OneHotSpec {
  std::vector<double> levels;
};

// Whole-vector affine features (1, x_1, ..., x_d).
struct LinearWithInterceptSpec {};

using DimensionBasis = std::variant<BSplineSpec, OneHotSpec>;

// A finite dictionary of basis functions over the input space: either one
// univariate basis per dimension composed by tensor product (B-splines
// for continuous dimensions, one-hot for discrete ones), or a single
// linear-with-intercept map over the whole vector.
struct BasisSpec {
  std::variant<std::vector<DimensionBasis>, LinearWithInterceptSpec> form;

  static BasisSpec linear_with_intercept() {
    return BasisSpec{LinearWithInterceptSpec{}};
  }
  static BasisSpec bspline(BSplineSpec spec) {
    return BasisSpec{std::vector<DimensionBasis>{std::move(spec)}};
  }
  static BasisSpec product(std::vector<DimensionBasis> dims) {
    return BasisSpec{std::move(dims)};
  }
};

// --- Kernels -----------------------------------------------------------

// Product Gaussian kernel: k(a, b) = prod_d exp(-(a_d - b_d)^2 / (2 l_d^2)),
// one lengthscale per input dimension.
struct GaussianKernel {
  std::vector<double> lengthscales;
};

// k(a, b) = <basis(a), basis(b)>.
struct FeatureMapKernel {
  BasisSpec basis;
};

using KernelSpec = std::variant<GaussianKernel, FeatureMapKernel>;

// Throws InvalidSpec when the spec is malformed or does not fit points of
// the given dimension.
void validate_kernel(const KernelSpec& spec, Eigen::Index dim);
void validate_basis(const BasisSpec& spec, Eigen::Index dim);

// Gram matrix with entry (i, j) = k(a_i, b_j); points are rows.
Matrix gram_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b);

// All B-spline basis functions at x (Cox-de Boor); x is clamped to the
// declared range. The coordinates sum to 1.
Vector bspline_basis(const BSplineSpec& spec, double x);

// Number of basis functions the spec produces for inputs of dimension dim.
Eigen::Index basis_size(const BasisSpec& spec, Eigen::Index dim);

// Feature vector for one point (a matrix row).
Vector basis_vector(const BasisSpec& spec,
                    const Eigen::Ref<const Eigen::RowVectorXd>& point);

// Median of all pairwise absolute distances along one dimension. For more
// than 2000 points the median is taken over a deterministic seeded
// subsample of 2000 to bound the O(n^2) pair enumeration. Throws
// DegenerateInput if every pairwise distance is zero.
double median_heuristic(const Matrix& points, Eigen::Index dim);

// Per-dimension median-heuristic lengthscales with the degenerate-dimension
// fallback applied: dimensions where all points coincide get lengthscale
// 1.0 and are listed in fallback_dims.
struct MedianLengthscales {
  std::vector<double> values;
  std::vector<int> fallback_dims;
};
MedianLengthscales median_lengthscales(const Matrix& points);

}  // namespace kiv
