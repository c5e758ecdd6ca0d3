#include "kiv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "kiv/rng.hpp"

namespace kiv {

namespace {

void validate_bspline(const BSplineSpec& s) {
  if (s.order < 1) {
    throw InvalidSpec("bspline: order must be >= 1");
  }
  if (!(s.lo < s.hi) || !std::isfinite(s.lo) || !std::isfinite(s.hi)) {
    throw InvalidSpec("bspline: range must be finite with lo < hi");
  }
  double prev = s.lo;
  for (double t : s.interior_knots) {
    if (!std::isfinite(t) || !(t > prev) || !(t < s.hi)) {
      throw InvalidSpec(
          "bspline: interior knots must be strictly increasing and strictly "
          "inside the range");
    }
    prev = t;
  }
}

void validate_onehot(const OneHotSpec& s) {
  if (s.levels.empty()) {
    throw InvalidSpec("onehot: needs at least one level");
  }
  for (std::size_t i = 0; i < s.levels.size(); ++i) {
    if (!std::isfinite(s.levels[i])) {
      throw InvalidSpec("onehot: levels must be finite");
    }
    for (std::size_t j = i + 1; j < s.levels.size(); ++j) {
      if (s.levels[i] == s.levels[j]) {
        throw InvalidSpec("onehot: levels must be distinct");
      }
    }
  }
}

Eigen::Index dimension_basis_size(const DimensionBasis& d) {
  if (const auto* bs = std::get_if<BSplineSpec>(&d)) {
    return bs->order + static_cast<Eigen::Index>(bs->interior_knots.size());
  }
  return static_cast<Eigen::Index>(std::get<OneHotSpec>(d).levels.size());
}

Vector onehot_vector(const OneHotSpec& s, double x) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(s.levels.size()));
  Eigen::Index best = 0;
  double best_dist = std::abs(x - s.levels[0]);
  for (std::size_t i = 1; i < s.levels.size(); ++i) {
    const double d = std::abs(x - s.levels[i]);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<Eigen::Index>(i);
    }
  }
  v[best] = 1.0;
  return v;
}

Vector dimension_basis_vector(const DimensionBasis& d, double x) {
  if (const auto* bs = std::get_if<BSplineSpec>(&d)) {
    return bspline_basis(*bs, x);
  }
  return onehot_vector(std::get<OneHotSpec>(d), x);
}

// Rows of the feature matrix are basis vectors of the point rows.
Matrix feature_matrix(const BasisSpec& spec, const Matrix& points) {
  const Eigen::Index p = basis_size(spec, points.cols());
  Matrix f(points.rows(), p);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    f.row(i) = basis_vector(spec, points.row(i)).transpose();
  }
  return f;
}

// Fixed seed for the median-heuristic subsample; keeps the op
// deterministic without threading a seed through every call site.
constexpr std::uint64_t kMedianSubsampleSeed = 0x6d65646865757221ull;
constexpr Eigen::Index kMedianSubsampleCap = 2000;

}  // namespace

void validate_basis(const BasisSpec& spec, Eigen::Index dim) {
  if (std::holds_alternative<LinearWithInterceptSpec>(spec.form)) {
    if (dim < 1) {
      throw InvalidSpec("basis: input dimension must be >= 1");
    }
    return;
  }
  const auto& dims = std::get<std::vector<DimensionBasis>>(spec.form);
  if (static_cast<Eigen::Index>(dims.size()) != dim) {
    throw InvalidSpec("basis: one per-dimension basis required per input dim");
  }
  for (const auto& d : dims) {
    if (const auto* bs = std::get_if<BSplineSpec>(&d)) {
      validate_bspline(*bs);
    } else {
      validate_onehot(std::get<OneHotSpec>(d));
    }
  }
}

void validate_kernel(const KernelSpec& spec, Eigen::Index dim) {
  if (const auto* g = std::get_if<GaussianKernel>(&spec)) {
    if (static_cast<Eigen::Index>(g->lengthscales.size()) != dim) {
      throw InvalidSpec("gaussian kernel: one lengthscale per input dimension");
    }
    for (double l : g->lengthscales) {
      if (!std::isfinite(l) || !(l > 0.0)) {
        throw InvalidSpec("gaussian kernel: lengthscales must be finite and > 0");
      }
    }
    return;
  }
  validate_basis(std::get<FeatureMapKernel>(spec).basis, dim);
}

Matrix gram_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  if (a.rows() < 1 || b.rows() < 1) {
    throw DimensionMismatch("gram_matrix: point sets must be nonempty");
  }
  if (a.cols() != b.cols()) {
    throw DimensionMismatch("gram_matrix: point sets must share a dimension");
  }
  ensure_finite(a, "A");
  ensure_finite(b, "B");
  validate_kernel(spec, a.cols());

  if (const auto* g = std::get_if<GaussianKernel>(&spec)) {
    // Accumulate sum_d (a_d - b_d)^2 / (2 l_d^2), exponentiate once.
    Matrix s = Matrix::Zero(a.rows(), b.rows());
    for (Eigen::Index d = 0; d < a.cols(); ++d) {
      const double inv = 1.0 / (g->lengthscales[static_cast<std::size_t>(d)] *
                                std::sqrt(2.0));
      const Vector ad = a.col(d) * inv;
      const Vector bd = b.col(d) * inv;
      s.noalias() +=
          (ad.replicate(1, b.rows()) - bd.transpose().replicate(a.rows(), 1))
              .array()
              .square()
              .matrix();
    }
    return (-s.array()).exp();
  }

  const auto& fm = std::get<FeatureMapKernel>(spec);
  const Matrix fa = feature_matrix(fm.basis, a);
  const Matrix fb = feature_matrix(fm.basis, b);
  return fa * fb.transpose();
}

Vector bspline_basis(const BSplineSpec& spec, double x) {
  validate_bspline(spec);
  const int order = spec.order;
  const int n_int = static_cast<int>(spec.interior_knots.size());
  const int n_basis = order + n_int;

  // Knot vector with boundary knots repeated `order` times.
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(2 * order + n_int));
  for (int i = 0; i < order; ++i) t.push_back(spec.lo);
  for (double k : spec.interior_knots) t.push_back(k);
  for (int i = 0; i < order; ++i) t.push_back(spec.hi);

  x = std::clamp(x, spec.lo, spec.hi);

  // Knot span: largest s with t[s] <= x < t[s+1]; the rightmost nonempty
  // span also covers x == hi.
  int span = order - 1;
  const int last_span = n_basis - 1;
  while (span < last_span && x >= t[static_cast<std::size_t>(span + 1)]) {
    ++span;
  }

  // Triangular Cox-de Boor scheme over the active functions.
  const int degree = order - 1;
  std::vector<double> vals(static_cast<std::size_t>(order), 0.0);
  std::vector<double> left(static_cast<std::size_t>(order), 0.0);
  std::vector<double> right(static_cast<std::size_t>(order), 0.0);
  vals[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[static_cast<std::size_t>(j)] = x - t[static_cast<std::size_t>(span + 1 - j)];
    right[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[static_cast<std::size_t>(r + 1)] +
                           left[static_cast<std::size_t>(j - r)];
      const double temp = denom != 0.0 ? vals[static_cast<std::size_t>(r)] / denom : 0.0;
      vals[static_cast<std::size_t>(r)] =
          saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    vals[static_cast<std::size_t>(j)] = saved;
  }

  Vector out = Vector::Zero(n_basis);
  for (int r = 0; r <= degree; ++r) {
    const int idx = span - degree + r;
    out[idx] = vals[static_cast<std::size_t>(r)];
  }
  return out;
}

Eigen::Index basis_size(const BasisSpec& spec, Eigen::Index dim) {
  validate_basis(spec, dim);
  if (std::holds_alternative<LinearWithInterceptSpec>(spec.form)) {
    return dim + 1;
  }
  const auto& dims = std::get<std::vector<DimensionBasis>>(spec.form);
  Eigen::Index size = 1;
  for (const auto& d : dims) {
    size *= dimension_basis_size(d);
  }
  return size;
}

Vector basis_vector(const BasisSpec& spec,
                    const Eigen::Ref<const Eigen::RowVectorXd>& point) {
  validate_basis(spec, point.size());
  if (std::holds_alternative<LinearWithInterceptSpec>(spec.form)) {
    Vector v(point.size() + 1);
    v[0] = 1.0;
    v.tail(point.size()) = point.transpose();
    return v;
  }
  const auto& dims = std::get<std::vector<DimensionBasis>>(spec.form);
  // Tensor product across dimensions, first dimension varying slowest.
  Vector acc = dimension_basis_vector(dims[0], point[0]);
  for (std::size_t d = 1; d < dims.size(); ++d) {
    const Vector next =
        dimension_basis_vector(dims[d], point[static_cast<Eigen::Index>(d)]);
    Vector merged(acc.size() * next.size());
    for (Eigen::Index i = 0; i < acc.size(); ++i) {
      merged.segment(i * next.size(), next.size()) = acc[i] * next;
    }
    acc = std::move(merged);
  }
  return acc;
}

double median_heuristic(const Matrix& points, Eigen::Index dim) {
  if (points.rows() < 2) {
    throw DegenerateInput("median_heuristic: need at least 2 points");
  }
  if (dim < 0 || dim >= points.cols()) {
    throw DimensionMismatch("median_heuristic: dimension out of range");
  }
  ensure_finite(points, "points");

  std::vector<double> coords;
  if (points.rows() > kMedianSubsampleCap) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(kMedianSubsampleSeed);
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(kMedianSubsampleCap));
    std::sort(idx.begin(), idx.end());
    coords.reserve(idx.size());
    for (Eigen::Index i : idx) coords.push_back(points(i, dim));
  } else {
    coords.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      coords.push_back(points(i, dim));
    }
  }

  std::vector<double> dists;
  dists.reserve(coords.size() * (coords.size() - 1) / 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t j = i + 1; j < coords.size(); ++j) {
      dists.push_back(std::abs(coords[i] - coords[j]));
    }
  }
  if (*std::max_element(dists.begin(), dists.end()) == 0.0) {
    throw DegenerateInput("median_heuristic: all points equal in dimension " +
                          std::to_string(dim));
  }

  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid),
                   dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) {
    const double lower = *std::max_element(
        dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median;
}

MedianLengthscales median_lengthscales(const Matrix& points) {
  MedianLengthscales out;
  out.values.reserve(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index d = 0; d < points.cols(); ++d) {
    double l = 1.0;
    try {
      l = median_heuristic(points, d);
      if (l == 0.0) {
        out.fallback_dims.push_back(static_cast<int>(d));
        l = 1.0;
      }
    } catch (const DegenerateInput&) {
      out.fallback_dims.push_back(static_cast<int>(d));
    }
    out.values.push_back(l);
  }
  return out;
}

}  // namespace kiv
