#include "simplexclf/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "simplexclf/error.hpp"

namespace simplexclf {

namespace {

// Components of a H^T v + 1 this close to zero are treated as exact zeros
// (they are the images of zero parts, perturbed by rounding).
constexpr double kImageZeroTolerance = 1e-12;

void require_positive_alpha_for_zeros(const Composition& x, Alpha alpha) {
  if (alpha.value <= 0.0 && x.has_zeros()) {
    throw Error(ErrorCode::ZeroWithNonpositiveAlpha,
                "composition has zero parts; alpha must be > 0 (got " +
                    std::to_string(alpha.value) + ")");
  }
}

Composition close_unchecked(std::vector<double> values) {
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  for (double& v : values) v /= sum;
  return Composition(std::move(values));
}

}  // namespace

Composition::Composition(std::vector<double> parts) : parts_(std::move(parts)) {
  if (parts_.size() < 2) {
    throw Error(ErrorCode::TooShort, "a composition needs at least 2 parts");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (!(parts_[i] >= 0.0) || !std::isfinite(parts_[i])) {
      throw Error(ErrorCode::NegativeComponent,
                  "part " + std::to_string(i) + " is negative or not finite",
                  std::nullopt, i);
    }
    sum += parts_[i];
  }
  if (sum == 0.0) throw Error(ErrorCode::AllZero, "all parts are zero");
  if (std::abs(sum - 1.0) > kClosureTolerance) {
    throw Error(ErrorCode::NotClosed,
                "parts sum to " + std::to_string(sum) + ", not 1; use closure()");
  }
}

bool Composition::has_zeros() const noexcept { return zero_count() > 0; }

std::size_t Composition::zero_count() const noexcept {
  return static_cast<std::size_t>(
      std::count(parts_.begin(), parts_.end(), 0.0));
}

Alpha::Alpha(double v) : value(v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::ParameterOutOfRange, "alpha must be finite");
  }
}

ContrastBasis ContrastBasis::from_matrix(Eigen::MatrixXd rows) {
  const auto d = rows.rows();
  const auto D = rows.cols();
  if (D < 2 || d != D - 1) {
    throw Error(ErrorCode::DimensionMismatch, "basis must be (D-1) x D with D >= 2");
  }
  const double gram_err =
      (rows * rows.transpose() - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  const double ones_err = (rows * Eigen::VectorXd::Ones(D)).cwiseAbs().maxCoeff();
  if (gram_err > 1e-10 || ones_err > 1e-10) {
    throw Error(ErrorCode::InvalidSpec,
                "basis rows must be orthonormal and orthogonal to the ones vector");
  }
  return ContrastBasis(std::move(rows));
}

ContrastBasis helmert_submatrix(std::size_t D) {
  if (D < 2) throw Error(ErrorCode::TooShort, "Helmert submatrix needs D >= 2");
  const auto n = static_cast<Eigen::Index>(D);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n - 1, n);
  for (Eigen::Index row = 0; row < n - 1; ++row) {
    const double j = static_cast<double>(row + 1);
    const double hj = -1.0 / std::sqrt(j * (j + 1.0));
    for (Eigen::Index col = 0; col <= row; ++col) h(row, col) = hj;
    h(row, row + 1) = -j * hj;
  }
  return ContrastBasis(std::move(h));
}

Composition closure(std::span<const double> raw) {
  if (raw.size() < 2) {
    throw Error(ErrorCode::TooShort, "closure needs at least 2 entries");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(raw[i] >= 0.0) || !std::isfinite(raw[i])) {
      throw Error(ErrorCode::NegativeComponent,
                  "entry " + std::to_string(i) + " is negative or not finite",
                  std::nullopt, i);
    }
    sum += raw[i];
  }
  if (sum == 0.0) throw Error(ErrorCode::AllZero, "all entries are zero");
  std::vector<double> out(raw.begin(), raw.end());
  for (double& v : out) v /= sum;
  return Composition(std::move(out));
}

Composition power_transform(const Composition& x, Alpha alpha) {
  require_positive_alpha_for_zeros(x, alpha);
  std::vector<double> powered(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    powered[i] = x[i] == 0.0 ? 0.0 : std::pow(x[i], alpha.value);
  }
  return close_unchecked(std::move(powered));
}

Eigen::VectorXd clr(const Composition& x) {
  require_positive_alpha_for_zeros(x, Alpha(0.0));
  const auto D = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd logs(D);
  for (Eigen::Index i = 0; i < D; ++i) logs[i] = std::log(x[static_cast<std::size_t>(i)]);
  return logs.array() - logs.mean();
}

Eigen::VectorXd centred_power_coordinates(const Composition& x, Alpha alpha) {
  if (alpha.is_zero()) return clr(x);
  const Composition u = power_transform(x, alpha);
  const double D = static_cast<double>(x.size());
  return (D * u.as_vector().array() - 1.0) / alpha.value;
}

TransformedVector alpha_transform(const Composition& x, Alpha alpha,
                                  const ContrastBasis& basis) {
  if (basis.dim_D() != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "basis and composition sizes differ");
  }
  return {basis.matrix() * centred_power_coordinates(x, alpha), alpha, x.size()};
}

TransformedVector alpha_transform(const Composition& x, Alpha alpha) {
  return alpha_transform(x, alpha, helmert_submatrix(x.size()));
}

Composition inverse_alpha_transform(const Eigen::VectorXd& coords, Alpha alpha,
                                    const ContrastBasis& basis) {
  if (static_cast<std::size_t>(coords.size()) != basis.dim_d()) {
    throw Error(ErrorCode::DimensionMismatch, "coordinate length must be D - 1");
  }
  const Eigen::VectorXd lifted = basis.matrix().transpose() * coords;
  const auto D = static_cast<std::size_t>(lifted.size());
  std::vector<double> parts(D);

  if (alpha.is_zero()) {
    // clr inverse; shifting by the max keeps exp() in range.
    const double shift = lifted.maxCoeff();
    for (std::size_t i = 0; i < D; ++i) {
      parts[i] = std::exp(lifted[static_cast<Eigen::Index>(i)] - shift);
    }
    return close_unchecked(std::move(parts));
  }

  for (std::size_t i = 0; i < D; ++i) {
    double w = alpha.value * lifted[static_cast<Eigen::Index>(i)] + 1.0;
    if (std::abs(w) <= kImageZeroTolerance) w = 0.0;
    if (w < 0.0 || (w == 0.0 && alpha.value < 0.0)) {
      throw Error(ErrorCode::OutsideImage,
                  "vector is outside the image of the alpha-transformation "
                  "(component " + std::to_string(i) + " of a H^T v + 1 is " +
                      std::to_string(w) + ")",
                  std::nullopt, i);
    }
    parts[i] = w == 0.0 ? 0.0 : std::pow(w, 1.0 / alpha.value);
  }
  return close_unchecked(std::move(parts));
}

Composition inverse_alpha_transform(const Eigen::VectorXd& coords, Alpha alpha,
                                    std::size_t D) {
  return inverse_alpha_transform(coords, alpha, helmert_submatrix(D));
}

Composition inverse_alpha_transform(const TransformedVector& v) {
  return inverse_alpha_transform(v.coords, v.alpha, v.source_dim);
}

std::vector<double> boxcox_componentwise(const Composition& x, double theta) {
  if (theta <= 0.0 && x.has_zeros()) {
    throw Error(ErrorCode::ZeroWithNonpositiveTheta,
                "composition has zero parts; theta must be > 0");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = theta == 0.0 ? std::log(x[i]) : (std::pow(x[i], theta) - 1.0) / theta;
  }
  return out;
}

Eigen::MatrixXd transform_rows(std::span<const Composition> rows, Alpha alpha,
                               const ContrastBasis& basis) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(basis.dim_d()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != basis.dim_D()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "row " + std::to_string(r) + " has the wrong number of parts", r);
    }
    try {
      out.row(static_cast<Eigen::Index>(r)) =
          (basis.matrix() * centred_power_coordinates(rows[r], alpha)).transpose();
    } catch (const Error& e) {
      throw Error(e.code(), "row " + std::to_string(r) + ": " + e.message(), r);
    }
  }
  return out;
}

}  // namespace simplexclf
