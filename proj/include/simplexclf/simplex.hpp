#pragma once

// Simplex geometry: closure, the compositional power transformation, the
// Helmert contrast basis, and the alpha-transformation family with its
// centred log-ratio limit at alpha = 0.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace simplexclf {

inline constexpr double kClosureTolerance = 1e-10;

/// A point on the simplex: D >= 2 non-negative parts summing to one.
///
/// The constructor is strict (parts must already be closed to within
/// kClosureTolerance). Use closure() to normalize arbitrary non-negative
/// vectors.
class Composition {
 public:
  explicit Composition(std::vector<double> parts);

  std::size_t size() const noexcept { return parts_.size(); }
  std::span<const double> parts() const noexcept { return parts_; }
  double operator[](std::size_t i) const { return parts_[i]; }

  bool has_zeros() const noexcept;
  std::size_t zero_count() const noexcept;

  Eigen::Map<const Eigen::VectorXd> as_vector() const noexcept {
    return {parts_.data(), static_cast<Eigen::Index>(parts_.size())};
  }

  friend bool operator==(const Composition&, const Composition&) = default;

 private:
  std::vector<double> parts_;
};

/// Transformation parameter. Zero selects the centred log-ratio branch.
struct Alpha {
  double value = 1.0;

  constexpr Alpha() = default;
  explicit Alpha(double v);

  bool is_zero() const noexcept { return value == 0.0; }
  friend bool operator==(Alpha, Alpha) = default;
};

/// A d x D matrix with orthonormal rows, each orthogonal to the ones vector.
///
/// helmert_submatrix() builds the standard choice. from_matrix() accepts any
/// other valid basis, which is how invariance to the basis is tested.
class ContrastBasis {
 public:
  static ContrastBasis from_matrix(Eigen::MatrixXd rows);

  const Eigen::MatrixXd& matrix() const noexcept { return rows_; }
  std::size_t dim_d() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dim_D() const noexcept { return static_cast<std::size_t>(rows_.cols()); }

 private:
  explicit ContrastBasis(Eigen::MatrixXd rows) : rows_(std::move(rows)) {}
  friend ContrastBasis helmert_submatrix(std::size_t D);

  Eigen::MatrixXd rows_;
};

/// Helmert matrix of order D with its first row removed. Row j (1-based) is
/// h_j repeated j times, then -j h_j, then zeros, with h_j = -1/sqrt(j(j+1)).
ContrastBasis helmert_submatrix(std::size_t D);

/// Image of a composition in R^d, tagged with the alpha that produced it.
struct TransformedVector {
  Eigen::VectorXd coords;
  Alpha alpha;
  std::size_t source_dim = 0;
};

/// Divides non-negative entries by their sum.
Composition closure(std::span<const double> raw);

/// x_i^a / sum_j x_j^a. Zero parts stay zero for a > 0; a <= 0 with zero
/// parts is an error.
Composition power_transform(const Composition& x, Alpha alpha);

/// H (D u_a(x) - 1) / a for a != 0, and H clr(x) for a == 0.
TransformedVector alpha_transform(const Composition& x, Alpha alpha);
TransformedVector alpha_transform(const Composition& x, Alpha alpha,
                                  const ContrastBasis& basis);

/// The un-projected D-vector (D u_a(x) - 1)/a, or clr(x) at a = 0. Sums to
/// zero; multiplying by any ContrastBasis gives the transformed coordinates.
Eigen::VectorXd centred_power_coordinates(const Composition& x, Alpha alpha);

/// Centred log-ratio log(x_i / g(x)); requires strictly positive parts.
Eigen::VectorXd clr(const Composition& x);

/// Inverse of alpha_transform. For a != 0, fails with OutsideImage when some
/// component of a H^T v + 1 is not positive. At a = 0, returns
/// closure(exp(H^T v)).
Composition inverse_alpha_transform(const TransformedVector& v);
Composition inverse_alpha_transform(const Eigen::VectorXd& coords, Alpha alpha,
                                    std::size_t D);
Composition inverse_alpha_transform(const Eigen::VectorXd& coords, Alpha alpha,
                                    const ContrastBasis& basis);

/// Component-wise Box-Cox: (x_i^t - 1)/t, or log x_i at t = 0.
std::vector<double> boxcox_componentwise(const Composition& x, double theta);

/// Transforms every composition into one row of an n x d matrix.
Eigen::MatrixXd transform_rows(std::span<const Composition> rows, Alpha alpha,
                               const ContrastBasis& basis);

}  // namespace simplexclf
