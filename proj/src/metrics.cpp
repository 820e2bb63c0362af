#include "simplexclf/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "simplexclf/error.hpp"

namespace simplexclf {

namespace {

void require_same_dim(const Composition& x, const Composition& y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "compositions have " + std::to_string(x.size()) + " and " +
                    std::to_string(y.size()) + " parts");
  }
}

// x log(2x/(x+y)), with 0 log(.) = 0.
double esov_term(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * std::log(2.0 * x / (x + y));
}

}  // namespace

std::string MetricSpec::name() const {
  if (kind == MetricKind::Esov) return "esov";
  std::ostringstream os;
  os << "alpha(" << alpha.value << ")";
  return os.str();
}

Eigen::VectorXd metric_image(const Composition& x, Alpha alpha) {
  if (alpha.is_zero()) return clr(x);
  return power_transform(x, alpha).as_vector();
}

double alpha_distance_from_images(const Eigen::VectorXd& ix, const Eigen::VectorXd& iy,
                                  Alpha alpha) {
  const double norm = (ix - iy).norm();
  if (alpha.is_zero()) return norm;
  return static_cast<double>(ix.size()) / std::abs(alpha.value) * norm;
}

double alpha_distance(const Composition& x, const Composition& y, Alpha alpha) {
  require_same_dim(x, y);
  return alpha_distance_from_images(metric_image(x, alpha), metric_image(y, alpha), alpha);
}

double alpha_distance_via_transform(const Composition& x, const Composition& y,
                                    Alpha alpha, const ContrastBasis& basis) {
  require_same_dim(x, y);
  return (alpha_transform(x, alpha, basis).coords -
          alpha_transform(y, alpha, basis).coords)
      .norm();
}

double esov_distance(const Composition& x, const Composition& y) {
  require_same_dim(x, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += esov_term(x[i], y[i]) + esov_term(y[i], x[i]);
  }
  // Rounding can leave a tiny negative sum for identical inputs.
  return std::sqrt(std::max(sum, 0.0));
}

double distance(const Composition& x, const Composition& y, const MetricSpec& metric) {
  return metric.kind == MetricKind::Esov ? esov_distance(x, y)
                                         : alpha_distance(x, y, metric.alpha);
}

DistanceMatrix pairwise_distances(std::span<const Composition> a,
                                  std::span<const Composition> b,
                                  const MetricSpec& metric, unsigned threads) {
  DistanceMatrix out{a.size(), b.size(), std::vector<double>(a.size() * b.size()), metric};

  auto fill_row = [&](std::size_t i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      try {
        out.values[i * b.size() + j] = distance(a[i], b[j], metric);
      } catch (const Error& e) {
        throw Error(e.code(),
                    "pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.message(),
                    i, j);
      }
    }
  };

  if (threads <= 1 || a.size() < 2) {
    for (std::size_t i = 0; i < a.size(); ++i) fill_row(i);
    return out;
  }

  // The lowest failing row is reported so errors do not depend on scheduling.
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failure_row = a.size();
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < a.size(); i = next++) {
          try {
            fill_row(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (i < failure_row) {
              failure_row = i;
              failure = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace simplexclf
