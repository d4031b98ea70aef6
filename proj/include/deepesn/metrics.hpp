#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include <json.hpp>

#include "deepesn/errors.hpp"

namespace deepesn {

namespace detail {
inline void check_pair(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (y.size() != y_hat.size()) throw DimensionError("metric inputs must have equal length");
  if (y.size() < 1) throw std::invalid_argument("metric inputs must be nonempty");
}
}  // namespace detail

inline double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  detail::check_pair(y, y_hat);
  return std::sqrt((y - y_hat).squaredNorm() / static_cast<double>(y.size()));
}

/// RMSE normalized by the target's deviation from its mean.
inline double nrmse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  detail::check_pair(y, y_hat);
  const double denom = (y.array() - y.mean()).matrix().squaredNorm();
  if (denom <= 0.0) throw std::invalid_argument("nrmse undefined for constant targets");
  return std::sqrt((y - y_hat).squaredNorm() / denom);
}

/// Mean absolute percentage error, in percent. `offset` is added to both
/// series first (used for series that touch zero).
inline double mape(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat, double offset = 0.0) {
  detail::check_pair(y, y_hat);
  double acc = 0.0;
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    const double denom = y(t) + offset;
    if (denom == 0.0) throw std::invalid_argument("mape denominator zero at step " + std::to_string(t));
    acc += std::abs(y(t) - y_hat(t)) / denom;
  }
  return acc / static_cast<double>(y.size()) * 100.0;
}

struct MetricReport {
  double rmse = 0.0;
  double nrmse = 0.0;
  double mape = 0.0;
  Eigen::Index n = 0;
  double offset_applied = 0.0;
};

inline MetricReport evaluate(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat,
                             double mape_offset = 0.0) {
  MetricReport r;
  r.rmse = rmse(y, y_hat);
  r.nrmse = nrmse(y, y_hat);
  r.mape = mape(y, y_hat, mape_offset);
  r.n = y.size();
  r.offset_applied = mape_offset;
  return r;
}

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"rmse", r.rmse},
       {"nrmse", r.nrmse},
       {"mape", r.mape},
       {"n", r.n},
       {"offset_applied", r.offset_applied}};
}

}  // namespace deepesn
