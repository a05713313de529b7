#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mixmort/core.hpp"

namespace mixmort {

inline Eigen::MatrixXd to_matrix(const FeatureMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m.at(r, c);
  return out;
}

inline Eigen::MatrixXd rows_subset(const Eigen::MatrixXd& m,
                                   const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <typename T>
inline std::vector<T> subset(const std::vector<T>& v,
                             const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

} // namespace mixmort
