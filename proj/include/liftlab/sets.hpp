#pragma once

#include <string>
#include <vector>

#include "liftlab/matrix.hpp"

namespace liftlab {

// The two finite index sets X subset R^n and Y subset R^m_dim with cached
// Euclidean norms. Cardinalities may differ.
struct IndexedSets {
  int n = 0;
  int m_dim = 0;
  std::vector<std::vector<double>> X;
  std::vector<std::vector<double>> Y;
  std::vector<double> x_norms;
  std::vector<double> y_norms;

  int lx() const { return static_cast<int>(X.size()); }
  int ly() const { return static_cast<int>(Y.size()); }

  static IndexedSets from_vectors(std::vector<std::vector<double>> x,
                                  std::vector<std::vector<double>> y);

  // File format: header line "n m_dim l_x l_y", then l_x rows of n values,
  // then l_y rows of m_dim values. Whitespace- or comma-separated.
  static IndexedSets load(const std::string& path);
};

// Gram matrix of pairwise inner products v_i^T v_j.
Matrix gram_matrix(const std::vector<std::vector<double>>& vs);

}  // namespace liftlab
