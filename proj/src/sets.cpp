#include "liftlab/sets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "liftlab/error.hpp"

namespace liftlab {

namespace {

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

IndexedSets IndexedSets::from_vectors(std::vector<std::vector<double>> x,
                                      std::vector<std::vector<double>> y) {
  if (x.empty() || y.empty()) {
    fail(ErrorCode::kDimensionMismatch, "both index sets must be nonempty");
  }
  IndexedSets out;
  out.n = static_cast<int>(x[0].size());
  out.m_dim = static_cast<int>(y[0].size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (static_cast<int>(x[i].size()) != out.n) {
      fail(ErrorCode::kDimensionMismatch,
           "X member " + std::to_string(i) + " has dimension " +
               std::to_string(x[i].size()) + ", expected " + std::to_string(out.n));
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (static_cast<int>(y[i].size()) != out.m_dim) {
      fail(ErrorCode::kDimensionMismatch,
           "Y member " + std::to_string(i) + " has dimension " +
               std::to_string(y[i].size()) + ", expected " + std::to_string(out.m_dim));
    }
  }
  out.X = std::move(x);
  out.Y = std::move(y);
  out.x_norms.reserve(out.X.size());
  out.y_norms.reserve(out.Y.size());
  bool warned = false;
  for (const auto& v : out.X) out.x_norms.push_back(norm2(v));
  for (const auto& v : out.Y) out.y_norms.push_back(norm2(v));
  for (double nx : out.x_norms) {
    if (nx == 0.0 && !warned) {
      std::fprintf(stderr, "liftlab: warning: index set contains a zero-norm member\n");
      warned = true;
    }
  }
  for (double ny : out.y_norms) {
    if (ny == 0.0 && !warned) {
      std::fprintf(stderr, "liftlab: warning: index set contains a zero-norm member\n");
      warned = true;
    }
  }
  return out;
}

IndexedSets IndexedSets::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open sets file: " + path);

  auto next_line = [&in, &path](std::string& line, int& lineno) {
    while (std::getline(in, line)) {
      ++lineno;
      std::replace(line.begin(), line.end(), ',', ' ');
      if (line.find_first_not_of(" \t\r\n") != std::string::npos && line[0] != '#') return true;
    }
    fail(ErrorCode::kIoError, "unexpected end of sets file: " + path);
    return false;
  };

  int lineno = 0;
  std::string line;
  next_line(line, lineno);
  std::istringstream header(line);
  long n = 0, m_dim = 0, lx = 0, ly = 0;
  if (!(header >> n >> m_dim >> lx >> ly) || n < 1 || m_dim < 1 || lx < 1 || ly < 1) {
    fail(ErrorCode::kIoError,
         path + ":" + std::to_string(lineno) + ": bad header, want 'n m_dim l_x l_y'");
  }

  auto read_rows = [&](long count, long dim) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
      next_line(line, lineno);
      std::istringstream ss(line);
      std::vector<double> row(static_cast<std::size_t>(dim));
      for (long j = 0; j < dim; ++j) {
        if (!(ss >> row[static_cast<std::size_t>(j)])) {
          fail(ErrorCode::kIoError, path + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(dim) + " values in row");
        }
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };

  auto x = read_rows(lx, n);
  auto y = read_rows(ly, m_dim);
  return from_vectors(std::move(x), std::move(y));
}

Matrix gram_matrix(const std::vector<std::vector<double>>& vs) {
  const std::size_t count = vs.size();
  Matrix g(count, count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i; j < count; ++j) {
      double acc = 0.0;
      for (std::size_t d = 0; d < vs[i].size(); ++d) acc += vs[i][d] * vs[j][d];
      g(i, j) = acc;
      g(j, i) = acc;
    }
  }
  return g;
}

}  // namespace liftlab
