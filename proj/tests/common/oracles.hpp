#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "bcn/model.hpp"
#include "bcn/tensor.hpp"

namespace bcn::test {

inline Tensor random_tensor(Lcg& g, int rows, int cols, double scale = 1.0) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& x : t.data) x = g.real(-scale, scale);
  return t;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::matrix(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  Tensor t = Tensor::matrix(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

// Plain causal multi-head attention from the parameter values.
inline Tensor oracle_attention(const ParamStore& ps, const std::string& p, const Tensor& x, int heads) {
  auto lin = [&](const std::string& m) {
    Tensor y = naive_matmul(x, ps.at(p + ".w" + m).value);
    for (int r = 0; r < y.rows(); ++r) {
      for (int c = 0; c < y.cols(); ++c) y.at(r, c) += ps.at(p + ".b" + m).value.at(0, c);
    }
    return y;
  };
  Tensor q = lin("q"), k = lin("k"), v = lin("v");
  const int T = x.rows(), d = x.cols(), dh = d / heads;
  Tensor o = Tensor::matrix(T, d);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < T; ++i) {
      std::vector<double> w(static_cast<std::size_t>(i + 1));
      double mx = -1e300;
      for (int j = 0; j <= i; ++j) {
        double s = 0;
        for (int c = h * dh; c < (h + 1) * dh; ++c) s += q.at(i, c) * k.at(j, c);
        w[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, w[static_cast<std::size_t>(j)]);
      }
      double z = 0;
      for (double& e : w) z += (e = std::exp(e - mx));
      for (int c = h * dh; c < (h + 1) * dh; ++c) {
        double s = 0;
        for (int j = 0; j <= i; ++j) s += w[static_cast<std::size_t>(j)] / z * v.at(j, c);
        o.at(i, c) = s;
      }
    }
  }
  Tensor out = naive_matmul(o, ps.at(p + ".wo").value);
  for (int r = 0; r < T; ++r) {
    for (int c = 0; c < d; ++c) out.at(r, c) += ps.at(p + ".bo").value.at(0, c);
  }
  return out;
}

inline std::vector<double> softmax(const double* row, int n) {
  std::vector<double> p(row, row + n);
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0;
  for (double& x : p) z += (x = std::exp(x - mx));
  for (double& x : p) x /= z;
  return p;
}

// Nearest codebook row per group by exhaustive scan, ties to the lower row.
inline VqCodes oracle_vq(const Tensor& z, const Tensor& book) {
  const int w = static_cast<int>(z.size()) / kVqGroups;
  VqCodes codes{};
  for (int g = 0; g < kVqGroups; ++g) {
    double best = INFINITY;
    for (int k = 0; k < book.rows(); ++k) {
      double d = 0;
      for (int c = 0; c < w; ++c) d += std::pow(z.data[static_cast<std::size_t>(g * w + c)] - book.at(k, c), 2);
      if (d < best) best = d, codes[static_cast<std::size_t>(g)] = k;
    }
  }
  return codes;
}

}  // namespace bcn::test
