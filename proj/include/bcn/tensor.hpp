#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bcn {

// Dense row-major array of doubles. Kernels below treat every tensor as a
// matrix: cols() is the last dimension, rows() the product of the others.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);
  static Tensor matrix(int rows, int cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
  static Tensor from(int rows, int cols, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  int rows() const;
  int cols() const { return shape.empty() ? 0 : shape.back(); }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols(); }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols(); }

  // NonFinite if any entry is NaN or infinite.
  void check_finite(const std::string& where) const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Which (query, key) pairs attention may use. Causal allows key j for query
// row i when j <= i + offset (offset > 0 when the queries are the last rows
// of a longer sequence). Block allows pairs in the same group of `group` rows.
struct Mask {
  enum Kind { None, Causal, Block } kind = None;
  int offset = 0;
  int group = 1;

  bool allowed(int i, int j) const {
    switch (kind) {
      case Causal: return j <= i + offset;
      case Block: return i / group == j / group;
      case None: break;
    }
    return true;
  }
  static Mask causal(int offset = 0) { return {Causal, offset, 1}; }
  static Mask block(int group) { return {Block, 0, group}; }
};

inline constexpr double kLayerNormEps = 1e-5;

// C = A B, C = A B^T, C = A^T B.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b, double scale = 1.0);
void add_bias_inplace(Tensor& a, const Tensor& bias);
Tensor softmax_rows(const Tensor& x, const Mask& mask = {});
// Row-wise normalization; gamma/beta may be null for the plain form.
Tensor layer_norm_rows(const Tensor& x, const Tensor* gamma, const Tensor* beta);
double gelu(double x);
double gelu_grad(double x);
Tensor gelu(const Tensor& x);

// Sinusoidal position encoding rows for positions [first, first + n).
Tensor sinusoidal(int first, int n, int d);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace bcn
