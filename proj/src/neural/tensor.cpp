#include "bcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "bcn/error.hpp"

namespace bcn {

namespace {

void need(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ShapeMismatch, what);
}

std::string dims(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

}  // namespace

Tensor::Tensor(std::vector<int> dims_in, double fill) : shape(std::move(dims_in)) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error(Errc::ShapeMismatch, "negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  data.assign(n, fill);
}

Tensor Tensor::from(int rows, int cols, std::vector<double> values) {
  need(values.size() == static_cast<std::size_t>(rows) * cols, "value count does not match shape");
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(values);
  return t;
}

int Tensor::rows() const {
  if (shape.empty()) return 0;
  int r = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
  return r;
}

void Tensor::check_finite(const std::string& where) const {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(Errc::NonFinite, where + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  need(a.cols() == b.rows(), "matmul " + dims(a) + " by " + dims(b));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  for (int i = 0; i < m; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b.row(p);
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  need(a.cols() == b.cols(), "matmul_nt " + dims(a) + " by " + dims(b));
  const int k = a.cols(), n = b.rows();
  Tensor bt = Tensor::matrix(k, n);
  for (int j = 0; j < n; ++j) {
    const double* bj = b.row(j);
    for (int p = 0; p < k; ++p) bt.at(p, j) = bj[p];
  }
  return matmul(a, bt);
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  need(a.rows() == b.rows(), "matmul_tn " + dims(a) + " by " + dims(b));
  const int m = a.cols(), k = a.rows(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  for (int p = 0; p < k; ++p) {
    const double* ap = a.row(p);
    const double* bp = b.row(p);
    for (int i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c.row(i);
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

void add_inplace(Tensor& a, const Tensor& b, double scale) {
  need(a.size() == b.size(), "add " + dims(a) + " and " + dims(b));
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += scale * b.data[i];
}

void add_bias_inplace(Tensor& a, const Tensor& bias) {
  need(static_cast<int>(bias.size()) == a.cols(), "bias width " + std::to_string(bias.size()) + " vs " + dims(a));
  for (int i = 0; i < a.rows(); ++i) {
    double* r = a.row(i);
    for (int j = 0; j < a.cols(); ++j) r[j] += bias.data[static_cast<std::size_t>(j)];
  }
}

Tensor softmax_rows(const Tensor& x, const Mask& mask) {
  Tensor y = Tensor::matrix(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < x.cols(); ++j) {
      if (mask.allowed(i, j)) mx = std::max(mx, xi[j]);
    }
    if (!std::isfinite(mx)) throw Error(Errc::NonFinite, "softmax row " + std::to_string(i) + " has no finite entry");
    double s = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      if (mask.allowed(i, j)) {
        yi[j] = std::exp(xi[j] - mx);
        s += yi[j];
      }
    }
    for (int j = 0; j < x.cols(); ++j) yi[j] /= s;
  }
  return y;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor* gamma, const Tensor* beta) {
  Tensor y = Tensor::matrix(x.rows(), x.cols());
  const int n = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i);
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += xi[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    double* yi = y.row(i);
    for (int j = 0; j < n; ++j) {
      double v = (xi[j] - mu) * inv;
      if (gamma) v = v * gamma->data[static_cast<std::size_t>(j)] + beta->data[static_cast<std::size_t>(j)];
      yi[j] = v;
    }
  }
  return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * pdf;
}

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = gelu(v);
  return y;
}

Tensor sinusoidal(int first, int n, int d) {
  Tensor pe = Tensor::matrix(n, d);
  for (int r = 0; r < n; ++r) {
    const double pos = first + r;
    for (int j = 0; j < d; j += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(j) / d);
      pe.at(r, j) = std::sin(pos * freq);
      if (j + 1 < d) pe.at(r, j + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  need(a.size() == b.size(), "compare " + dims(a) + " and " + dims(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace bcn
