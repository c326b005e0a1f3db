#include "bcn/autograd.hpp"

#include <cmath>

#include "bcn/error.hpp"

namespace bcn {

Var Tape::push(Tensor value, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value)); }

Var Tape::param(const Tensor& value, Tensor& grad) {
  Node n;
  n.ref = &value;
  n.sink = &grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.ref ? *n.ref : n.value;
}

Tensor& Tape::g(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.data.empty()) {
    const Tensor& val = n.ref ? *n.ref : n.value;
    n.grad = Tensor(val.shape, 0.0);
  }
  return n.grad;
}

void Tape::backward(Var out) {
  if (value(out).size() != 1) throw Error(Errc::ShapeMismatch, "backward needs a scalar output");
  g(out).data[0] = 1.0;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.data.empty()) continue;
    if (n.back) n.back();
    if (n.sink) add_inplace(*n.sink, n.grad);
  }
}

Var Tape::matmul(Var a, Var b) {
  Var out = push(bcn::matmul(value(a), value(b)));
  nodes_.back().back = [this, a, b, out] {
    const Tensor& go = grad(out);
    add_inplace(g(a), bcn::matmul_nt(go, value(b)));
    add_inplace(g(b), bcn::matmul_tn(value(a), go));
  };
  return out;
}

Var Tape::matmul_nt(Var a, Var b) {
  Var out = push(bcn::matmul_nt(value(a), value(b)));
  nodes_.back().back = [this, a, b, out] {
    const Tensor& go = grad(out);
    add_inplace(g(a), bcn::matmul(go, value(b)));
    add_inplace(g(b), bcn::matmul_tn(go, value(a)));
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  Tensor v = value(a);
  add_inplace(v, value(b));
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, b, out] {
    add_inplace(g(a), grad(out));
    add_inplace(g(b), grad(out));
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  Tensor v = value(a);
  add_inplace(v, value(b), -1.0);
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, b, out] {
    add_inplace(g(a), grad(out));
    add_inplace(g(b), grad(out), -1.0);
  };
  return out;
}

Var Tape::add_bias(Var a, Var bias) {
  Tensor v = value(a);
  add_bias_inplace(v, value(bias));
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, bias, out] {
    const Tensor& go = grad(out);
    add_inplace(g(a), go);
    Tensor& gb = g(bias);
    for (int i = 0; i < go.rows(); ++i) {
      for (int j = 0; j < go.cols(); ++j) gb.data[static_cast<std::size_t>(j)] += go.at(i, j);
    }
  };
  return out;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.size() != vb.size()) throw Error(Errc::ShapeMismatch, "elementwise product of unequal shapes");
  Tensor v = va;
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] *= vb.data[i];
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, b, out] {
    const Tensor& go = grad(out);
    Tensor& ga = g(a);
    Tensor& gb = g(b);
    const Tensor& va2 = value(a);
    const Tensor& vb2 = value(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga.data[i] += go.data[i] * vb2.data[i];
      gb.data[i] += go.data[i] * va2.data[i];
    }
  };
  return out;
}

Var Tape::scale(Var a, double s) {
  Tensor v = value(a);
  for (double& x : v.data) x *= s;
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, s, out] { add_inplace(g(a), grad(out), s); };
  return out;
}

Var Tape::gelu(Var a) {
  Var out = push(bcn::gelu(value(a)));
  nodes_.back().back = [this, a, out] {
    const Tensor& go = grad(out);
    const Tensor& x = value(a);
    Tensor& ga = g(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i] * gelu_grad(x.data[i]);
  };
  return out;
}

Var Tape::softmax_rows(Var a, const Mask& mask) {
  Var out = push(bcn::softmax_rows(value(a), mask));
  nodes_.back().back = [this, a, out] {
    const Tensor& go = grad(out);
    const Tensor& y = value(out);
    Tensor& ga = g(a);
    for (int i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < y.cols(); ++j) dot += go.at(i, j) * y.at(i, j);
      for (int j = 0; j < y.cols(); ++j) ga.at(i, j) += y.at(i, j) * (go.at(i, j) - dot);
    }
  };
  return out;
}

namespace {

// Gradient of plain row normalization given dL/dxhat.
void layer_norm_back(const Tensor& x, const Tensor& dxhat, Tensor& dx) {
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
    double mean_d = 0.0, mean_dx = 0.0;
    for (int j = 0; j < n; ++j) {
      const double xhat = (xi[j] - mu) * inv;
      mean_d += dxhat.at(i, j);
      mean_dx += dxhat.at(i, j) * xhat;
    }
    mean_d /= n;
    mean_dx /= n;
    for (int j = 0; j < n; ++j) {
      const double xhat = (xi[j] - mu) * inv;
      dx.at(i, j) += inv * (dxhat.at(i, j) - mean_d - xhat * mean_dx);
    }
  }
}

}  // namespace

Var Tape::layer_norm(Var a, Var gamma, Var beta) {
  Var out = push(layer_norm_rows(value(a), &value(gamma), &value(beta)));
  nodes_.back().back = [this, a, gamma, beta, out] {
    const Tensor& go = grad(out);
    const Tensor& x = value(a);
    const Tensor xhat = layer_norm_rows(x, nullptr, nullptr);
    const Tensor& gm = value(gamma);
    Tensor& gg = g(gamma);
    Tensor& gb = g(beta);
    Tensor dxhat = go;
    for (int i = 0; i < go.rows(); ++i) {
      for (int j = 0; j < go.cols(); ++j) {
        const auto sj = static_cast<std::size_t>(j);
        gg.data[sj] += go.at(i, j) * xhat.at(i, j);
        gb.data[sj] += go.at(i, j);
        dxhat.at(i, j) *= gm.data[sj];
      }
    }
    layer_norm_back(x, dxhat, g(a));
  };
  return out;
}

Var Tape::layer_norm_plain(Var a) {
  Var out = push(layer_norm_rows(value(a), nullptr, nullptr));
  nodes_.back().back = [this, a, out] { layer_norm_back(value(a), grad(out), g(a)); };
  return out;
}

Var Tape::embedding(Var table, std::vector<int> ids) {
  const Tensor& tb = value(table);
  Tensor v = Tensor::matrix(static_cast<int>(ids.size()), tb.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tb.rows()) {
      throw Error(Errc::IdOutOfVocab, "embedding id " + std::to_string(ids[r]) + " outside table of " +
                                          std::to_string(tb.rows()));
    }
    std::copy(tb.row(ids[r]), tb.row(ids[r]) + tb.cols(), v.row(static_cast<int>(r)));
  }
  Var out = push(std::move(v));
  nodes_.back().back = [this, table, ids = std::move(ids), out] {
    const Tensor& go = grad(out);
    Tensor& gt = g(table);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      double* dst = gt.row(ids[r]);
      const double* src = go.row(static_cast<int>(r));
      for (int j = 0; j < go.cols(); ++j) dst[j] += src[j];
    }
  };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  const int rows = value(parts.front()).rows();
  int cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw Error(Errc::ShapeMismatch, "concat_cols row mismatch");
    cols += value(p).cols();
  }
  Tensor v = Tensor::matrix(rows, cols);
  int c0 = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    for (int i = 0; i < rows; ++i) std::copy(pv.row(i), pv.row(i) + pv.cols(), v.row(i) + c0);
    c0 += pv.cols();
  }
  Var out = push(std::move(v));
  nodes_.back().back = [this, parts, out] {
    const Tensor& go = grad(out);
    int off = 0;
    for (Var p : parts) {
      Tensor& gp = g(p);
      for (int i = 0; i < gp.rows(); ++i) {
        for (int j = 0; j < gp.cols(); ++j) gp.at(i, j) += go.at(i, off + j);
      }
      off += gp.cols();
    }
  };
  return out;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Tensor& av = value(a);
  if (c0 < 0 || c1 > av.cols() || c0 >= c1) throw Error(Errc::ShapeMismatch, "slice_cols out of range");
  Tensor v = Tensor::matrix(av.rows(), c1 - c0);
  for (int i = 0; i < av.rows(); ++i) std::copy(av.row(i) + c0, av.row(i) + c1, v.row(i));
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, c0, out] {
    const Tensor& go = grad(out);
    Tensor& ga = g(a);
    for (int i = 0; i < go.rows(); ++i) {
      for (int j = 0; j < go.cols(); ++j) ga.at(i, c0 + j) += go.at(i, j);
    }
  };
  return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  const int cols = value(parts.front()).cols();
  int rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw Error(Errc::ShapeMismatch, "concat_rows column mismatch");
    rows += value(p).rows();
  }
  Tensor v = Tensor::matrix(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    std::copy(pv.data.begin(), pv.data.end(), v.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += pv.size();
  }
  Var out = push(std::move(v));
  nodes_.back().back = [this, parts, out] {
    const Tensor& go = grad(out);
    std::size_t o = 0;
    for (Var p : parts) {
      Tensor& gp = g(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp.data[i] += go.data[o + i];
      o += gp.size();
    }
  };
  return out;
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Tensor& av = value(a);
  Tensor v = Tensor::matrix(static_cast<int>(rows.size()), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= av.rows()) throw Error(Errc::ShapeMismatch, "gather_rows index out of range");
    std::copy(av.row(rows[r]), av.row(rows[r]) + av.cols(), v.row(static_cast<int>(r)));
  }
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, rows = std::move(rows), out] {
    const Tensor& go = grad(out);
    Tensor& ga = g(a);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int j = 0; j < go.cols(); ++j) ga.at(rows[r], j) += go.at(static_cast<int>(r), j);
    }
  };
  return out;
}

Var Tape::scatter_rows(Var base, std::vector<int> rows, Var src) {
  Tensor v = value(base);
  const Tensor& sv = value(src);
  if (sv.rows() != static_cast<int>(rows.size()) || sv.cols() != v.cols()) {
    throw Error(Errc::ShapeMismatch, "scatter_rows shape mismatch");
  }
  std::vector<char> replaced(static_cast<std::size_t>(v.rows()), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= v.rows()) throw Error(Errc::ShapeMismatch, "scatter_rows index out of range");
    std::copy(sv.row(static_cast<int>(r)), sv.row(static_cast<int>(r)) + sv.cols(), v.row(rows[r]));
    replaced[static_cast<std::size_t>(rows[r])] = 1;
  }
  Var out = push(std::move(v));
  nodes_.back().back = [this, base, src, rows = std::move(rows), replaced = std::move(replaced), out] {
    const Tensor& go = grad(out);
    Tensor& gb = g(base);
    for (int i = 0; i < go.rows(); ++i) {
      if (replaced[static_cast<std::size_t>(i)]) continue;
      for (int j = 0; j < go.cols(); ++j) gb.at(i, j) += go.at(i, j);
    }
    Tensor& gs = g(src);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int j = 0; j < go.cols(); ++j) gs.at(static_cast<int>(r), j) += go.at(rows[r], j);
    }
  };
  return out;
}

Var Tape::expand(Var s, std::vector<int> index) {
  const Tensor& sv = value(s);
  const int n = static_cast<int>(index.size());
  for (int b : index) {
    if (b < 0 || b >= sv.rows() || b >= sv.cols()) {
      throw Error(Errc::BarIndexOutOfRange, "bar " + std::to_string(b) + " outside " + std::to_string(sv.rows()));
    }
  }
  Tensor v = Tensor::matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) v.at(i, j) = sv.at(index[static_cast<std::size_t>(i)], index[static_cast<std::size_t>(j)]);
  }
  Var out = push(std::move(v));
  nodes_.back().back = [this, s, index = std::move(index), out] {
    const Tensor& go = grad(out);
    Tensor& gs = g(s);
    const int m = static_cast<int>(index.size());
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) gs.at(index[static_cast<std::size_t>(i)], index[static_cast<std::size_t>(j)]) += go.at(i, j);
    }
  };
  return out;
}

Var Tape::reshape(Var a, int rows, int cols) {
  Tensor v = value(a);
  if (v.size() != static_cast<std::size_t>(rows) * cols) throw Error(Errc::ShapeMismatch, "reshape size mismatch");
  v.shape = {rows, cols};
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, out] {
    Tensor& ga = g(a);
    const Tensor& go = grad(out);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += go.data[i];
  };
  return out;
}

Var Tape::mean_rows(Var a) {
  const Tensor& av = value(a);
  Tensor v = Tensor::matrix(1, av.cols());
  for (int i = 0; i < av.rows(); ++i) {
    for (int j = 0; j < av.cols(); ++j) v.data[static_cast<std::size_t>(j)] += av.at(i, j);
  }
  for (double& x : v.data) x /= av.rows();
  Var out = push(std::move(v));
  nodes_.back().back = [this, a, out] {
    const Tensor& go = grad(out);
    Tensor& ga = g(a);
    const double inv = 1.0 / ga.rows();
    for (int i = 0; i < ga.rows(); ++i) {
      for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += go.data[static_cast<std::size_t>(j)] * inv;
    }
  };
  return out;
}

Var Tape::mean_square(Var a) {
  const Tensor& av = value(a);
  double s = 0.0;
  for (double x : av.data) s += x * x;
  Var out = push(Tensor::from(1, 1, {s / static_cast<double>(av.size())}));
  nodes_.back().back = [this, a, out] {
    const double go = grad(out).data[0];
    Tensor& ga = g(a);
    const Tensor& x = value(a);
    const double k = 2.0 * go / static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ga.data[i] += k * x.data[i];
  };
  return out;
}

Var Tape::cross_entropy_sum(Var logits, std::vector<int> targets) {
  const Tensor& lv = value(logits);
  if (static_cast<int>(targets.size()) != lv.rows()) throw Error(Errc::ShapeMismatch, "one target per row");
  Tensor probs = Tensor::matrix(lv.rows(), lv.cols());
  double loss = 0.0;
  for (int i = 0; i < lv.rows(); ++i) {
    const int tgt = targets[static_cast<std::size_t>(i)];
    if (tgt < 0) continue;
    if (tgt >= lv.cols()) throw Error(Errc::IdOutOfVocab, "target id " + std::to_string(tgt));
    const double* r = lv.row(i);
    double mx = r[0];
    for (int j = 1; j < lv.cols(); ++j) mx = std::max(mx, r[j]);
    double s = 0.0;
    for (int j = 0; j < lv.cols(); ++j) s += std::exp(r[j] - mx);
    const double lse = mx + std::log(s);
    loss += lse - r[tgt];
    for (int j = 0; j < lv.cols(); ++j) probs.at(i, j) = std::exp(r[j] - lse);
  }
  Var out = push(Tensor::from(1, 1, {loss}));
  nodes_.back().back = [this, logits, targets = std::move(targets), probs = std::move(probs), out] {
    const double go = grad(out).data[0];
    Tensor& gl = g(logits);
    for (int i = 0; i < gl.rows(); ++i) {
      const int tgt = targets[static_cast<std::size_t>(i)];
      if (tgt < 0) continue;
      for (int j = 0; j < gl.cols(); ++j) gl.at(i, j) += go * probs.at(i, j);
      gl.at(i, tgt) -= go;
    }
  };
  return out;
}

Var Tape::stop_gradient(Var a) { return push(value(a)); }

Var Tape::straight_through(Var input, Var quantized) {
  if (value(input).size() != value(quantized).size()) throw Error(Errc::ShapeMismatch, "straight-through shapes differ");
  Tensor v = value(quantized);
  v.shape = value(input).shape;
  Var out = push(std::move(v));
  nodes_.back().back = [this, input, out] { add_inplace(g(input), grad(out)); };
  return out;
}

}  // namespace bcn
