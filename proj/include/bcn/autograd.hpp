#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "bcn/tensor.hpp"

namespace bcn {

struct Var {
  int id = -1;
};

// Reverse-mode tape. Values are computed eagerly; backward() walks the nodes
// in reverse creation order and finally adds parameter gradients into the
// tensors registered with param().
class Tape {
 public:
  Var constant(Tensor value);
  // `value` and `grad` must outlive the tape.
  Var param(const Tensor& value, Tensor& grad);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(out)/d(out) = 1 for a 1x1 `out`.
  void backward(Var out);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_bias(Var a, Var bias);  // bias is 1 x cols
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var gelu(Var a);
  Var softmax_rows(Var a, const Mask& mask);
  Var layer_norm(Var a, Var gamma, Var beta);
  Var layer_norm_plain(Var a);
  Var embedding(Var table, std::vector<int> ids);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int c0, int c1);
  Var concat_rows(const std::vector<Var>& parts);
  Var gather_rows(Var a, std::vector<int> rows);
  // Copy of `base` with rows `rows` replaced by the rows of `src`.
  Var scatter_rows(Var base, std::vector<int> rows, Var src);
  // out[t1][t2] = s[index[t1]][index[t2]]
  Var expand(Var s, std::vector<int> index);
  Var reshape(Var a, int rows, int cols);
  Var mean_rows(Var a);
  Var mean_square(Var a);
  // Sum over rows with target >= 0 of -log softmax(row)[target].
  Var cross_entropy_sum(Var logits, std::vector<int> targets);
  Var stop_gradient(Var a);
  // Forward value of `quantized`, gradient routed to `input` unchanged.
  Var straight_through(Var input, Var quantized);

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    std::function<void()> back;
  };

  Var push(Tensor value, std::function<void()> back = {});
  Tensor& g(Var v);  // gradient buffer, allocated on first use
  bool has_grad(Var v) const { return !nodes_[static_cast<std::size_t>(v.id)].grad.data.empty(); }

  std::deque<Node> nodes_;
};

}  // namespace bcn
