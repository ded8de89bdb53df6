#ifndef CHIRPLINK_AUTODIFF_HPP
#define CHIRPLINK_AUTODIFF_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace chirplink {

// Row-major 2D tensor. 1D data travels as 1 x n.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  int size() const { return rows * cols; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols + c];
  }
  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const {
    return v.data() + static_cast<std::size_t>(r) * cols;
  }
};

struct Var {
  int id = -1;
  int rows = 0;
  int cols = 0;
};

// Reverse-mode tape. A fresh graph is built every forward pass; backward()
// walks the nodes in reverse push order, so parents always precede
// children. Gradients accumulate, which makes shared subexpressions safe.
class Tape {
 public:
  Var constant(Tensor value);
  Var param(const Tensor& value);  // same as constant; named for intent

  // Elementwise on equal shapes.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);

  // Broadcast a 1x1 scalar variable over a tensor variable.
  Var add_bc(Var x, Var s);
  Var sub_bc(Var x, Var s);
  Var mul_bc(Var x, Var s);
  Var div_bc(Var x, Var s);

  // Compile-time scalars.
  Var scale(Var x, double c);
  Var offset(Var x, double c);

  Var relu(Var x);
  Var tanh_t(Var x);
  Var logistic(Var x);
  Var sin_t(Var x);
  Var cos_t(Var x);
  Var sqrt_t(Var x);
  Var square(Var x);
  Var clamp(Var x, double lo, double hi);
  Var smooth_quantize(Var x, int bits, int fourier_order);

  // Dilated 1D convolution, x: [Cin x T], w: [Cout x Cin*K], b: [Cout x 1].
  // causal aligns the last tap with the current sample (left zero pad);
  // otherwise taps are centered (odd K required). Output [Cout x T].
  Var conv1d(Var x, Var w, Var b, int kernel, int dilation, bool causal);

  // Per-row centered FIR with fixed (non-learned) odd-length taps.
  Var conv_fixed(Var x, std::vector<double> taps);

  // out[n, :] = table[idx[n], :]; backward scatter-adds.
  Var rows_select(Var table, std::vector<int> idx);

  Var reshape(Var x, int rows, int cols);
  Var slice_cols(Var x, int c0, int c1);
  Var upsample_hold(Var x, int factor);     // [R x T] -> [R x T*factor]
  Var downsample_keep0(Var x, int factor);  // keeps sample 0 of each group

  // y[0] = 0, y[t] = y[t-1] + dt*(x[t-1]+x[t])/2, per row.
  Var cumtrapz(Var x, double dt);

  Var mean_all(Var x);  // 1x1
  Var sum_all(Var x);   // 1x1

  // x: [N x F], w: [H x F], b: [H x 1] -> [N x H] = x w^T + b.
  Var linear(Var x, Var w, Var b);

  // Mean cross entropy of row-wise softmax against integer labels; 1x1.
  Var softmax_ce(Var logits, std::vector<int> labels);

  void backward(Var loss);
  const Tensor& value(Var x) const { return nodes_[x.id].value; }
  const Tensor& grad(Var x) const { return nodes_[x.id].grad; }

  // Plumbing for the op implementations; not part of the model-facing API.
  struct Node {
    Tensor value;
    Tensor grad;  // sized lazily in backward
    std::function<void(Tape&, int)> pull;  // (tape, own node id)
  };
  using Pull = std::function<void(Tape&, int)>;
  Var push(Tensor value, Pull pull);
  Var push_unary(int xid, Tensor out, std::function<double(double, double)> df);
  Tensor& grad_buf(int id);
  Node& node(int id) { return nodes_[id]; }

 private:
  std::vector<Node> nodes_;
};

// Row-wise softmax of a plain tensor, for evaluation paths.
Tensor softmax_rows(const Tensor& logits);

// One learned tensor plus its Adam state.
struct AdamParam {
  Tensor value;
  Tensor m;
  Tensor v;
  AdamParam() : AdamParam(Tensor(0, 0)) {}
  explicit AdamParam(Tensor init)
      : value(std::move(init)),
        m(value.rows, value.cols),
        v(value.rows, value.cols) {}
};

class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}
  void step(AdamParam& p, const Tensor& grad);
  void next_step() { ++t_; }  // call once per optimization step
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 1;
};

}  // namespace chirplink

#endif  // CHIRPLINK_AUTODIFF_HPP
