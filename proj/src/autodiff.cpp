#include "chirplink/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "chirplink/dsp.hpp"
#include "chirplink/errors.hpp"

namespace chirplink {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_same(const Var& a, const Var& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeMismatch(std::string(op) + ": shapes " + std::to_string(a.rows) +
                        "x" + std::to_string(a.cols) + " vs " +
                        std::to_string(b.rows) + "x" + std::to_string(b.cols));
}

void check_scalar(const Var& s, const char* op) {
  if (s.rows != 1 || s.cols != 1)
    throw ShapeMismatch(std::string(op) + ": broadcast operand must be 1x1");
}

}  // namespace

Var Tape::push(Tensor value, Pull pull) {
  Node n;
  n.value = std::move(value);
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  return Var{id, nodes_[id].value.rows, nodes_[id].value.cols};
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.v.empty()) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::param(const Tensor& value) { return push(value, nullptr); }

Var Tape::add(Var a, Var b) {
  check_same(a, b, "add");
  Tensor out = nodes_[a.id].value;
  const Tensor& bv = nodes_[b.id].value;
  for (int k = 0; k < out.size(); ++k) out.v[k] += bv.v[k];
  const int aid = a.id, bid = b.id;
  return push(std::move(out), [aid, bid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& ga = t.grad_buf(aid);
    Tensor& gb = t.grad_buf(bid);
    for (int k = 0; k < g.size(); ++k) {
      ga.v[k] += g.v[k];
      gb.v[k] += g.v[k];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  check_same(a, b, "sub");
  Tensor out = nodes_[a.id].value;
  const Tensor& bv = nodes_[b.id].value;
  for (int k = 0; k < out.size(); ++k) out.v[k] -= bv.v[k];
  const int aid = a.id, bid = b.id;
  return push(std::move(out), [aid, bid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& ga = t.grad_buf(aid);
    Tensor& gb = t.grad_buf(bid);
    for (int k = 0; k < g.size(); ++k) {
      ga.v[k] += g.v[k];
      gb.v[k] -= g.v[k];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  check_same(a, b, "mul");
  Tensor out = nodes_[a.id].value;
  const Tensor& bv = nodes_[b.id].value;
  for (int k = 0; k < out.size(); ++k) out.v[k] *= bv.v[k];
  const int aid = a.id, bid = b.id;
  return push(std::move(out), [aid, bid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& av = t.node(aid).value;
    const Tensor& bv2 = t.node(bid).value;
    Tensor& ga = t.grad_buf(aid);
    Tensor& gb = t.grad_buf(bid);
    for (int k = 0; k < g.size(); ++k) {
      ga.v[k] += g.v[k] * bv2.v[k];
      gb.v[k] += g.v[k] * av.v[k];
    }
  });
}

Var Tape::div(Var a, Var b) {
  check_same(a, b, "div");
  Tensor out = nodes_[a.id].value;
  const Tensor& bv = nodes_[b.id].value;
  for (int k = 0; k < out.size(); ++k) out.v[k] /= bv.v[k];
  const int aid = a.id, bid = b.id;
  return push(std::move(out), [aid, bid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& y = t.node(self).value;
    const Tensor& bv2 = t.node(bid).value;
    Tensor& ga = t.grad_buf(aid);
    Tensor& gb = t.grad_buf(bid);
    for (int k = 0; k < g.size(); ++k) {
      const double inv = 1.0 / bv2.v[k];
      ga.v[k] += g.v[k] * inv;
      gb.v[k] -= g.v[k] * y.v[k] * inv;
    }
  });
}

Var Tape::add_bc(Var x, Var s) {
  check_scalar(s, "add_bc");
  Tensor out = nodes_[x.id].value;
  const double sv = nodes_[s.id].value.v[0];
  for (double& v : out.v) v += sv;
  const int xid = x.id, sid = s.id;
  return push(std::move(out), [xid, sid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    Tensor& gs = t.grad_buf(sid);
    for (int k = 0; k < g.size(); ++k) {
      gx.v[k] += g.v[k];
      gs.v[0] += g.v[k];
    }
  });
}

Var Tape::sub_bc(Var x, Var s) {
  check_scalar(s, "sub_bc");
  Tensor out = nodes_[x.id].value;
  const double sv = nodes_[s.id].value.v[0];
  for (double& v : out.v) v -= sv;
  const int xid = x.id, sid = s.id;
  return push(std::move(out), [xid, sid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    Tensor& gs = t.grad_buf(sid);
    for (int k = 0; k < g.size(); ++k) {
      gx.v[k] += g.v[k];
      gs.v[0] -= g.v[k];
    }
  });
}

Var Tape::mul_bc(Var x, Var s) {
  check_scalar(s, "mul_bc");
  Tensor out = nodes_[x.id].value;
  const double sv = nodes_[s.id].value.v[0];
  for (double& v : out.v) v *= sv;
  const int xid = x.id, sid = s.id;
  return push(std::move(out), [xid, sid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& xv = t.node(xid).value;
    const double sv2 = t.node(sid).value.v[0];
    Tensor& gx = t.grad_buf(xid);
    Tensor& gs = t.grad_buf(sid);
    for (int k = 0; k < g.size(); ++k) {
      gx.v[k] += g.v[k] * sv2;
      gs.v[0] += g.v[k] * xv.v[k];
    }
  });
}

Var Tape::div_bc(Var x, Var s) {
  check_scalar(s, "div_bc");
  Tensor out = nodes_[x.id].value;
  const double sv = nodes_[s.id].value.v[0];
  for (double& v : out.v) v /= sv;
  const int xid = x.id, sid = s.id;
  return push(std::move(out), [xid, sid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& xv = t.node(xid).value;
    const double sv2 = t.node(sid).value.v[0];
    Tensor& gx = t.grad_buf(xid);
    Tensor& gs = t.grad_buf(sid);
    const double inv = 1.0 / sv2;
    for (int k = 0; k < g.size(); ++k) {
      gx.v[k] += g.v[k] * inv;
      gs.v[0] -= g.v[k] * xv.v[k] * inv * inv;
    }
  });
}

Var Tape::scale(Var x, double c) {
  Tensor out = nodes_[x.id].value;
  for (double& v : out.v) v *= c;
  const int xid = x.id;
  return push(std::move(out), [xid, c](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    for (int k = 0; k < g.size(); ++k) gx.v[k] += g.v[k] * c;
  });
}

Var Tape::offset(Var x, double c) {
  Tensor out = nodes_[x.id].value;
  for (double& v : out.v) v += c;
  const int xid = x.id;
  return push(std::move(out), [xid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    for (int k = 0; k < g.size(); ++k) gx.v[k] += g.v[k];
  });
}

namespace {

// Shared scaffold for unary elementwise ops whose derivative is a function
// of input and output values.
template <class F, class DF>
Var unary_op(Tape& tape, Var x, F f, DF df) {
  const Tensor& xv = tape.value(x);
  Tensor out = xv;
  for (double& v : out.v) v = f(v);
  return tape.push_unary(x.id, std::move(out), std::move(df));
}

}  // namespace

Var Tape::push_unary(int xid, Tensor out,
                     std::function<double(double, double)> df) {
  return push(std::move(out), [xid, df](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& xv = t.node(xid).value;
    const Tensor& yv = t.node(self).value;
    Tensor& gx = t.grad_buf(xid);
    for (int k = 0; k < g.size(); ++k)
      gx.v[k] += g.v[k] * df(xv.v[k], yv.v[k]);
  });
}

Var Tape::relu(Var x) {
  return unary_op(
      *this, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var Tape::tanh_t(Var x) {
  return unary_op(
      *this, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Tape::logistic(Var x) {
  return unary_op(
      *this, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tape::sin_t(Var x) {
  return unary_op(
      *this, x, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

Var Tape::cos_t(Var x) {
  return unary_op(
      *this, x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Var Tape::sqrt_t(Var x) {
  return unary_op(
      *this, x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / std::max(y, 1e-150); });
}

Var Tape::square(Var x) {
  return unary_op(
      *this, x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Var Tape::clamp(Var x, double lo, double hi) {
  return unary_op(
      *this, x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return v >= lo && v <= hi ? 1.0 : 0.0; });
}

Var Tape::smooth_quantize(Var x, int bits, int fourier_order) {
  const double delta = kFullScale / double(1 << bits);
  return unary_op(
      *this, x,
      [bits, fourier_order](double v) {
        return smooth_quantize_scalar(v, bits, fourier_order);
      },
      [delta, fourier_order](double v, double) {
        if (v < -0.5 * kFullScale || v > 0.5 * kFullScale) return 0.0;
        double d = 1.0;
        for (int k = 1; k <= fourier_order; ++k)
          d += 2.0 * std::cos(2.0 * kPi * k * v / delta);
        return d;
      });
}

Var Tape::conv1d(Var x, Var w, Var b, int kernel, int dilation, bool causal) {
  const int cin = x.rows, tlen = x.cols, cout = w.rows;
  if (w.cols != cin * kernel)
    throw ShapeMismatch("conv1d: weight cols " + std::to_string(w.cols) +
                        " != cin*kernel " + std::to_string(cin * kernel));
  if (b.rows != cout || b.cols != 1)
    throw ShapeMismatch("conv1d: bias must be cout x 1");
  if (!causal && kernel % 2 == 0)
    throw ShapeMismatch("conv1d: centered mode needs odd kernel");
  const int shift = causal ? (kernel - 1) * dilation : (kernel - 1) / 2 * dilation;

  const Tensor& xv = nodes_[x.id].value;
  const Tensor& wv = nodes_[w.id].value;
  const Tensor& bv = nodes_[b.id].value;
  Tensor out(cout, tlen);
  for (int o = 0; o < cout; ++o) {
    double* orow = out.row(o);
    const double bias = bv.v[o];
    for (int t = 0; t < tlen; ++t) orow[t] = bias;
    for (int i = 0; i < cin; ++i) {
      const double* xrow = xv.row(i);
      for (int k = 0; k < kernel; ++k) {
        const double wk = wv.at(o, i * kernel + k);
        if (wk == 0.0) continue;
        const int s = k * dilation - shift;
        const int t0 = std::max(0, -s), t1 = std::min(tlen, tlen - s);
        for (int t = t0; t < t1; ++t) orow[t] += wk * xrow[t + s];
      }
    }
  }

  const int xid = x.id, wid = w.id, bid = b.id;
  return push(std::move(out), [xid, wid, bid, kernel, dilation, shift, cin,
                               cout, tlen](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& xv2 = t.node(xid).value;
    const Tensor& wv2 = t.node(wid).value;
    Tensor& gx = t.grad_buf(xid);
    Tensor& gw = t.grad_buf(wid);
    Tensor& gb = t.grad_buf(bid);
    for (int o = 0; o < cout; ++o) {
      const double* grow = g.row(o);
      double acc = 0.0;
      for (int tt = 0; tt < tlen; ++tt) acc += grow[tt];
      gb.v[o] += acc;
      for (int i = 0; i < cin; ++i) {
        const double* xrow = xv2.row(i);
        double* gxrow = gx.row(i);
        for (int k = 0; k < kernel; ++k) {
          const int s = k * dilation - shift;
          const int t0 = std::max(0, -s), t1 = std::min(tlen, tlen - s);
          const double wk = wv2.at(o, i * kernel + k);
          double wacc = 0.0;
          for (int tt = t0; tt < t1; ++tt) {
            wacc += grow[tt] * xrow[tt + s];
            gxrow[tt + s] += grow[tt] * wk;
          }
          gw.at(o, i * kernel + k) += wacc;
        }
      }
    }
  });
}

Var Tape::conv_fixed(Var x, std::vector<double> taps) {
  if (taps.size() % 2 == 0) throw ShapeMismatch("conv_fixed: taps must be odd");
  const int half = static_cast<int>(taps.size()) / 2;
  const int rows = x.rows, tlen = x.cols;
  const Tensor& xv = nodes_[x.id].value;
  Tensor out(rows, tlen);
  for (int r = 0; r < rows; ++r) {
    const double* xrow = xv.row(r);
    double* orow = out.row(r);
    for (int m = -half; m <= half; ++m) {
      const double tap = taps[m + half];
      if (tap == 0.0) continue;
      const int t0 = std::max(0, -m), t1 = std::min(tlen, tlen - m);
      for (int t = t0; t < t1; ++t) orow[t] += tap * xrow[t + m];
    }
  }
  const int xid = x.id;
  return push(std::move(out),
              [xid, taps = std::move(taps), half, rows, tlen](Tape& t, int self) {
                const Tensor& g = t.node(self).grad;
                Tensor& gx = t.grad_buf(xid);
                for (int r = 0; r < rows; ++r) {
                  const double* grow = g.row(r);
                  double* gxrow = gx.row(r);
                  for (int m = -half; m <= half; ++m) {
                    const double tap = taps[m + half];
                    if (tap == 0.0) continue;
                    const int t0 = std::max(0, m), t1 = std::min(tlen, tlen + m);
                    for (int t = t0; t < t1; ++t)
                      gxrow[t] += tap * grow[t - m];
                  }
                }
              });
}

Var Tape::rows_select(Var table, std::vector<int> idx) {
  const int cols = table.cols;
  const Tensor& tv = nodes_[table.id].value;
  Tensor out(static_cast<int>(idx.size()), cols);
  for (std::size_t n = 0; n < idx.size(); ++n) {
    if (idx[n] < 0 || idx[n] >= table.rows)
      throw ShapeMismatch("rows_select: index out of range");
    std::copy_n(tv.row(idx[n]), cols, out.row(static_cast<int>(n)));
  }
  const int tid = table.id;
  return push(std::move(out),
              [tid, idx = std::move(idx), cols](Tape& t, int self) {
                const Tensor& g = t.node(self).grad;
                Tensor& gt = t.grad_buf(tid);
                for (std::size_t n = 0; n < idx.size(); ++n) {
                  const double* grow = g.row(static_cast<int>(n));
                  double* trow = gt.row(idx[n]);
                  for (int c = 0; c < cols; ++c) trow[c] += grow[c];
                }
              });
}

Var Tape::reshape(Var x, int rows, int cols) {
  if (rows * cols != x.rows * x.cols)
    throw ShapeMismatch("reshape: element count changes");
  Tensor out = nodes_[x.id].value;
  out.rows = rows;
  out.cols = cols;
  const int xid = x.id;
  return push(std::move(out), [xid](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    for (int k = 0; k < g.size(); ++k) gx.v[k] += g.v[k];
  });
}

Var Tape::slice_cols(Var x, int c0, int c1) {
  if (c0 < 0 || c1 > x.cols || c0 >= c1)
    throw ShapeMismatch("slice_cols: bad range");
  const Tensor& xv = nodes_[x.id].value;
  Tensor out(x.rows, c1 - c0);
  for (int r = 0; r < x.rows; ++r)
    std::copy_n(xv.row(r) + c0, c1 - c0, out.row(r));
  const int xid = x.id, rows = x.rows, width = c1 - c0;
  return push(std::move(out), [xid, c0, rows, width](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    for (int r = 0; r < rows; ++r) {
      const double* grow = g.row(r);
      double* gxrow = gx.row(r) + c0;
      for (int c = 0; c < width; ++c) gxrow[c] += grow[c];
    }
  });
}

Var Tape::upsample_hold(Var x, int factor) {
  const Tensor& xv = nodes_[x.id].value;
  Tensor out(x.rows, x.cols * factor);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) {
      const double v = xv.at(r, c);
      double* o = out.row(r) + c * factor;
      for (int j = 0; j < factor; ++j) o[j] = v;
    }
  const int xid = x.id, rows = x.rows, cols = x.cols;
  return push(std::move(out), [xid, factor, rows, cols](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double* grow = g.row(r) + c * factor;
        double acc = 0.0;
        for (int j = 0; j < factor; ++j) acc += grow[j];
        gx.at(r, c) += acc;
      }
  });
}

Var Tape::downsample_keep0(Var x, int factor) {
  if (x.cols % factor != 0)
    throw ShapeMismatch("downsample_keep0: length not divisible by factor");
  const Tensor& xv = nodes_[x.id].value;
  Tensor out(x.rows, x.cols / factor);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) = xv.at(r, c * factor);
  const int xid = x.id, rows = x.rows, ocols = x.cols / factor;
  return push(std::move(out), [xid, factor, rows, ocols](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < ocols; ++c) gx.at(r, c * factor) += g.at(r, c);
  });
}

Var Tape::cumtrapz(Var x, double dt) {
  const Tensor& xv = nodes_[x.id].value;
  Tensor out(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    const double* xrow = xv.row(r);
    double* orow = out.row(r);
    orow[0] = 0.0;
    for (int c = 1; c < x.cols; ++c)
      orow[c] = orow[c - 1] + 0.5 * dt * (xrow[c - 1] + xrow[c]);
  }
  const int xid = x.id, rows = x.rows, cols = x.cols;
  return push(std::move(out), [xid, dt, rows, cols](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    Tensor& gx = t.grad_buf(xid);
    for (int r = 0; r < rows; ++r) {
      const double* grow = g.row(r);
      double* gxrow = gx.row(r);
      // suffix[c] = sum_{u >= c} grow[u]; interior samples weight dt, the
      // endpoints of each trapezoid weight dt/2.
      double suffix = 0.0;
      for (int c = cols - 1; c >= 1; --c) {
        suffix += grow[c];
        gxrow[c] += dt * (suffix - 0.5 * grow[c]);
      }
      gxrow[0] += 0.5 * dt * suffix;
    }
  });
}

Var Tape::mean_all(Var x) {
  const Tensor& xv = nodes_[x.id].value;
  double acc = 0.0;
  for (double v : xv.v) acc += v;
  Tensor out(1, 1);
  out.v[0] = acc / double(xv.size());
  const int xid = x.id;
  const double inv = 1.0 / double(xv.size());
  return push(std::move(out), [xid, inv](Tape& t, int self) {
    const double g = t.node(self).grad.v[0];
    Tensor& gx = t.grad_buf(xid);
    for (double& v : gx.v) v += g * inv;
  });
}

Var Tape::sum_all(Var x) {
  const Tensor& xv = nodes_[x.id].value;
  double acc = 0.0;
  for (double v : xv.v) acc += v;
  Tensor out(1, 1);
  out.v[0] = acc;
  const int xid = x.id;
  return push(std::move(out), [xid](Tape& t, int self) {
    const double g = t.node(self).grad.v[0];
    Tensor& gx = t.grad_buf(xid);
    for (double& v : gx.v) v += g;
  });
}

Var Tape::linear(Var x, Var w, Var b) {
  if (w.cols != x.cols)
    throw ShapeMismatch("linear: feature dims " + std::to_string(x.cols) +
                        " vs " + std::to_string(w.cols));
  if (b.rows != w.rows || b.cols != 1)
    throw ShapeMismatch("linear: bias must be H x 1");
  const int n = x.rows, f = x.cols, h = w.rows;
  const Tensor& xv = nodes_[x.id].value;
  const Tensor& wv = nodes_[w.id].value;
  const Tensor& bv = nodes_[b.id].value;
  Tensor out(n, h);
  for (int i = 0; i < n; ++i) {
    const double* xrow = xv.row(i);
    double* orow = out.row(i);
    for (int j = 0; j < h; ++j) {
      const double* wrow = wv.row(j);
      double acc = bv.v[j];
      for (int k = 0; k < f; ++k) acc += xrow[k] * wrow[k];
      orow[j] = acc;
    }
  }
  const int xid = x.id, wid = w.id, bid = b.id;
  return push(std::move(out), [xid, wid, bid, n, f, h](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& xv2 = t.node(xid).value;
    const Tensor& wv2 = t.node(wid).value;
    Tensor& gx = t.grad_buf(xid);
    Tensor& gw = t.grad_buf(wid);
    Tensor& gb = t.grad_buf(bid);
    for (int i = 0; i < n; ++i) {
      const double* grow = g.row(i);
      const double* xrow = xv2.row(i);
      double* gxrow = gx.row(i);
      for (int j = 0; j < h; ++j) {
        const double gj = grow[j];
        if (gj == 0.0) continue;
        const double* wrow = wv2.row(j);
        double* gwrow = gw.row(j);
        gb.v[j] += gj;
        for (int k = 0; k < f; ++k) {
          gxrow[k] += gj * wrow[k];
          gwrow[k] += gj * xrow[k];
        }
      }
    }
  });
}

Var Tape::softmax_ce(Var logits, std::vector<int> labels) {
  const int n = logits.rows, c = logits.cols;
  if (static_cast<int>(labels.size()) != n)
    throw ShapeMismatch("softmax_ce: one label per row required");
  const Tensor& lv = nodes_[logits.id].value;
  Tensor probs(n, c);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw ShapeMismatch("softmax_ce: label out of range");
    const double* row = lv.row(i);
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(row[j] - m);
    const double lse = m + std::log(z);
    for (int j = 0; j < c; ++j) probs.at(i, j) = std::exp(row[j] - lse);
    loss += lse - row[labels[i]];
  }
  Tensor out(1, 1);
  out.v[0] = loss / double(n);
  const int lid = logits.id;
  return push(std::move(out), [lid, labels = std::move(labels),
                               probs = std::move(probs), n, c](Tape& t, int self) {
    const double g = t.node(self).grad.v[0] / double(n);
    Tensor& gl = t.grad_buf(lid);
    for (int i = 0; i < n; ++i) {
      const double* prow = probs.row(i);
      double* grow = gl.row(i);
      for (int j = 0; j < c; ++j)
        grow[j] += g * (prow[j] - (j == labels[i] ? 1.0 : 0.0));
    }
  });
}

void Tape::backward(Var loss) {
  if (loss.rows != 1 || loss.cols != 1)
    throw ShapeMismatch("backward: loss must be 1x1");
  grad_buf(loss.id).v[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.grad.v.empty() && n.pull) n.pull(*this, id);
  }
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    double m = row[0];
    for (int j = 1; j < logits.cols; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < logits.cols; ++j) z += std::exp(row[j] - m);
    for (int j = 0; j < logits.cols; ++j)
      p.at(i, j) = std::exp(row[j] - m) / z;
  }
  return p;
}

void Adam::step(AdamParam& p, const Tensor& grad) {
  if (grad.rows != p.value.rows || grad.cols != p.value.cols)
    throw ShapeMismatch("adam: gradient shape mismatch");
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  for (int k = 0; k < p.value.size(); ++k) {
    const double g = grad.v[k];
    p.m.v[k] = beta1_ * p.m.v[k] + (1.0 - beta1_) * g;
    p.v.v[k] = beta2_ * p.v.v[k] + (1.0 - beta2_) * g * g;
    const double mhat = p.m.v[k] / c1;
    const double vhat = p.v.v[k] / c2;
    p.value.v[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace chirplink
