// SPDX-License-Identifier: Apache-2.0
#include "wogma/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wogma/error.hpp"

namespace wogma::ad {
namespace {

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw DimensionError("operands recorded on different tapes");
}

void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
  }
}

bool any_grad(std::initializer_list<const Var*> vars) {
  return std::any_of(vars.begin(), vars.end(), [](const Var* v) { return v->requires_grad(); });
}

// C[m x n] += A[m x k] B[k x n]; each output row accumulates over k in order,
// so a row never depends on how many other rows are present.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m x k] += dC[m x n] B^T
void gemm_acc_bt(const double* dc, const double* b, double* da, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* dcrow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
      da[i * k + p] += acc;
    }
  }
}

// dB[k x n] += A^T dC
void gemm_acc_at(const double* a, const double* dc, double* db, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* dcrow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(xid);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) (*gx)[i] += g[i];
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = sigmoid_scalar(v);
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax(const Var& x) {
  if (x.value().rank() == 0 || x.shape().back() == 0) throw DimensionError("softmax: empty last dimension");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.value().size() / width;
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double* v = out.data() + r * width;
    const double mx = *std::max_element(v, v + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      v[j] = std::exp(v[j] - mx);
      total += v[j];
    }
    for (std::size_t j = 0; j < width; ++j) v[j] /= total;
  }
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid, rows, width](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * width;
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j) dot += g[o + j] * y[o + j];
      for (std::size_t j = 0; j < width; ++j) (*gx)[o + j] += y[o + j] * (g[o + j] - dot);
    }
  });
}

Var activation(const Var& x, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return relu(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::softmax:
      return softmax(x);
  }
  return x;
}

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  gemm_acc(a.value().data(), b.value().data(), out.data(), m, k, n);
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape().record(std::move(out), any_grad({&a, &b}), [aid, bid, m, k, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_target(aid)) gemm_acc_bt(g.data(), t.value(bid).data(), ga->data(), m, k, n);
    if (Tensor* gb = t.grad_target(bid)) gemm_acc_at(t.value(aid).data(), g.data(), gb->data(), m, k, n);
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  require_same_tape(x, w);
  require_same_tape(x, b);
  require_rank(x, 2, "affine");
  require_rank(w, 2, "affine");
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
  if (w.shape()[0] != k) {
    throw DimensionError("affine: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  if (b.value().size() != n) {
    throw DimensionError("affine: bias " + shape_string(b.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) std::copy_n(b.value().data(), n, out.data() + i * n);
  gemm_acc(x.value().data(), w.value().data(), out.data(), m, k, n);
  const std::size_t xid = x.id(), wid = w.id(), bid = b.id();
  return x.tape().record(std::move(out), any_grad({&x, &w, &b}),
                         [xid, wid, bid, m, k, n](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           if (Tensor* gx = t.grad_target(xid))
                             gemm_acc_bt(g.data(), t.value(wid).data(), gx->data(), m, k, n);
                           if (Tensor* gw = t.grad_target(wid))
                             gemm_acc_at(t.value(xid).data(), g.data(), gw->data(), m, k, n);
                           if (Tensor* gb = t.grad_target(bid))
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g[i * n + j];
                         });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape().record(std::move(out), any_grad({&a, &b}), [aid, bid](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t id : {aid, bid})
      if (Tensor* gi = t.grad_target(id))
        for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += factor * g[i];
  });
}

Var sum(const Var& x) {
  const auto v = x.value().values();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  const std::size_t xid = x.id();
  return x.tape().record(Tensor::scalar(total), x.requires_grad(), [xid](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor* gx = t.grad_target(xid);
    for (double& d : gx->values()) d += g;
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var row(const Var& x, std::size_t i) {
  require_rank(x, 2, "row");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (i >= m) throw DimensionError("row " + std::to_string(i) + " out of range for " + shape_string(x.shape()));
  std::vector<double> vals(x.value().data() + i * n, x.value().data() + (i + 1) * n);
  const std::size_t xid = x.id();
  return x.tape().record(Tensor(Shape{n}, std::move(vals)), x.requires_grad(),
                         [xid, i, n](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor* gx = t.grad_target(xid);
                           for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += g[j];
                         });
}

Var column(const Var& x, std::size_t j) {
  require_rank(x, 2, "column");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (j >= n) throw DimensionError("column " + std::to_string(j) + " out of range for " + shape_string(x.shape()));
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) out[i] = x.value()[i * n + j];
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid, j, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t i = 0; i < m; ++i) (*gx)[i * n + j] += g[i];
  });
}

Var slice(const Var& x, std::size_t begin, std::size_t count) {
  require_rank(x, 1, "slice");
  if (begin + count > x.value().size()) throw DimensionError("slice out of range for " + shape_string(x.shape()));
  std::vector<double> vals(x.value().data() + begin, x.value().data() + begin + count);
  const std::size_t xid = x.id();
  return x.tape().record(Tensor(Shape{count}, std::move(vals)), x.requires_grad(),
                         [xid, begin, count](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor* gx = t.grad_target(xid);
                           for (std::size_t j = 0; j < count; ++j) (*gx)[begin + j] += g[j];
                         });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t n = rows[0].value().size();
  std::vector<double> vals;
  vals.reserve(rows.size() * n);
  std::vector<std::size_t> ids;
  bool needs = false;
  for (const Var& r : rows) {
    require_rank(r, 1, "stack_rows");
    require_same_tape(rows[0], r);
    if (r.value().size() != n) throw DimensionError("stack_rows: rows of unequal length");
    vals.insert(vals.end(), r.value().values().begin(), r.value().values().end());
    ids.push_back(r.id());
    needs = needs || r.requires_grad();
  }
  return rows[0].tape().record(Tensor(Shape{rows.size(), n}, std::move(vals)), needs,
                               [ids = std::move(ids), n](Tape& t, std::size_t self) {
                                 const Tensor& g = t.grad(self);
                                 for (std::size_t r = 0; r < ids.size(); ++r)
                                   if (Tensor* gr = t.grad_target(ids[r]))
                                     for (std::size_t j = 0; j < n; ++j) (*gr)[j] += g[r * n + j];
                               });
}

Var temporal_conv1d(const Var& f, const Var& w, const Var& b) {
  require_same_tape(f, w);
  require_same_tape(f, b);
  require_rank(f, 2, "temporal_conv1d");
  require_rank(w, 3, "temporal_conv1d");
  const std::size_t len = f.shape()[0], cin = f.shape()[1];
  const std::size_t cout = w.shape()[0], k = w.shape()[2];
  if (k % 2 == 0) throw ConfigError("temporal_conv1d: kernel size must be odd, got " + std::to_string(k));
  if (w.shape()[1] != cin) {
    throw DimensionError("temporal_conv1d: input " + shape_string(f.shape()) + " does not match kernel " +
                         shape_string(w.shape()));
  }
  if (b.value().size() != cout) throw DimensionError("temporal_conv1d: bias size mismatch");
  if (len == 0) throw DimensionError("temporal_conv1d: empty sequence");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const Tensor& fv = f.value();
  const Tensor& wv = w.value();
  Tensor out(Shape{len, cout});
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = b.value()[o];
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        const double* frow = fv.data() + static_cast<std::size_t>(src) * cin;
        for (std::size_t i = 0; i < cin; ++i) acc += wv[(o * cin + i) * k + j] * frow[i];
      }
      out[t * cout + o] = acc;
    }
  }
  const std::size_t fid = f.id(), wid = w.id(), bid = b.id();
  return f.tape().record(
      std::move(out), any_grad({&f, &w, &b}), [fid, wid, bid, len, cin, cout, k, pad](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& fv2 = t.value(fid);
        const Tensor& wv2 = t.value(wid);
        Tensor* gf = t.grad_target(fid);
        Tensor* gw = t.grad_target(wid);
        Tensor* gb = t.grad_target(bid);
        for (std::size_t tt = 0; tt < len; ++tt) {
          for (std::size_t o = 0; o < cout; ++o) {
            const double go = g[tt * cout + o];
            if (gb) (*gb)[o] += go;
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(tt) + static_cast<std::ptrdiff_t>(j) - pad;
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
              const std::size_t s = static_cast<std::size_t>(src);
              for (std::size_t i = 0; i < cin; ++i) {
                const std::size_t widx = (o * cin + i) * k + j;
                if (gw) (*gw)[widx] += go * fv2[s * cin + i];
                if (gf) (*gf)[s * cin + i] += go * wv2[widx];
              }
            }
          }
        }
      });
}

LstmState lstm_cell(const Var& h_prev, const Var& c_prev, const Var& f, const LstmWeights& w) {
  require_rank(h_prev, 1, "lstm_cell");
  require_rank(c_prev, 1, "lstm_cell");
  require_rank(f, 1, "lstm_cell");
  require_rank(w.input, 2, "lstm_cell");
  require_rank(w.hidden, 2, "lstm_cell");
  const std::size_t hsz = h_prev.value().size();
  const std::size_t fsz = f.value().size();
  const std::size_t gsz = 4 * hsz;
  if (c_prev.value().size() != hsz || w.input.shape() != Shape{fsz, gsz} || w.hidden.shape() != Shape{hsz, gsz} ||
      w.bias.value().size() != gsz) {
    throw DimensionError("lstm_cell: inconsistent shapes (h " + shape_string(h_prev.shape()) + ", f " +
                         shape_string(f.shape()) + ", W_x " + shape_string(w.input.shape()) + ", W_h " +
                         shape_string(w.hidden.shape()) + ")");
  }

  std::vector<double> z(w.bias.value().values().begin(), w.bias.value().values().end());
  gemm_acc(f.value().data(), w.input.value().data(), z.data(), 1, fsz, gsz);
  gemm_acc(h_prev.value().data(), w.hidden.value().data(), z.data(), 1, hsz, gsz);

  // gates = [i, f, g, o] after nonlinearity; out = [h, c]
  std::vector<double> gates(gsz);
  Tensor out(Shape{2 * hsz});
  std::vector<double> tanh_c(hsz);
  for (std::size_t j = 0; j < hsz; ++j) {
    const double ig = sigmoid_scalar(z[j]);
    const double fg = sigmoid_scalar(z[hsz + j]);
    const double gg = std::tanh(z[2 * hsz + j]);
    const double og = sigmoid_scalar(z[3 * hsz + j]);
    gates[j] = ig;
    gates[hsz + j] = fg;
    gates[2 * hsz + j] = gg;
    gates[3 * hsz + j] = og;
    const double c = fg * c_prev.value()[j] + ig * gg;
    tanh_c[j] = std::tanh(c);
    out[hsz + j] = c;
    out[j] = og * tanh_c[j];
  }

  const std::size_t hid = h_prev.id(), cid = c_prev.id(), fid = f.id();
  const std::size_t wxid = w.input.id(), whid = w.hidden.id(), bid = w.bias.id();
  const bool needs = any_grad({&h_prev, &c_prev, &f, &w.input, &w.hidden, &w.bias});
  Var joint = h_prev.tape().record(
      std::move(out), needs,
      [=, gates = std::move(gates), tanh_c = std::move(tanh_c)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& cp = t.value(cid);
        std::vector<double> dz(gsz);
        std::vector<double> dc_prev(hsz);
        for (std::size_t j = 0; j < hsz; ++j) {
          const double ig = gates[j], fg = gates[hsz + j], gg = gates[2 * hsz + j], og = gates[3 * hsz + j];
          const double dh = g[j];
          const double dc = g[hsz + j] + dh * og * (1.0 - tanh_c[j] * tanh_c[j]);
          dz[j] = dc * gg * ig * (1.0 - ig);
          dz[hsz + j] = dc * cp[j] * fg * (1.0 - fg);
          dz[2 * hsz + j] = dc * ig * (1.0 - gg * gg);
          dz[3 * hsz + j] = dh * tanh_c[j] * og * (1.0 - og);
          dc_prev[j] = dc * fg;
        }
        if (Tensor* gc = t.grad_target(cid))
          for (std::size_t j = 0; j < hsz; ++j) (*gc)[j] += dc_prev[j];
        if (Tensor* gb = t.grad_target(bid))
          for (std::size_t j = 0; j < gsz; ++j) (*gb)[j] += dz[j];
        if (Tensor* gwx = t.grad_target(wxid)) gemm_acc_at(t.value(fid).data(), dz.data(), gwx->data(), 1, fsz, gsz);
        if (Tensor* gwh = t.grad_target(whid)) gemm_acc_at(t.value(hid).data(), dz.data(), gwh->data(), 1, hsz, gsz);
        if (Tensor* gf = t.grad_target(fid)) gemm_acc_bt(dz.data(), t.value(wxid).data(), gf->data(), 1, fsz, gsz);
        if (Tensor* gh = t.grad_target(hid)) gemm_acc_bt(dz.data(), t.value(whid).data(), gh->data(), 1, hsz, gsz);
      });
  return LstmState{slice(joint, 0, hsz), slice(joint, hsz, hsz)};
}

std::size_t topk_count(std::size_t length, std::size_t kappa) {
  if (kappa == 0) throw ConfigError("kappa must be >= 1");
  return std::max<std::size_t>(1, length / kappa);
}

std::vector<std::size_t> topk_indices(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(k);
  return idx;
}

Var topk_mean(const Var& x, std::size_t kappa) {
  require_rank(x, 2, "topk_mean");
  const std::size_t len = x.shape()[0], n = x.shape()[1];
  if (len == 0) throw DimensionError("topk_mean: empty sequence");
  const std::size_t k = topk_count(len, kappa);
  Tensor out(Shape{n});
  std::vector<std::size_t> selected;
  selected.reserve(k * n);
  std::vector<double> col(len);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < len; ++i) col[i] = x.value()[i * n + c];
    double acc = 0.0;
    for (std::size_t i : topk_indices(col, k)) {
      acc += col[i];
      selected.push_back(i);
    }
    out[c] = acc / static_cast<double>(k);
  }
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(),
                         [xid, n, k, selected = std::move(selected)](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor* gx = t.grad_target(xid);
                           for (std::size_t c = 0; c < n; ++c)
                             for (std::size_t r = 0; r < k; ++r)
                               (*gx)[selected[c * k + r] * n + c] += g[c] / static_cast<double>(k);
                         });
}

Var binary_cross_entropy(const Var& p, std::span<const double> targets) {
  const std::size_t n = p.value().size();
  if (targets.size() != n) throw DimensionError("binary_cross_entropy: label count does not match probabilities");
  double loss = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double q = std::clamp(p.value()[c], kProbClamp, 1.0 - kProbClamp);
    loss -= targets[c] * std::log(q) + (1.0 - targets[c]) * std::log(1.0 - q);
  }
  const std::size_t pid = p.id();
  std::vector<double> y(targets.begin(), targets.end());
  return p.tape().record(Tensor::scalar(loss), p.requires_grad(), [pid, y = std::move(y)](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& pv = t.value(pid);
    Tensor* gp = t.grad_target(pid);
    for (std::size_t c = 0; c < y.size(); ++c) {
      const double q = pv[c];
      if (q < kProbClamp || q > 1.0 - kProbClamp) continue;
      (*gp)[c] += g * (-y[c] / q + (1.0 - y[c]) / (1.0 - q));
    }
  });
}

Var cross_entropy(const Var& probs, std::span<const int> labels) {
  require_rank(probs, 2, "cross_entropy");
  const std::size_t len = probs.shape()[0], n = probs.shape()[1];
  if (labels.size() != len) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(len) +
                         " rows");
  }
  if (len == 0) throw DimensionError("cross_entropy: empty sequence");
  double loss = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const int c = labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n) throw DimensionError("cross_entropy: label out of range");
    loss -= std::log(std::max(probs.value()[i * n + static_cast<std::size_t>(c)], kProbClamp));
  }
  loss /= static_cast<double>(len);
  const std::size_t pid = probs.id();
  std::vector<int> lab(labels.begin(), labels.end());
  return probs.tape().record(Tensor::scalar(loss), probs.requires_grad(),
                             [pid, n, lab = std::move(lab)](Tape& t, std::size_t self) {
                               const double g = t.grad(self)[0] / static_cast<double>(lab.size());
                               const Tensor& pv = t.value(pid);
                               Tensor* gp = t.grad_target(pid);
                               for (std::size_t i = 0; i < lab.size(); ++i) {
                                 const std::size_t idx = i * n + static_cast<std::size_t>(lab[i]);
                                 if (pv[idx] < kProbClamp) continue;
                                 (*gp)[idx] -= g / pv[idx];
                               }
                             });
}

Var block_matmul(const Tensor& a, const Var& x) {
  require_rank(x, 3, "block_matmul");
  if (a.rank() != 2 || a.dim(0) != a.dim(1) || a.dim(1) != x.shape()[1]) {
    throw DimensionError("block_matmul: matrix " + shape_string(a.shape()) + " does not match input " +
                         shape_string(x.shape()));
  }
  const std::size_t batch = x.shape()[0], p = x.shape()[1], c = x.shape()[2];
  Tensor out(x.shape());
  for (std::size_t b = 0; b < batch; ++b)
    gemm_acc(a.data(), x.value().data() + b * p * c, out.data() + b * p * c, p, p, c);
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid, a, batch, p, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t b = 0; b < batch; ++b)
      gemm_acc_at(a.data(), g.data() + b * p * c, gx->data() + b * p * c, p, p, c);
  });
}

Var window_mean(const Var& x) {
  require_rank(x, 4, "window_mean");
  const std::size_t len = x.shape()[0], tau = x.shape()[1], n = x.shape()[2], c = x.shape()[3];
  const std::size_t block = n * c;
  Tensor out(Shape{len, n, c});
  const double inv = 1.0 / static_cast<double>(tau);
  for (std::size_t l = 0; l < len; ++l) {
    double* dst = out.data() + l * block;
    for (std::size_t t = 0; t < tau; ++t) {
      const double* src = x.value().data() + (l * tau + t) * block;
      for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
    }
    for (std::size_t j = 0; j < block; ++j) dst[j] *= inv;
  }
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid, len, tau, block, inv](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t tt = 0; tt < tau; ++tt)
        for (std::size_t j = 0; j < block; ++j) (*gx)[(l * tau + tt) * block + j] += inv * g[l * block + j];
  });
}

Var tile_window(const Var& x, std::size_t tau) {
  require_rank(x, 3, "tile_window");
  const std::size_t len = x.shape()[0], n = x.shape()[1], c = x.shape()[2];
  const std::size_t block = n * c;
  Tensor out(Shape{len, tau, n, c});
  for (std::size_t l = 0; l < len; ++l)
    for (std::size_t t = 0; t < tau; ++t)
      std::copy_n(x.value().data() + l * block, block, out.data() + (l * tau + t) * block);
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), x.requires_grad(), [xid, len, tau, block](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor* gx = t.grad_target(xid);
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t tt = 0; tt < tau; ++tt)
        for (std::size_t j = 0; j < block; ++j) (*gx)[l * block + j] += g[(l * tau + tt) * block + j];
  });
}

Var collapse_time(const Var& x, const Var& w) {
  require_same_tape(x, w);
  require_rank(x, 4, "collapse_time");
  require_rank(w, 3, "collapse_time");
  const std::size_t len = x.shape()[0], tau = x.shape()[1], n = x.shape()[2], cin = x.shape()[3];
  const std::size_t cout = w.shape()[0];
  if (w.shape()[1] != tau || w.shape()[2] != cin) {
    throw DimensionError("collapse_time: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  // wt[t, i, o] = W[o, t, i] so the inner loop runs over contiguous outputs.
  std::vector<double> wt(tau * cin * cout);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t t = 0; t < tau; ++t)
      for (std::size_t i = 0; i < cin; ++i) wt[(t * cin + i) * cout + o] = w.value()[(o * tau + t) * cin + i];

  Tensor out(Shape{len, n, cout});
  const Tensor& xv = x.value();
  for (std::size_t l = 0; l < len; ++l) {
    for (std::size_t nn = 0; nn < n; ++nn) {
      double* dst = out.data() + (l * n + nn) * cout;
      for (std::size_t t = 0; t < tau; ++t) {
        const double* src = xv.data() + ((l * tau + t) * n + nn) * cin;
        gemm_acc(src, wt.data() + t * cin * cout, dst, 1, cin, cout);
      }
    }
  }
  const std::size_t xid = x.id(), wid = w.id();
  return x.tape().record(
      std::move(out), any_grad({&x, &w}), [xid, wid, len, tau, n, cin, cout, wt = std::move(wt)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv2 = t.value(xid);
        Tensor* gx = t.grad_target(xid);
        Tensor* gw = t.grad_target(wid);
        std::vector<double> gwt(gw ? wt.size() : 0);
        for (std::size_t l = 0; l < len; ++l) {
          for (std::size_t nn = 0; nn < n; ++nn) {
            const double* go = g.data() + (l * n + nn) * cout;
            for (std::size_t tt = 0; tt < tau; ++tt) {
              const std::size_t xoff = ((l * tau + tt) * n + nn) * cin;
              if (gx) gemm_acc_bt(go, wt.data() + tt * cin * cout, gx->data() + xoff, 1, cin, cout);
              if (gw) gemm_acc_at(xv2.data() + xoff, go, gwt.data() + tt * cin * cout, 1, cin, cout);
            }
          }
        }
        if (gw)
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t tt = 0; tt < tau; ++tt)
              for (std::size_t i = 0; i < cin; ++i) (*gw)[(o * tau + tt) * cin + i] += gwt[(tt * cin + i) * cout + o];
      });
}

Var collapse_tiled(const Var& y, const Var& w) {
  require_same_tape(y, w);
  require_rank(y, 3, "collapse_tiled");
  require_rank(w, 3, "collapse_tiled");
  const std::size_t rows = y.shape()[0] * y.shape()[1], cin = y.shape()[2];
  const std::size_t cout = w.shape()[0], tau = w.shape()[1];
  if (w.shape()[2] != cin) {
    throw DimensionError("collapse_tiled: input " + shape_string(y.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  // ws[i, o] = sum_t W[o, t, i]
  std::vector<double> ws(cin * cout, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t t = 0; t < tau; ++t)
      for (std::size_t i = 0; i < cin; ++i) ws[i * cout + o] += w.value()[(o * tau + t) * cin + i];

  Tensor out(Shape{y.shape()[0], y.shape()[1], cout});
  gemm_acc(y.value().data(), ws.data(), out.data(), rows, cin, cout);
  const std::size_t yid = y.id(), wid = w.id();
  return y.tape().record(
      std::move(out), any_grad({&y, &w}), [yid, wid, rows, cin, cout, tau, ws = std::move(ws)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (Tensor* gy = t.grad_target(yid)) gemm_acc_bt(g.data(), ws.data(), gy->data(), rows, cin, cout);
        if (Tensor* gw = t.grad_target(wid)) {
          std::vector<double> gws(cin * cout, 0.0);
          gemm_acc_at(t.value(yid).data(), g.data(), gws.data(), rows, cin, cout);
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t tt = 0; tt < tau; ++tt)
              for (std::size_t i = 0; i < cin; ++i) (*gw)[(o * tau + tt) * cin + i] += gws[i * cout + o];
        }
      });
}

}  // namespace wogma::ad
