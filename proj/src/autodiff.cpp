#include "ntssl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "ntssl/error.hpp"
#include "ntssl/simd/kernels.hpp"

namespace ntssl::ad {

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(const std::string& name, Tensor value) {
  Tensor grad(value.shape(), 0.0);
  if (!entries_.emplace(name, Entry{std::move(value), std::move(grad)}).second) {
    throw UsageError("param store: duplicate parameter '" + name + "'");
  }
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("param store: unknown parameter '" + name + "'");
  return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("param store: unknown parameter '" + name + "'");
  return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("param store: unknown parameter '" + name + "'");
  return it->second.grad;
}

const Tensor& ParamStore::grad(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("param store: unknown parameter '" + name + "'");
  return it->second.grad;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !(ia->second.value == ib->second.value)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::parameter(ParamStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return it->second;
  Var v = record(store.value(name), [&store, name](Tape& t, std::size_t self) {
    Tensor& g = store.grad(name);
    const Tensor& mine = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += mine[i];
  });
  params_.emplace(name, v);
  return v;
}

Var Tape::record(Tensor value, Backward backward) {
  if (consumed_) throw UsageError("tape: cannot record after backward(); start a new forward pass");
  nodes_.push_back(Node{std::move(value), Tensor(), false, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw UsageError("backward called twice without re-running forward");
  if (loss.tape_ != this) throw UsageError("backward: variable belongs to another tape");
  if (value(loss.id()).size() != 1) throw UsageError("backward: loss must be a scalar");
  consumed_ = true;
  grad(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

const simd::KernelTable& K() { return simd::active(); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix(A, "matmul");
  require_matrix(B, "matmul");
  require(A.cols() == B.rows(), "matmul: shape mismatch " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out = Tensor::matrix(m, n);
  K().gemm_nn(m, n, k, A.data(), B.data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), [ia, ib, m, n, k](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    K().gemm_nt(m, k, n, g.data(), t.value(ib).data(), t.grad(ia).data());
    K().gemm_tn(k, n, m, t.value(ia).data(), g.data(), t.grad(ib).data());
  });
}

Var matmul_nt(Var a, Var b, double factor) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix(A, "matmul_nt");
  require_matrix(B, "matmul_nt");
  require(A.cols() == B.cols(), "matmul_nt: inner dimension mismatch");
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor out = Tensor::matrix(m, n);
  K().gemm_nt(m, n, k, A.data(), B.data(), out.data());
  for (double& v : out.values()) v *= factor;
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), [ia, ib, m, n, k, factor](Tape& t, std::size_t self) {
    Tensor g = t.grad(self);
    for (double& v : g.values()) v *= factor;
    K().gemm_nn(m, k, n, g.data(), t.value(ib).data(), t.grad(ia).data());
    K().gemm_tn(n, k, m, g.data(), t.value(ia).data(), t.grad(ib).data());
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  const Tensor& b = bias.value();
  require_matrix(X, "linear");
  require_matrix(W, "linear");
  require(X.cols() == W.rows(), "linear: input has " + std::to_string(X.cols()) + " features, weight expects " +
                                    std::to_string(W.rows()));
  require(b.size() == W.cols(), "linear: bias size mismatch");
  const std::size_t n = X.rows(), in = W.rows(), out_dim = W.cols();
  Tensor out = Tensor::matrix(n, out_dim);
  for (std::size_t r = 0; r < n; ++r) std::copy(b.data(), b.data() + out_dim, out.data() + r * out_dim);
  K().gemm_nn(n, out_dim, in, X.data(), W.data(), out.data());
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(std::move(out), [ix, iw, ib, n, in, out_dim](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    K().gemm_nt(n, in, out_dim, g.data(), t.value(iw).data(), t.grad(ix).data());
    K().gemm_tn(in, out_dim, n, t.value(ix).data(), g.data(), t.grad(iw).data());
    Tensor& gb = t.grad(ib);
    for (std::size_t r = 0; r < n; ++r) K().axpy(1.0, g.data() + r * out_dim, gb.data(), out_dim);
  });
}

Var add(Var a, Var b) {
  require(a.value().same_shape(b.value()), "add: shape mismatch " + shape_string(a.value().shape()) + " vs " +
                                               shape_string(b.value().shape()));
  Tensor out = a.value();
  accumulate(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    accumulate(t.grad(ia), g);
    accumulate(t.grad(ib), g);
  });
}

Var add_n(std::span<const Var> terms) {
  require(!terms.empty(), "add_n: no terms");
  Tensor out = terms[0].value();
  std::vector<std::size_t> ids{terms[0].id()};
  for (std::size_t i = 1; i < terms.size(); ++i) {
    require(terms[i].value().same_shape(out), "add_n: shape mismatch");
    accumulate(out, terms[i].value());
    ids.push_back(terms[i].id());
  }
  return terms[0].tape().record(std::move(out), [ids](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t id : ids) accumulate(t.grad(id), g);
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), [ix, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

Var add_tiled(Var x, Var pattern) {
  const Tensor& X = x.value();
  const Tensor& P = pattern.value();
  require_matrix(X, "add_tiled");
  require_matrix(P, "add_tiled");
  require(P.cols() == X.cols() && P.rows() > 0 && X.rows() % P.rows() == 0, "add_tiled: shape mismatch");
  Tensor out = X;
  const std::size_t block = P.size();
  for (std::size_t off = 0; off < out.size(); off += block) K().axpy(1.0, P.data(), out.data() + off, block);
  const std::size_t ix = x.id(), ip = pattern.id();
  return x.tape().record(std::move(out), [ix, ip, block](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    accumulate(t.grad(ix), g);
    Tensor& gp = t.grad(ip);
    for (std::size_t off = 0; off < g.size(); off += block) K().axpy(1.0, g.data() + off, gp.data(), block);
  });
}

Var prepend_token(Var frames, Var token, std::size_t batch) {
  const Tensor& F = frames.value();
  const Tensor& T = token.value();
  require_matrix(F, "prepend_token");
  require(batch > 0 && F.rows() % batch == 0, "prepend_token: rows not divisible by batch");
  require(T.size() == F.cols(), "prepend_token: token width mismatch");
  const std::size_t L = F.rows() / batch, d = F.cols(), S = L + 1;
  Tensor out = Tensor::matrix(batch * S, d);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(T.data(), T.data() + d, out.data() + b * S * d);
    std::copy(F.data() + b * L * d, F.data() + (b + 1) * L * d, out.data() + (b * S + 1) * d);
  }
  const std::size_t iF = frames.id(), iT = token.id();
  return frames.tape().record(std::move(out), [iF, iT, batch, L, d, S](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gF = t.grad(iF);
    Tensor& gT = t.grad(iT);
    for (std::size_t b = 0; b < batch; ++b) {
      K().axpy(1.0, g.data() + b * S * d, gT.data(), d);
      K().axpy(1.0, g.data() + (b * S + 1) * d, gF.data() + b * L * d, L * d);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  require_matrix(X, "layer_norm");
  const std::size_t n = X.rows(), d = X.cols();
  require(gain.value().size() == d && bias.value().size() == d, "layer_norm: gain/bias width mismatch");
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  auto xhat = std::make_shared<Tensor>(Tensor::matrix(n, d));
  auto rstd = std::make_shared<std::vector<double>>(n);
  Tensor out = Tensor::matrix(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = X.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xr[c] - mu) * rs;
      (*xhat)(r, c) = h;
      out(r, c) = G[c] * h + B[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(std::move(out), [ix, ig, ib, n, d, xhat, rstd](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& G = t.value(ig);
    Tensor& gx = t.grad(ix);
    Tensor& gg = t.grad(ig);
    Tensor& gb = t.grad(ib);
    std::vector<double> dh(d);
    for (std::size_t r = 0; r < n; ++r) {
      double mean_dh = 0.0, mean_dh_h = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double gy = g(r, c);
        const double h = (*xhat)(r, c);
        gg[c] += gy * h;
        gb[c] += gy;
        dh[c] = gy * G[c];
        mean_dh += dh[c];
        mean_dh_h += dh[c] * h;
      }
      mean_dh /= static_cast<double>(d);
      mean_dh_h /= static_cast<double>(d);
      for (std::size_t c = 0; c < d; ++c) gx(r, c) += (*rstd)[r] * (dh[c] - mean_dh - (*xhat)(r, c) * mean_dh_h);
    }
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), [ix](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& X = t.value(ix);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (X[i] > 0.0) gx[i] += g[i];
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), [ix](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& X = t.value(ix);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = X[i];
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      gx[i] += g[i] * d;
    }
  });
}

Var dropout(Var x, double p, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] *= (*mask)[i];
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), [ix, mask](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

namespace {

void softmax_row(double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    total += row[j];
  }
  const double inv = 1.0 / total;
  for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

struct AttentionShape {
  std::size_t batch, seq, heads, D, dh;
  double scale;
  std::size_t stride() const { return 3 * D; }
};

AttentionShape attention_shape(const Tensor& qkv, std::size_t batch, std::size_t seq, std::size_t heads) {
  require_matrix(qkv, "multi_head_attention");
  require(qkv.rows() == batch * seq, "multi_head_attention: rows != batch * seq");
  require(qkv.cols() % 3 == 0, "multi_head_attention: width must be 3 * d_model");
  const std::size_t D = qkv.cols() / 3;
  require(heads > 0 && D % heads == 0, "multi_head_attention: d_model not divisible by heads");
  const std::size_t dh = D / heads;
  return {batch, seq, heads, D, dh, 1.0 / std::sqrt(static_cast<double>(dh))};
}

// Probabilities laid out as [(b * H + h) * S + i][j].
Tensor attention_probs(const Tensor& qkv, const AttentionShape& s) {
  const auto& k = K();
  Tensor P = Tensor::matrix(s.batch * s.heads * s.seq, s.seq);
  const double* base = qkv.data();
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      for (std::size_t i = 0; i < s.seq; ++i) {
        double* row = P.data() + ((b * s.heads + h) * s.seq + i) * s.seq;
        const double* q = base + (b * s.seq + i) * s.stride() + h * s.dh;
        for (std::size_t j = 0; j < s.seq; ++j) {
          const double* kk = base + (b * s.seq + j) * s.stride() + s.D + h * s.dh;
          row[j] = s.scale * k.dot(q, kk, s.dh);
        }
        softmax_row(row, s.seq);
      }
    }
  }
  return P;
}

}  // namespace

Tensor attention_weights(const Tensor& qkv, std::size_t batch, std::size_t seq, std::size_t heads) {
  return attention_probs(qkv, attention_shape(qkv, batch, seq, heads));
}

Var multi_head_attention(Var qkv, std::size_t batch, std::size_t seq, std::size_t heads) {
  const Tensor& QKV = qkv.value();
  const AttentionShape s = attention_shape(QKV, batch, seq, heads);
  auto P = std::make_shared<Tensor>(attention_probs(QKV, s));
  const auto& k = K();
  Tensor out = Tensor::matrix(batch * seq, s.D);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < seq; ++i) {
        const double* prow = P->data() + ((b * heads + h) * seq + i) * seq;
        double* o = out.data() + (b * seq + i) * s.D + h * s.dh;
        for (std::size_t j = 0; j < seq; ++j) {
          const double* v = QKV.data() + (b * seq + j) * s.stride() + 2 * s.D + h * s.dh;
          k.axpy(prow[j], v, o, s.dh);
        }
      }
  const std::size_t iq = qkv.id();
  return qkv.tape().record(std::move(out), [iq, s, P](Tape& t, std::size_t self) {
    const auto& k = K();
    const Tensor& g = t.grad(self);
    const double* X = t.value(iq).data();
    double* gX = t.grad(iq).data();
    std::vector<double> dS(s.seq);
    for (std::size_t b = 0; b < s.batch; ++b)
      for (std::size_t h = 0; h < s.heads; ++h)
        for (std::size_t i = 0; i < s.seq; ++i) {
          const double* prow = P->data() + ((b * s.heads + h) * s.seq + i) * s.seq;
          const double* go = g.data() + (b * s.seq + i) * s.D + h * s.dh;
          double weighted = 0.0;
          for (std::size_t j = 0; j < s.seq; ++j) {
            const std::size_t rj = (b * s.seq + j) * s.stride();
            dS[j] = k.dot(go, X + rj + 2 * s.D + h * s.dh, s.dh);  // dP_ij
            k.axpy(prow[j], go, gX + rj + 2 * s.D + h * s.dh, s.dh);  // dV_j
            weighted += prow[j] * dS[j];
          }
          const std::size_t ri = (b * s.seq + i) * s.stride();
          for (std::size_t j = 0; j < s.seq; ++j) {
            const double ds = prow[j] * (dS[j] - weighted) * s.scale;
            const std::size_t rj = (b * s.seq + j) * s.stride();
            k.axpy(ds, X + rj + s.D + h * s.dh, gX + ri + h * s.dh, s.dh);      // dQ_i
            k.axpy(ds, X + ri + h * s.dh, gX + rj + s.D + h * s.dh, s.dh);      // dK_j
          }
        }
  });
}

Var select_rows(Var x, std::vector<std::size_t> rows) {
  const Tensor& X = x.value();
  require_matrix(X, "select_rows");
  const std::size_t d = X.cols();
  Tensor out = Tensor::matrix(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < X.rows(), "select_rows: row index out of range");
    std::copy(X.data() + rows[r] * d, X.data() + (rows[r] + 1) * d, out.data() + r * d);
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), [ix, d, rows = std::move(rows)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ix);
    for (std::size_t r = 0; r < rows.size(); ++r) K().axpy(1.0, g.data() + r * d, gx.data() + rows[r] * d, d);
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= x.value().rows(), "slice_rows: bad range");
  std::vector<std::size_t> rows(end - begin);
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = begin + r;
  return select_rows(x, std::move(rows));
}

Var normalize_rows(Var x) {
  const Tensor& X = x.value();
  require_matrix(X, "normalize_rows");
  const std::size_t n = X.rows(), d = X.cols();
  auto norms = std::make_shared<std::vector<double>>(n);
  Tensor out = X;
  for (std::size_t r = 0; r < n; ++r) {
    const double nr = std::sqrt(K().dot(X.data() + r * d, X.data() + r * d, d));
    if (!(nr > 0.0) || !std::isfinite(nr)) throw NumericError("normalize_rows: zero-norm or non-finite row");
    (*norms)[r] = nr;
    for (std::size_t c = 0; c < d; ++c) out(r, c) /= nr;
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), [ix, n, d, norms](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& Y = t.value(self);
    Tensor& gx = t.grad(ix);
    for (std::size_t r = 0; r < n; ++r) {
      const double proj = K().dot(Y.data() + r * d, g.data() + r * d, d);
      const double inv = 1.0 / (*norms)[r];
      for (std::size_t c = 0; c < d; ++c) gx(r, c) += inv * (g(r, c) - Y(r, c) * proj);
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t ix = x.id();
  return x.tape().record(Tensor({1}, s), [ix](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad(ix).values()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  require(n > 0, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var sum_squares(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  const std::size_t ix = x.id();
  return x.tape().record(Tensor({1}, s), [ix](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& X = t.value(ix);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < X.size(); ++i) gx[i] += 2.0 * g * X[i];
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& Z = logits.value();
  require_matrix(Z, "cross_entropy");
  const std::size_t n = Z.rows(), C = Z.cols();
  require(labels.size() == n && n > 0, "cross_entropy: label count mismatch");
  auto probs = std::make_shared<Tensor>(Z);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    require(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < C, "cross_entropy: label out of range");
    softmax_row(probs->data() + r * C, C);
    total -= std::log(std::max((*probs)(r, labels[r]), 1e-300));
  }
  std::vector<int> y(labels.begin(), labels.end());
  const std::size_t iz = logits.id();
  return logits.tape().record(Tensor({1}, total / static_cast<double>(n)),
                              [iz, n, C, probs, y = std::move(y)](Tape& t, std::size_t self) {
                                const double g = t.grad(self)[0] / static_cast<double>(n);
                                Tensor& gz = t.grad(iz);
                                for (std::size_t r = 0; r < n; ++r)
                                  for (std::size_t c = 0; c < C; ++c)
                                    gz(r, c) += g * ((*probs)(r, c) - (static_cast<int>(c) == y[r] ? 1.0 : 0.0));
                              });
}

}  // namespace ntssl::ad
