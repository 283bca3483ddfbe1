#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ntssl/rng.hpp"
#include "ntssl/tensor.hpp"

namespace ntssl::ad {

/// Named learnable tensors with matching gradient accumulators.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;
  void zero_grad();

  std::map<std::string, Entry>& entries() noexcept { return entries_; }
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }
  std::size_t scalar_count() const;

  /// Compares names and values; gradients are scratch state.
  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::map<std::string, Entry> entries_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const noexcept { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a forward computation and replays it in reverse.
///
/// A tape supports one backward pass; record a fresh tape for the next
/// forward. Parameter leaves push their gradients into the owning
/// ParamStore, so gradients accumulate across tapes until zero_grad().
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to store[name]; repeated calls return the same node.
  Var parameter(ParamStore& store, const std::string& name);
  Var record(Tensor value, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }
  const Tensor& grad(Var v) { return grad(v.id()); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. loss must hold one element.
  void backward(Var loss);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
  std::map<std::string, Var> params_;
  bool consumed_ = false;
};

// Ops. Shapes are checked and violations throw UsageError.

Var matmul(Var a, Var b);                                  // (m x k)(k x n)
Var matmul_nt(Var a, Var b, double scale = 1.0);           // scale * a b^T
Var linear(Var x, Var weight, Var bias);                   // x W + b, W is (in x out)
Var add(Var a, Var b);
Var add_n(std::span<const Var> terms);
Var scale(Var x, double factor);
Var add_tiled(Var x, Var pattern);                         // x rows = reps * pattern rows
Var prepend_token(Var frames, Var token, std::size_t batch);  // (B*L x d) -> (B*(L+1) x d)
Var layer_norm(Var x, Var gain, Var bias, double eps);
Var relu(Var x);
Var gelu(Var x);                                           // tanh approximation
Var dropout(Var x, double p, Rng& rng);
Var multi_head_attention(Var qkv, std::size_t batch, std::size_t seq, std::size_t heads);
Var select_rows(Var x, std::vector<std::size_t> rows);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var normalize_rows(Var x);                                 // x / ||x|| per row
Var sum(Var x);
Var mean(Var x);
Var sum_squares(Var x);
/// Mean softmax cross-entropy; logits (n x C), labels in [0, C).
Var cross_entropy(Var logits, std::span<const int> labels);

inline constexpr double kLayerNormEps = 1e-10;

/// Row softmax of the scaled dot-product scores, shape (B*H*S x S).
Tensor attention_weights(const Tensor& qkv, std::size_t batch, std::size_t seq, std::size_t heads);

}  // namespace ntssl::ad
