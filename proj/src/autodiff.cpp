#include "tdnoise/autodiff.hpp"

#include "tdnoise/error.hpp"

#include <string>

namespace tdn::ad {

void Tape::bind_parameters(std::span<const double> values) {
  params_ = values;
  param_grad_.assign(values.size(), 0.0);
}

Var Tape::parameter(std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
  const auto count = static_cast<std::size_t>(rows * cols);
  if (offset + count > params_.size()) {
    throw InvariantError("parameter slice [" + std::to_string(offset) + ", " + std::to_string(offset + count) +
                         ") exceeds bound vector of " + std::to_string(params_.size()));
  }
  Node n;
  n.value = Eigen::Map<const Matrix>(params_.data() + offset, rows, cols);
  n.requires_grad = record_;
  n.param_offset = offset;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::push(Matrix value, std::vector<Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var p : parents) n.requires_grad = n.requires_grad || nodes_.at(p.id).requires_grad;
    if (n.requires_grad) {
      n.parents = std::move(parents);
      n.backward = std::move(fn);
    }
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Matrix* Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return &n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (Matrix* buf = grad_buffer(v)) {
    if (buf->rows() != g.rows() || buf->cols() != g.cols()) {
      throw InvariantError("gradient shape mismatch on node " + std::to_string(v.id));
    }
    *buf += g;
  }
}

void Tape::backward(Var out, const Matrix& seed) {
  if (!record_) throw InvariantError("backward on a non-recording tape");
  Node& root = nodes_.at(out.id);
  if (seed.rows() != root.value.rows() || seed.cols() != root.value.cols()) {
    throw InvariantError("backward seed shape mismatch");
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  std::fill(param_grad_.begin(), param_grad_.end(), 0.0);
  visits_ = 0;
  if (!root.requires_grad) return;

  std::vector<char> reachable(nodes_.size(), 0);
  reachable[out.id] = 1;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    for (Var p : nodes_[i].parents) {
      if (nodes_[p.id].requires_grad) reachable[p.id] = 1;
    }
  }
  root.grad = seed;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    Node& n = nodes_[i];
    ++visits_;
    if (n.grad.size() == 0) continue;
    if (n.param_offset != Var::kNone) {
      const double* g = n.grad.data();
      for (Eigen::Index k = 0; k < n.grad.size(); ++k) param_grad_[n.param_offset + k] += g[k];
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

void Tape::mix_signature(std::uint64_t h) { signature_ = hash_combine(signature_, h); }

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  // splitmix64 finaliser over the xor
  std::uint64_t z = seed ^ (value + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Var affine(Tape& t, Var x, Var w, Var b) {
  const Matrix& X = t.value(x);
  const Matrix& W = t.value(w);
  const Matrix& B = t.value(b);
  if (X.cols() != W.rows() || B.rows() != 1 || B.cols() != W.cols()) {
    throw InvariantError("affine shape mismatch: " + std::to_string(X.cols()) + " inputs vs " +
                         std::to_string(W.rows()) + "x" + std::to_string(W.cols()) + " weights");
  }
  Matrix Y = X * W;
  Y.rowwise() += B.row(0);
  return t.push(std::move(Y), {x, w, b}, [x, w, b](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    if (tp.requires_grad(x)) tp.accumulate(x, G * tp.value(w).transpose());
    if (tp.requires_grad(w)) tp.accumulate(w, tp.value(x).transpose() * G);
    if (tp.requires_grad(b)) tp.accumulate(b, G.colwise().sum());
  });
}

Var leaky_relu(Tape& t, Var x, double slope) {
  const Matrix& X = t.value(x);
  Matrix Y = X;
  std::uint64_t h = 0;
  double* y = Y.data();
  for (Eigen::Index i = 0; i < Y.size(); ++i) {
    if (y[i] < 0.0) {
      y[i] *= slope;
      h = hash_combine(h, static_cast<std::uint64_t>(i));
    }
  }
  if (t.recording()) t.mix_signature(h);
  return t.push(std::move(Y), {x}, [x, slope](Tape& tp, std::size_t self) {
    const Matrix& X = tp.value(x);
    Matrix G = tp.grad(self);
    double* g = G.data();
    const double* xv = X.data();
    for (Eigen::Index i = 0; i < G.size(); ++i) {
      if (xv[i] < 0.0) g[i] *= slope;
    }
    tp.accumulate(x, G);
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.rows() != B.rows()) throw InvariantError("concat row mismatch");
  Matrix Y(A.rows(), A.cols() + B.cols());
  Y << A, B;
  const Eigen::Index ca = A.cols();
  const Eigen::Index cb = B.cols();
  return t.push(std::move(Y), {a, b}, [a, b, ca, cb](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    if (tp.requires_grad(a)) tp.accumulate(a, G.leftCols(ca));
    if (tp.requires_grad(b)) tp.accumulate(b, G.rightCols(cb));
  });
}

Var scale(Tape& t, Var x, double s) {
  return t.push(t.value(x) * s, {x}, [x, s](Tape& tp, std::size_t self) { tp.accumulate(x, tp.grad(self) * s); });
}

}  // namespace tdn::ad
