#pragma once

// Matrix-valued reverse-mode differentiation. Every node holds a row-major
// matrix (rows are points, columns are channels). Nodes are appended in
// evaluation order, which is therefore a topological order.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace tdn::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

class Tape;
using BackwardFn = std::function<void(Tape&, std::size_t self)>;

class Tape {
 public:
  /// With record = false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  /// Parameter leaves read from (and accumulate gradients for) this flat
  /// vector. The vector must outlive the tape.
  void bind_parameters(std::span<const double> values);
  Var parameter(std::size_t offset, Eigen::Index rows, Eigen::Index cols);
  Var constant(Matrix value);

  /// Appends a node. `fn` runs during backward with the node's gradient
  /// available through grad(self); it should push gradients to parents with
  /// accumulate(). Nodes without grad-requiring parents get no closure.
  Var push(Matrix value, std::vector<Var> parents, BackwardFn fn);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// grad(v) += g, allocating on first use. No-op for constants.
  void accumulate(Var v, const Matrix& g);
  /// Direct access for ops that scatter into a parent gradient.
  Matrix* grad_buffer(Var v);

  /// Seeds d(out) = seed and runs closures of every node reachable from out
  /// in reverse creation order, once each.
  void backward(Var out, const Matrix& seed);

  /// d(loss)/d(parameters), same layout as the bound vector. Entries never
  /// reached by backward stay exactly zero.
  const std::vector<double>& parameter_grad() const { return param_grad_; }
  std::size_t backward_visits() const { return visits_; }

  /// Ops with kinks (leaky ReLU) fold their branch pattern into this hash so
  /// finite-difference checks can tell when a perturbation crossed a kink.
  void mix_signature(std::uint64_t h);
  std::uint64_t signature() const { return signature_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<Var> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::size_t param_offset = Var::kNone;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::span<const double> params_;
  std::vector<double> param_grad_;
  std::size_t visits_ = 0;
  std::uint64_t signature_ = 0xcbf29ce484222325ull;
};

/// X W + 1 b, W is (in x out), b is (1 x out).
Var affine(Tape& t, Var x, Var w, Var b);
Var leaky_relu(Tape& t, Var x, double slope);
/// Column-wise concatenation [a | b]; row counts must agree.
Var concat_cols(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, double s);

/// Hash of a sign pattern chunk, combined in a fixed order by the caller.
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

}  // namespace tdn::ad
