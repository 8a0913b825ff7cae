#pragma once

#include "oplab/common/rng.hpp"
#include "oplab/diffcore/graph.hpp"

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

namespace oplab::diffcore {

enum class Activation { kTanh, kRelu };

// Fully-connected network shape. The final layer is affine with no
// activation.
struct MLPSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims{256, 256};
  int output_dim = 0;
  Activation activation = Activation::kTanh;

  int layer_count() const { return static_cast<int>(hidden_dims.size()) + 1; }

  // Total number of scalar parameters (weights + biases).
  long param_count() const;

  void validate() const;
};

// Named parameter tensors for one network together with their gradient slots
// and first/second-moment accumulators. Iteration order is the sorted name
// order, which keeps checkpoints and finite-difference sweeps deterministic.
struct ParamStore {
  struct Entry {
    Matrix value;
    Matrix grad;
    Matrix m;
    Matrix v;
  };

  std::map<std::string, Entry> entries;
  long opt_t = 0;

  void add(const std::string& name, Matrix init) {
    Entry e;
    e.grad = Matrix::Zero(init.rows(), init.cols());
    e.m = e.grad;
    e.v = e.grad;
    e.value = std::move(init);
    entries[name] = std::move(e);
  }

  Entry& at(const std::string& name) { return entries.at(name); }
  const Entry& at(const std::string& name) const { return entries.at(name); }
  bool has(const std::string& name) const { return entries.count(name) > 0; }

  void zero_grads() {
    for (auto& [_, e] : entries) e.grad.setZero();
  }

  long param_count() const {
    long n = 0;
    for (const auto& [_, e] : entries) n += e.value.size();
    return n;
  }
};

// Weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
// Layer l stores "Wl" (fan_in x fan_out) and "bl" (1 x fan_out).
ParamStore init_params(const MLPSpec& spec, RngStream& rng);

// Re-draws the weights as init_params would with the given stream and zeroes
// every optimizer moment and the step counter. Entries that are not part of
// the MLP layer stack (extra parameters owned by the caller) keep their
// values but also have their moments zeroed.
void reset_params(ParamStore& store, const MLPSpec& spec, RngStream& rng);

// Plain inference, no tape. Input rows are batch entries.
Matrix forward(const ParamStore& store, const MLPSpec& spec,
               const Matrix& input);

// Single-vector convenience wrapper.
Eigen::VectorXd forward(const ParamStore& store, const MLPSpec& spec,
                        const Eigen::VectorXd& input);

// Tape-building forward pass. With bind_params the layer parameters enter as
// differentiable leaves of `store`; otherwise they are baked in as constants
// and only the input carries gradient (used when a network feeds another
// network's loss without being trained by it).
Var forward_on(Graph& g, ParamStore& store, const MLPSpec& spec, Var input,
               bool bind_params = true);
Var forward_const(Graph& g, const ParamStore& store, const MLPSpec& spec,
                  Var input);

// Builds loss_fn over the network outputs for `input`, runs one backward
// sweep and leaves d loss / d params in store.grads. Returns the loss value.
// Throws NumericError (tagged with loss_name) when the loss is non-finite.
double value_and_grad(ParamStore& store, const MLPSpec& spec,
                      const Matrix& input,
                      const std::function<Var(Graph&, Var)>& loss_fn,
                      const std::string& loss_name = "loss");

}  // namespace oplab::diffcore
