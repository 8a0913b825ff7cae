#include "oplab/diffcore/mlp.hpp"

#include "oplab/diffcore/mathutil.hpp"

#include <cmath>
#include <stdexcept>

namespace oplab::diffcore {

namespace {

std::string weight_name(int layer) { return "W" + std::to_string(layer); }
std::string bias_name(int layer) { return "b" + std::to_string(layer); }

std::vector<std::pair<int, int>> layer_shapes(const MLPSpec& spec) {
  std::vector<std::pair<int, int>> shapes;
  int fan_in = spec.input_dim;
  for (int h : spec.hidden_dims) {
    shapes.emplace_back(fan_in, h);
    fan_in = h;
  }
  shapes.emplace_back(fan_in, spec.output_dim);
  return shapes;
}

}  // namespace

void MLPSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0)
    throw DimensionError("MLPSpec: input/output dims must be positive");
  if (hidden_dims.empty())
    throw DimensionError("MLPSpec: at least one hidden layer required");
  for (int h : hidden_dims)
    if (h <= 0) throw DimensionError("MLPSpec: hidden dims must be positive");
}

long MLPSpec::param_count() const {
  long n = 0;
  int fan_in = input_dim;
  for (int h : hidden_dims) {
    n += static_cast<long>(fan_in) * h + h;
    fan_in = h;
  }
  n += static_cast<long>(fan_in) * output_dim + output_dim;
  return n;
}

ParamStore init_params(const MLPSpec& spec, RngStream& rng) {
  spec.validate();
  ParamStore store;
  int layer = 0;
  for (const auto& [fan_in, fan_out] : layer_shapes(spec)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    store.add(weight_name(layer), rng.uniform_matrix(fan_in, fan_out, -bound, bound));
    store.add(bias_name(layer), Matrix::Zero(1, fan_out));
    ++layer;
  }
  return store;
}

void reset_params(ParamStore& store, const MLPSpec& spec, RngStream& rng) {
  ParamStore fresh = init_params(spec, rng);
  for (auto& [name, e] : fresh.entries) store.at(name).value = e.value;
  for (auto& [name, e] : store.entries) {
    e.grad.setZero();
    e.m.setZero();
    e.v.setZero();
  }
  store.opt_t = 0;
}

Matrix forward(const ParamStore& store, const MLPSpec& spec,
               const Matrix& input) {
  if (input.cols() != spec.input_dim)
    throw DimensionError("forward: input width does not match spec");
  Matrix h = input;
  const int layers = spec.layer_count();
  for (int l = 0; l < layers; ++l) {
    Matrix z = h * store.at(weight_name(l)).value;
    z.rowwise() += store.at(bias_name(l)).value.row(0);
    if (l + 1 < layers) {
      if (spec.activation == Activation::kTanh)
        z = fast_tanh(z);
      else
        z = z.cwiseMax(0.0);
    }
    h = std::move(z);
  }
  return h;
}

Eigen::VectorXd forward(const ParamStore& store, const MLPSpec& spec,
                        const Eigen::VectorXd& input) {
  Matrix row = input.transpose();
  return forward(store, spec, row).row(0).transpose();
}

namespace {

Var forward_impl(Graph& g, const ParamStore& store, ParamStore* bind,
                 const MLPSpec& spec, Var input) {
  if (g.value(input).cols() != spec.input_dim)
    throw DimensionError("forward_on: input width does not match spec");
  Var h = input;
  const int layers = spec.layer_count();
  for (int l = 0; l < layers; ++l) {
    Var w = bind ? g.param(*bind, weight_name(l))
                 : g.constant(store.at(weight_name(l)).value);
    Var b = bind ? g.param(*bind, bias_name(l))
                 : g.constant(store.at(bias_name(l)).value);
    Graph::Fused act = Graph::Fused::kNone;
    if (l + 1 < layers)
      act = spec.activation == Activation::kTanh ? Graph::Fused::kTanh
                                                 : Graph::Fused::kRelu;
    h = g.affine(h, w, b, act);
  }
  return h;
}

}  // namespace

Var forward_on(Graph& g, ParamStore& store, const MLPSpec& spec, Var input,
               bool bind_params) {
  return forward_impl(g, store, bind_params ? &store : nullptr, spec, input);
}

Var forward_const(Graph& g, const ParamStore& store, const MLPSpec& spec,
                  Var input) {
  return forward_impl(g, store, nullptr, spec, input);
}

double value_and_grad(ParamStore& store, const MLPSpec& spec,
                      const Matrix& input,
                      const std::function<Var(Graph&, Var)>& loss_fn,
                      const std::string& loss_name) {
  Graph g;
  Var out = forward_on(g, store, spec, g.constant(input), true);
  Var loss = loss_fn(g, out);
  g.backward(loss, loss_name);
  return g.value(loss)(0, 0);
}

}  // namespace oplab::diffcore
