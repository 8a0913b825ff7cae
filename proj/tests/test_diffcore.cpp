#include "oplab/common/rng.hpp"
#include "oplab/diffcore/checkpoint.hpp"
#include "oplab/diffcore/mlp.hpp"
#include "oplab/diffcore/optimizer.hpp"

#include "gradient_check.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace oplab;
using diffcore::Matrix;
using diffcore::MLPSpec;
using diffcore::ParamStore;

namespace {

MLPSpec tiny_spec(int in, std::vector<int> hidden, int out,
                  diffcore::Activation act = diffcore::Activation::kTanh) {
  MLPSpec s;
  s.input_dim = in;
  s.hidden_dims = std::move(hidden);
  s.output_dim = out;
  s.activation = act;
  return s;
}

bool stores_equal(const ParamStore& a, const ParamStore& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (const auto& [name, e] : a.entries) {
    if (!b.has(name)) return false;
    if (e.value != b.at(name).value) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_params is deterministic and zero-biased") {
  const auto spec = tiny_spec(1, {1}, 1);
  RngStream r1(42, 7), r2(42, 7);
  const auto a = diffcore::init_params(spec, r1);
  const auto b = diffcore::init_params(spec, r2);
  CHECK(stores_equal(a, b));

  const auto spec2 = tiny_spec(3, {4, 5}, 2);
  RngStream r3(3, 3);
  const auto c = diffcore::init_params(spec2, r3);
  CHECK(c.at("b0").value.isZero(0.0));
  CHECK(c.at("b1").value.isZero(0.0));
  CHECK(c.at("b2").value.isZero(0.0));
}

TEST_CASE("parameter count follows layer-shape arithmetic") {
  const auto spec = tiny_spec(4, {256, 256}, 2);
  CHECK(spec.param_count() == 67586);
  RngStream rng(0, 0);
  CHECK(diffcore::init_params(spec, rng).param_count() == 67586);
}

TEST_CASE("weight magnitudes respect the fan-in bound") {
  const auto spec = tiny_spec(16, {8}, 4);
  RngStream rng(11, 0);
  const auto store = diffcore::init_params(spec, rng);
  CHECK(store.at("W0").value.cwiseAbs().maxCoeff() <= 1.0 / 4.0);
  CHECK(store.at("W1").value.cwiseAbs().maxCoeff() <=
        1.0 / std::sqrt(8.0));
}

TEST_CASE("forward of a zero-weight net returns the biases") {
  const auto spec = tiny_spec(3, {4}, 2);
  RngStream rng(1, 1);
  auto store = diffcore::init_params(spec, rng);
  store.at("W0").value.setZero();
  store.at("W1").value.setZero();
  store.at("b1").value << 0.25, -1.5;
  Eigen::VectorXd in(3);
  in << 9.0, -3.0, 0.5;
  const Eigen::VectorXd out = diffcore::forward(store, spec, in);
  CHECK(out(0) == doctest::Approx(0.25));
  CHECK(out(1) == doctest::Approx(-1.5));
}

TEST_CASE("one-unit tanh net evaluates by hand") {
  const auto spec = tiny_spec(1, {1}, 1);
  RngStream rng(1, 1);
  auto store = diffcore::init_params(spec, rng);
  store.at("W0").value.setOnes();
  store.at("W1").value.setOnes();
  Eigen::VectorXd in(1);
  in << 0.5;
  const double out = diffcore::forward(store, spec, in)(0);
  CHECK(out == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  CHECK(out == doctest::Approx(0.46212).epsilon(1e-4));
}

TEST_CASE("relu hidden layer clips negatives") {
  const auto spec = tiny_spec(2, {2}, 2, diffcore::Activation::kRelu);
  RngStream rng(1, 1);
  auto store = diffcore::init_params(spec, rng);
  store.at("W0").value = Matrix::Identity(2, 2);
  store.at("W1").value = Matrix::Identity(2, 2);
  Eigen::VectorXd in(2);
  in << -1.0, 2.0;
  const Eigen::VectorXd out = diffcore::forward(store, spec, in);
  CHECK(out(0) == 0.0);
  CHECK(out(1) == 2.0);
}

TEST_CASE("forward rejects mismatched input width") {
  const auto spec = tiny_spec(3, {2}, 1);
  RngStream rng(1, 1);
  const auto store = diffcore::init_params(spec, rng);
  Matrix bad(1, 2);
  bad.setZero();
  CHECK_THROWS_AS(diffcore::forward(store, spec, bad),
                  diffcore::DimensionError);
}

TEST_CASE("sum loss over a zero-weight net puts unit gradient on out biases") {
  const auto spec = tiny_spec(2, {3}, 2);
  RngStream rng(5, 5);
  auto store = diffcore::init_params(spec, rng);
  store.at("W0").value.setZero();
  store.at("W1").value.setZero();
  Matrix input(4, 2);
  input.setRandom();
  diffcore::value_and_grad(
      store, spec, input,
      [](diffcore::Graph& g, diffcore::Var out) { return g.sum(out); });
  CHECK(store.at("b1").grad(0, 0) == doctest::Approx(4.0));  // 4 batch rows
  CHECK(store.at("b1").grad(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("constant loss leaves all gradients zero") {
  const auto spec = tiny_spec(2, {3}, 1);
  RngStream rng(5, 6);
  auto store = diffcore::init_params(spec, rng);
  Matrix input(2, 2);
  input.setRandom();
  diffcore::value_and_grad(store, spec, input,
                           [](diffcore::Graph& g, diffcore::Var out) {
                             return g.constant_scalar(3.5);
                           });
  for (const auto& [name, e] : store.entries) CHECK(e.grad.isZero(0.0));
}

TEST_CASE("non-finite loss raises a numeric error with the loss name") {
  const auto spec = tiny_spec(1, {2}, 1);
  RngStream rng(5, 7);
  auto store = diffcore::init_params(spec, rng);
  Matrix input(1, 1);
  input.setZero();
  try {
    diffcore::value_and_grad(
        store, spec, input,
        [](diffcore::Graph& g, diffcore::Var out) {
          return g.log(g.constant_scalar(-1.0));
        },
        "poisoned loss");
    FAIL("expected NumericError");
  } catch (const diffcore::NumericError& e) {
    CHECK(std::string(e.what()).find("poisoned loss") != std::string::npos);
  }
}

TEST_CASE("tape gradients match central finite differences on random nets") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto spec = tiny_spec(3, {6, 5}, 2);
    RngStream rng(seed, 17);
    auto store = diffcore::init_params(spec, rng);
    const Matrix input = rng.normal_matrix(4, 3);
    const Matrix weights = rng.normal_matrix(4, 2);
    const auto build = [&](diffcore::Graph& g) {
      auto out = diffcore::forward_on(g, store, spec, g.constant(input));
      // random positive-weighted quadratic of the outputs
      return g.mean(g.square(g.mul(out, g.constant(weights))));
    };
    CHECK(testing::max_grad_rel_error({&store}, build) < 1e-4);
  }
}

TEST_CASE("optimizer first step moves by -lr within epsilon") {
  const auto spec = tiny_spec(1, {1}, 1);
  RngStream rng(2, 2);
  auto store = diffcore::init_params(spec, rng);
  const double before = store.at("W0").value(0, 0);
  for (auto& [name, e] : store.entries) e.grad.setOnes();
  diffcore::OptimizerConfig cfg;
  cfg.learning_rate = 0.001;
  diffcore::optimizer_step(store, cfg);
  const double delta = store.at("W0").value(0, 0) - before;
  CHECK(delta == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(store.opt_t == 1);
  CHECK(store.at("W0").grad.isZero(0.0));  // grads zeroed afterwards
}

TEST_CASE("zero gradient leaves parameters unchanged but advances opt_t") {
  const auto spec = tiny_spec(2, {3}, 1);
  RngStream rng(2, 3);
  auto store = diffcore::init_params(spec, rng);
  const auto before = store.at("W0").value;
  diffcore::optimizer_step(store, {});
  CHECK(store.at("W0").value == before);
  CHECK(store.opt_t == 1);
}

TEST_CASE("identical stores and gradients update identically") {
  const auto spec = tiny_spec(3, {4}, 2);
  RngStream rng(9, 9);
  auto a = diffcore::init_params(spec, rng);
  auto b = a;
  RngStream grads(10, 10);
  for (auto& [name, e] : a.entries) {
    const Matrix g = grads.normal_matrix(e.value.rows(), e.value.cols());
    e.grad = g;
    b.at(name).grad = g;
  }
  diffcore::optimizer_step(a, {});
  diffcore::optimizer_step(b, {});
  CHECK(stores_equal(a, b));
}

TEST_CASE("non-finite gradient raises a numeric error naming the parameter") {
  const auto spec = tiny_spec(1, {1}, 1);
  RngStream rng(2, 4);
  auto store = diffcore::init_params(spec, rng);
  store.at("W1").grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    diffcore::optimizer_step(store, {});
    FAIL("expected NumericError");
  } catch (const diffcore::NumericError& e) {
    CHECK(std::string(e.what()).find("W1") != std::string::npos);
  }
}

TEST_CASE("scaling all gradients by c > 0 preserves the update signs") {
  const auto spec = tiny_spec(3, {5}, 2);
  for (double c : {0.1, 10.0, 1000.0}) {
    RngStream rng(21, 21);
    auto a = diffcore::init_params(spec, rng);
    auto b = a;
    RngStream grads(22, 22);
    for (auto& [name, e] : a.entries) {
      const Matrix g = grads.normal_matrix(e.value.rows(), e.value.cols());
      e.grad = g;
      b.at(name).grad = c * g;
    }
    const auto before = a;
    diffcore::optimizer_step(a, {});
    diffcore::optimizer_step(b, {});
    for (const auto& [name, e] : a.entries) {
      const Matrix da = e.value - before.at(name).value;
      const Matrix db = b.at(name).value - before.at(name).value;
      for (Eigen::Index i = 0; i < da.size(); ++i) {
        if (std::abs(da(i)) < 1e-15 && std::abs(db(i)) < 1e-15) continue;
        CHECK(da(i) * db(i) > 0.0);  // same sign entrywise
      }
    }
  }
}

TEST_CASE("polyak update blends toward the main parameters") {
  const auto spec = tiny_spec(1, {1}, 1);
  RngStream rng(3, 3);
  auto target = diffcore::init_params(spec, rng);
  auto main = target;
  target.at("W0").value.setOnes();
  main.at("W0").value.setZero();
  diffcore::polyak_update(target, main, 0.995);
  CHECK(target.at("W0").value(0, 0) == doctest::Approx(0.995).epsilon(1e-12));

  // fixed point: target == main stays put for any rho
  auto t2 = main;
  diffcore::polyak_update(t2, main, 0.3);
  CHECK(stores_equal(t2, main));

  auto t3 = diffcore::init_params(spec, rng);
  auto m3 = t3;
  t3.at("W0").value.setZero();
  m3.at("W0").value.setConstant(2.0);
  diffcore::polyak_update(t3, m3, 0.5);
  CHECK(t3.at("W0").value(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("polyak is an elementwise contraction toward main") {
  const auto spec = tiny_spec(4, {6}, 3);
  RngStream rng(13, 13);
  auto target = diffcore::init_params(spec, rng);
  RngStream rng2(14, 14);
  auto main = diffcore::init_params(spec, rng2);
  const double rho = 0.9;
  auto before = target;
  diffcore::polyak_update(target, main, rho);
  for (const auto& [name, e] : target.entries) {
    const Matrix lhs = (e.value - main.at(name).value).cwiseAbs();
    const Matrix rhs =
        rho * (before.at(name).value - main.at(name).value).cwiseAbs();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("reset re-draws parameters and zeroes optimizer state") {
  const auto spec = tiny_spec(2, {4}, 1);
  RngStream init_rng(31, 0);
  auto store = diffcore::init_params(spec, init_rng);
  // dirty the moments with a step
  for (auto& [name, e] : store.entries) e.grad.setOnes();
  diffcore::optimizer_step(store, {});
  REQUIRE(store.opt_t == 1);

  RngStream reset_rng(77, 0);
  diffcore::reset_params(store, spec, reset_rng);
  CHECK(store.opt_t == 0);
  for (const auto& [name, e] : store.entries) {
    CHECK(e.m.isZero(0.0));
    CHECK(e.v.isZero(0.0));
  }
  // matches a fresh init from the same stream state
  RngStream reset_rng2(77, 0);
  const auto fresh = diffcore::init_params(spec, reset_rng2);
  CHECK(stores_equal(store, fresh));
  Eigen::VectorXd zero_in = Eigen::VectorXd::Zero(2);
  CHECK(diffcore::forward(store, spec, zero_in) ==
        diffcore::forward(fresh, spec, zero_in));
}

TEST_CASE("distinct reset seeds give distinct parameters") {
  const auto spec = tiny_spec(2, {4}, 1);
  std::set<double> first_weights;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, 1);
    const auto store = diffcore::init_params(spec, rng);
    first_weights.insert(store.at("W0").value(0, 0));
  }
  CHECK(first_weights.size() == 100);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  const auto spec = tiny_spec(3, {5, 4}, 2);
  RngStream rng(8, 8);
  auto store = diffcore::init_params(spec, rng);
  for (auto& [name, e] : store.entries)
    e.grad = rng.normal_matrix(e.value.rows(), e.value.cols());
  diffcore::optimizer_step(store, {});

  std::stringstream buf;
  diffcore::save_store(buf, store);
  const auto loaded = diffcore::load_store(buf);
  CHECK(loaded.opt_t == store.opt_t);
  for (const auto& [name, e] : store.entries) {
    CHECK(loaded.at(name).value == e.value);
    CHECK(loaded.at(name).m == e.m);
    CHECK(loaded.at(name).v == e.v);
  }
}
