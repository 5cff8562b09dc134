#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "entlib/adam.hpp"
#include "entlib/ops.hpp"
#include "entlib/tensor.hpp"
#include "testutil.hpp"

using namespace entlib;

TEST_CASE("adam with zero gradients is a fixed point") {
  Tensor w = Tensor::vector({1.5, -2.0, 0.25}, true);
  std::vector<Tensor> params{w};
  AdamState st = AdamState::init(params);
  const std::vector<real> before = w.values();
  for (int i = 0; i < 10; ++i) adam_step(params, st, 0.1);
  CHECK(w.values() == before);
  CHECK(st.step == 10);
}

TEST_CASE("adam first step moves by ~lr * sign(grad)") {
  Tensor w = Tensor::vector({1.0, -1.0, 5.0}, true);
  w.grad() = {0.3, -2.0, 1e-3};
  std::vector<Tensor> params{w};
  AdamState st = AdamState::init(params);
  const real lr = 0.0005;
  adam_step(params, st, lr);
  CHECK(w.at(0) == Catch::Approx(1.0 - lr).epsilon(1e-4));
  CHECK(w.at(1) == Catch::Approx(-1.0 + lr).epsilon(1e-4));
  CHECK(w.at(2) == Catch::Approx(5.0 - lr).epsilon(1e-4));
}

TEST_CASE("adam converges on a scalar quadratic") {
  Tensor w = Tensor::scalar(0.0, true);
  std::vector<Tensor> params{w};
  AdamState st = AdamState::init(params);
  for (int step = 0; step < 200; ++step) {
    w.zero_grad();
    w.grad()[0] = 2.0 * (w.at(0) - 3.0);  // d/dw (w-3)^2
    adam_step(params, st, 0.1);
  }
  CHECK(std::abs(w.at(0) - 3.0) < 0.05);
}

TEST_CASE("adam rejects shape mismatches") {
  Tensor w = Tensor::vector({1, 2}, true);
  std::vector<Tensor> params{w};
  AdamState st = AdamState::init(params);
  std::vector<Tensor> wrong{w, w};
  CHECK_THROWS_AS(adam_step(wrong, st, 0.1), ShapeError);
  st.first_moment[0].resize(5);
  CHECK_THROWS_AS(adam_step(params, st, 0.1), ShapeError);
}

TEST_CASE("adam step counter increments by one per call") {
  Tensor w = Tensor::scalar(1.0, true);
  std::vector<Tensor> params{w};
  AdamState st = AdamState::init(params);
  CHECK(st.step == 0);
  adam_step(params, st, 0.01);
  CHECK(st.step == 1);
  adam_step(params, st, 0.01);
  CHECK(st.step == 2);
}
