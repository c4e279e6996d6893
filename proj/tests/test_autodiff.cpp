#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fairtab/autodiff.hpp"
#include "helpers.hpp"

using fairtab::Tape;
using fairtab::Tensor;
using fairtab::Value;

TEST_CASE("matmul basic cases", "[autodiff]") {
  Tape t;
  SECTION("identity times X") {
    Value I = t.constant(Tensor({2, 2}, {1, 0, 0, 1}));
    Value X = t.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    Value Y = t.matmul(I, X);
    CHECK(t.value(Y).values() == std::vector<double>{1, 2, 3, 4, 5, 6});
  }
  SECTION("hand arithmetic") {
    Value a = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Value b = t.constant(Tensor({2, 1}, {1, 1}));
    Value c = t.matmul(a, b);
    CHECK(t.value(c).values() == std::vector<double>{3, 7});
  }
  SECTION("zeros propagate") {
    Value a = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Value z = t.constant(Tensor::zeros({2, 2}));
    Value c = t.matmul(a, z);
    for (double v : t.value(c).values()) CHECK(v == 0.0);
  }
  SECTION("shape mismatch names both shapes") {
    Value a = t.constant(Tensor::zeros({2, 3}));
    Value b = t.constant(Tensor::zeros({4, 5}));
    CHECK_THROWS_WITH(t.matmul(a, b), Catch::Matchers::ContainsSubstring("[2, 3]") &&
                                          Catch::Matchers::ContainsSubstring("[4, 5]"));
  }
}

TEST_CASE("softmax rows", "[autodiff]") {
  Tape t;
  SECTION("all-zero row is uniform") {
    Value s = t.softmax_rows(t.constant(Tensor::zeros({1, 4})));
    for (double v : t.value(s).values()) CHECK(v == Catch::Approx(0.25).margin(1e-15));
  }
  SECTION("saturation") {
    Value s = t.softmax_rows(t.constant(Tensor({1, 2}, {0.0, 1000.0})));
    CHECK(t.value(s)[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(t.value(s)[1] == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("independent scalar oracle on [1,2,3]") {
    Value s = t.softmax_rows(t.constant(Tensor({1, 3}, {1, 2, 3})));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(t.value(s)[0] == Catch::Approx(std::exp(1.0) / z).epsilon(1e-12));
    CHECK(t.value(s)[1] == Catch::Approx(std::exp(2.0) / z).epsilon(1e-12));
    CHECK(t.value(s)[2] == Catch::Approx(std::exp(3.0) / z).epsilon(1e-12));
  }
  SECTION("rows sum to one and permutation equivariance") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 25; ++rep) {
      const std::size_t p = 2 + rep % 5;
      Tensor x({p, p}, testutil::random_vector(rng, p * p, -10.0, 10.0));
      Tape tape;
      Tensor s = tape.value(tape.softmax_rows(tape.constant(x)));
      for (std::size_t i = 0; i < p; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          CHECK(s.at(i, j) >= 0.0);
          sum += s.at(i, j);
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
      }
      // permute columns of the input; output columns permute identically
      std::vector<std::size_t> perm(p);
      for (std::size_t i = 0; i < p; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      Tensor xp({p, p});
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) xp.at(i, j) = x.at(i, perm[j]);
      Tape tape2;
      Tensor sp = tape2.value(tape2.softmax_rows(tape2.constant(xp)));
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          CHECK(sp.at(i, j) == Catch::Approx(s.at(i, perm[j])).epsilon(1e-13));
    }
  }
}

TEST_CASE("backward analytic cases", "[autodiff]") {
  SECTION("sum of parameters gives all-ones gradient") {
    Tape t;
    Tensor theta({4}, {0.3, -1.2, 5.0, 0.0});
    Value p = t.param(theta);
    t.backward(t.sum_all(p));
    for (double g : t.grad(p).values()) CHECK(g == 1.0);
  }
  SECTION("quadratic form") {
    Tape t;
    Value p = t.param(Tensor({2}, {1.0, 2.0}));
    t.backward(t.sum_all(t.mul(p, p)));
    CHECK(t.grad(p)[0] == 2.0);
    CHECK(t.grad(p)[1] == 4.0);
  }
  SECTION("non-scalar loss rejected") {
    Tape t;
    Value p = t.param(Tensor({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(t.backward(p), fairtab::ContractError);
  }
  SECTION("parameter unused by the loss has exactly zero gradient") {
    Tape t;
    Value used = t.param(Tensor({2}, {1.0, 2.0}));
    Value unused = t.param(Tensor({3}, {5.0, 6.0, 7.0}));
    t.backward(t.mean_all(used));
    for (double g : t.grad(unused).values()) CHECK(g == 0.0);
  }
}

// Composed graph touching every primitive op; autodiff vs central differences.
TEST_CASE("finite-difference check over composed graphs", "[autodiff]") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor w1({3, 4}, testutil::random_vector(rng, 12));
    Tensor w2({4, 4}, testutil::random_vector(rng, 16));
    Tensor gam({4}, testutil::random_vector(rng, 4, 0.5, 1.5));
    Tensor bet({4}, testutil::random_vector(rng, 4, -0.2, 0.2));
    Tensor table({5, 4}, testutil::random_vector(rng, 20));
    Tensor bias({4}, testutil::random_vector(rng, 4));
    Tensor x({2, 3}, testutil::random_vector(rng, 6));
    Tensor y({2}, {1.0, 0.0});

    std::vector<fairtab::Tensor*> params{&w1, &w2, &gam, &bet, &table, &bias};

    struct Built {
      Tape tape;
      std::vector<Value> bound;
      Value loss;
    };
    auto build = [&]() {
      auto b = std::make_unique<Built>();
      Tape& t = b->tape;
      for (auto* p : params) b->bound.push_back(t.param(*p));
      Value in = t.constant(x);
      Value h = t.matmul(in, b->bound[0]);                    // [2x4]
      h = t.add_rowvec(h, b->bound[5]);
      h = t.layernorm_rows(h, 1e-5);
      h = t.affine_rows(h, b->bound[2], b->bound[3]);
      Value att = t.softmax_rows(t.mul_scalar(t.matmul(h, t.transpose(h)), 0.5));
      h = t.add(h, t.matmul(att, h));
      h = t.relu(t.matmul(h, b->bound[1]));
      Value rows = t.gather_rows(b->bound[4], {1, 3});        // [2x4]
      h = t.mul(h, rows);
      Value flat = t.reshape(h, {8});
      Value picked = t.gather(flat, {0, 2, 5, 7});
      Value merged = t.concat({picked, t.mul_scalar(picked, -0.25)});
      Value sq = t.concat_rows({merged, merged});             // [2x8]
      Value logits = t.reshape(t.mean_all(sq), {1});
      Value two = t.concat({logits, t.add_scalar(logits, -0.3)});
      Value bce = t.bce_with_logits(two, y);
      Value focal = t.focal_with_logits(two, y, 0.25, 2.0);
      Value sig = t.sigmoid(t.mul_scalar(two, 0.7));
      Value lg = t.log(t.add_scalar(sig, 1.0));
      Value parts = t.concat({bce, focal, lg});
      b->loss = t.add(t.mean_all(parts), t.mul_scalar(t.max_of(merged), 0.1));
      return b;
    };

    auto built = build();
    built->tape.backward(built->loss);
    std::vector<Tensor> analytic;
    for (std::size_t i = 0; i < params.size(); ++i)
      analytic.push_back(built->tape.grad(built->bound[i]));

    auto eval = [&]() {
      auto b = build();
      return b->tape.scalar_value(b->loss);
    };
    auto r = testutil::finite_diff_check(params, eval, analytic);
    INFO("entries checked: " << r.entries);
    CHECK(r.max_err < 1e-4);
  }
}

TEST_CASE("log rejects non-positive input", "[autodiff]") {
  Tape t;
  CHECK_THROWS_AS(t.log(t.constant(Tensor({2}, {1.0, 0.0}))), fairtab::DomainError);
}

TEST_CASE("max_of routes subgradient to first maximum", "[autodiff]") {
  Tape t;
  Value v = t.param(Tensor({3}, {2.0, 2.0, 1.0}));
  t.backward(t.max_of(v));
  CHECK(t.grad(v).values() == std::vector<double>{1.0, 0.0, 0.0});
}
