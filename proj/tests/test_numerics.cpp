// Copyright 2026  The xmalign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <doctest.h>

#include "xmalign/errors.hpp"
#include "xmalign/matrix.hpp"
#include "xmalign/numerics.hpp"
#include "xmalign/rng.hpp"

using namespace xmalign;

TEST_CASE("matmul identity and zero cases") {
  Matrix v = Matrix::from_rows({{3.0}, {4.0}});
  Matrix r = matmul(Matrix::identity(2), v);
  CHECK(r(0, 0) == 3.0);
  CHECK(r(1, 0) == 4.0);

  Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  Matrix z = matmul(a, Matrix::from_rows({{0.0}, {0.0}}));
  CHECK(z(0, 0) == 0.0);
  CHECK(z(1, 0) == 0.0);
}

TEST_CASE("matmul hand-computed product") {
  Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  Matrix b = Matrix::from_rows({{5.0}, {6.0}});
  Matrix r = matmul(a, b);
  CHECK(r.rows == 2);
  CHECK(r.cols == 1);
  CHECK(r(0, 0) == doctest::Approx(17.0));
  CHECK(r(1, 0) == doctest::Approx(39.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Matrix a(2, 3), b(2, 2);
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul associativity on random matrices") {
  RandomSource rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n1 = 1 + rng.next_below(5);
    std::size_t n2 = 1 + rng.next_below(5);
    std::size_t n3 = 1 + rng.next_below(5);
    std::size_t n4 = 1 + rng.next_below(5);
    Matrix a(n1, n2), b(n2, n3), c(n3, n4);
    for (double& x : a.data) x = rng.next_uniform(-2.0, 2.0);
    for (double& x : b.data) x = rng.next_uniform(-2.0, 2.0);
    for (double& x : c.data) x = rng.next_uniform(-2.0, 2.0);
    Matrix lhs = matmul(matmul(a, b), c);
    Matrix rhs = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < lhs.data.size(); ++i) {
      double denom = std::max(1.0, std::abs(rhs.data[i]));
      CHECK(std::abs(lhs.data[i] - rhs.data[i]) / denom < 1e-9);
    }
  }
}

TEST_CASE("log_softmax symmetry and frozen values") {
  auto sym = log_softmax(std::vector<double>{0.0, 0.0});
  CHECK(sym[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(sym[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));

  auto v = log_softmax(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(v[0] == doctest::Approx(-2.4076059644443806).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(-1.4076059644443806).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx(-0.4076059644443806).epsilon(1e-12));
}

TEST_CASE("log_softmax does not overflow on extreme logits") {
  auto v = log_softmax(std::vector<double>{1000.0, 0.0});
  CHECK(std::isfinite(v[0]));
  CHECK(std::isfinite(v[1]));
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(-1000.0).epsilon(1e-12));
}

TEST_CASE("log_softmax exponentials sum to one") {
  RandomSource rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(1 + rng.next_below(10));
    for (double& x : v) x = rng.next_uniform(-50.0, 50.0);
    auto ls = log_softmax(v);
    double s = 0.0;
    for (double x : ls) s += std::exp(x);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("log_softmax shift invariance") {
  RandomSource rng(4);
  for (double c : {-1000.0, -3.5, 0.25, 999.0, 1000.0}) {
    std::vector<double> v(6), shifted(6);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = rng.next_uniform(-5.0, 5.0);
      shifted[i] = v[i] + c;
    }
    auto a = log_softmax(v);
    auto b = log_softmax(shifted);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
  }
}

TEST_CASE("log_softmax rejects empty input") {
  CHECK_THROWS_AS(log_softmax(std::vector<double>{}), ShapeError);
}

TEST_CASE("finite differences recover analytic derivatives") {
  auto square = [](const std::vector<double>& x) { return x[0] * x[0]; };
  auto g = finite_diff_grad(square, {3.0}, 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));

  auto constant = [](const std::vector<double>&) { return 4.2; };
  auto gc = finite_diff_grad(constant, {1.0, -2.0, 0.5}, 1e-5);
  for (double x : gc) CHECK(x == 0.0);

  auto norm2 = [](const std::vector<double>& x) {
    return x[0] * x[0] + x[1] * x[1];
  };
  auto gn = finite_diff_grad(norm2, {1.0, 2.0}, 1e-5);
  CHECK(gn[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(gn[1] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("finite differences reject non-finite function values") {
  auto bad = [](const std::vector<double>& x) { return std::log(x[0]); };
  CHECK_THROWS_AS(finite_diff_grad(bad, {-1.0}, 1e-5), NumericError);
}

TEST_CASE("equal seeds emit identical streams") {
  RandomSource a(123456789), b(123456789);
  for (int i = 0; i < 10000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("labeled substreams are stable and distinct") {
  RandomSource root(55);
  RandomSource before = root.split("stream-a");
  // Consuming the parent must not change what split produces.
  for (int i = 0; i < 17; ++i) root.next_u64();
  RandomSource after = root.split("stream-a");
  for (int i = 0; i < 100; ++i) {
    REQUIRE(before.next_u64() == after.next_u64());
  }

  RandomSource other = root.split("stream-b");
  RandomSource again = root.split("stream-a");
  bool all_equal = true;
  for (int i = 0; i < 100; ++i) {
    if (other.next_u64() != again.next_u64()) all_equal = false;
  }
  CHECK_FALSE(all_equal);
}

TEST_CASE("bounded draws stay in range") {
  RandomSource rng(9);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.next_below(7) < 7);
    double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(std::isfinite(rng.next_gaussian()));
  }
  CHECK_THROWS_AS(rng.next_below(0), ValidationError);
}

TEST_CASE("gaussian draws have sane moments") {
  RandomSource rng(77);
  const int n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = rng.next_gaussian();
    sum += g;
    sum2 += g * g;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}
