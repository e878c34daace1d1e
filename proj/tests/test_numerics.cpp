// Copyright 2026 The allin Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "allin/numerics.hpp"
#include "support.hpp"

using namespace allin;

TEST_CASE("gaussian_matrix is reproducible for equal stream state") {
  SeedStream a(42, "test"), b(42, "test");
  const Matrix x = gaussian_matrix(2, 3, a);
  const Matrix y = gaussian_matrix(2, 3, b);
  CHECK(x == y);
  CHECK(a.counter() == b.counter());
  // the counter is the only thing that moved
  CHECK(a.counter() > 0);
  CHECK(a.purpose_tag() == "test");
}

TEST_CASE("gaussian_matrix 1000x1000 moments") {
  SeedStream s(1, "moments");
  const Matrix g = gaussian_matrix(1000, 1000, s);
  double sum = 0.0;
  for (double v : g.data()) sum += v;
  const double mean = sum / 1e6;
  double ss = 0.0;
  for (double v : g.data()) ss += (v - mean) * (v - mean);
  const double var = ss / (1e6 - 1);
  // 3 sigma of the mean is 0.003, of the variance about 0.0042
  CHECK(std::abs(mean) <= 0.01);
  CHECK(var >= 0.99);
  CHECK(var <= 1.01);
}

TEST_CASE("gaussian_matrix rejects empty shapes") {
  SeedStream s(0, "x");
  CHECK_THROWS_KIND(gaussian_matrix(0, 5, s), ErrorKind::Dimension);
  CHECK_THROWS_KIND(gaussian_matrix(5, 0, s), ErrorKind::Dimension);
}

TEST_CASE("seed streams: tags and derivation") {
  SeedStream a(9, "node"), b(9, "edge"), c(10, "node");
  const auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
  CHECK(x != y);
  CHECK(x != z);
  SeedStream d = a.derive("child"), e = SeedStream(9, "node/child");
  CHECK(d.next_u64() == e.next_u64());
  SeedStream f = a.derive(std::uint64_t{3}), g = a.derive(std::uint64_t{4});
  CHECK(f.next_u64() != g.next_u64());

  // documented construction: SplitMix64 seeded with the mixed key
  SeedStream h(5, "abc");
  const std::uint64_t key = mix64(5 ^ mix64(fnv1a64("abc")));
  CHECK(h.next_u64() == mix64(key + 0x9E3779B97F4A7C15ULL));
  CHECK(h.next_u64() == mix64(key + 2 * 0x9E3779B97F4A7C15ULL));

  // resuming at a counter continues the same sequence
  SeedStream i(5, "abc");
  i.next_u64();
  SeedStream j(5, "abc", 1);
  CHECK(i.next_u64() == j.next_u64());
}

TEST_CASE("uniforms stay inside (0,1) and next_below is bounded") {
  SeedStream s(3, "u");
  for (int i = 0; i < 10000; ++i) {
    const double u = s.next_uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(s.next_below(7) < 7);
  }
}

TEST_CASE("matmul examples") {
  const Matrix m{{1, 2}, {3, 4}};
  CHECK(matmul(Matrix::identity(2), m) == m);
  CHECK(matmul(m, Matrix{{1}, {1}}) == Matrix{{3}, {7}});
  CHECK_THROWS_KIND(matmul(Matrix(2, 3), Matrix(2, 2)), ErrorKind::Dimension);
}

TEST_CASE("matmul_tn, matmul_nt and transpose agree with matmul") {
  SeedStream s(4, "t");
  const Matrix a = gaussian_matrix(5, 3, s), b = gaussian_matrix(5, 4, s),
               c = gaussian_matrix(6, 3, s);
  CHECK(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)) < 1e-14);
  CHECK(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))) < 1e-14);
  CHECK(transpose(transpose(a)) == a);
}

TEST_CASE("matmul is associative on random 20x20 triples") {
  SeedStream s(11, "assoc");
  for (int t = 0; t < 10; ++t) {
    const Matrix a = gaussian_matrix(20, 20, s), b = gaussian_matrix(20, 20, s),
                 c = gaussian_matrix(20, 20, s);
    const Matrix l = matmul(matmul(a, b), c), r = matmul(a, matmul(b, c));
    CHECK(frobenius_norm(l - r) / frobenius_norm(l) < 1e-9);
  }
}

TEST_CASE("center_over_nodes examples") {
  CHECK(center_over_nodes(Matrix{{5}, {5}, {5}}) == Matrix{{0}, {0}, {0}});
  CHECK(max_abs_diff(center_over_nodes(Matrix{{1, 0}, {0, 1}}),
                     Matrix{{0.5, -0.5}, {-0.5, 0.5}}) < 1e-15);
  CHECK(center_over_nodes(Matrix{{7, 3}}) == Matrix{{0, 0}});
}

TEST_CASE("center_over_nodes is idempotent and zeroes column means") {
  SeedStream s(12, "center");
  for (int t = 0; t < 10; ++t) {
    const Matrix m = gaussian_matrix(1 + t * 3, 4, s);
    const Matrix once = center_over_nodes(m);
    CHECK(max_abs_diff(center_over_nodes(once), once) < 1e-12);
    for (double mean : column_means(once)) CHECK(std::abs(mean) < 1e-12);
  }
}

TEST_CASE("random_orthogonal") {
  SeedStream s(13, "q");
  const Matrix q1 = random_orthogonal(1, s);
  CHECK(std::abs(q1(0, 0)) == 1.0);
  for (std::size_t d : {2, 3, 4, 8, 17}) {
    const Matrix q = random_orthogonal(d, s);
    CHECK(frobenius_norm(matmul_nt(q, q) - Matrix::identity(d)) < 1e-12);
  }
  SeedStream a(1, "qa"), b(1, "qb");
  CHECK(max_abs_diff(random_orthogonal(4, a), random_orthogonal(4, b)) > 1e-6);
}

TEST_CASE("permutations") {
  SeedStream s(14, "perm");
  const auto p = random_permutation(10, s);
  CHECK(std::set<std::size_t>(p.begin(), p.end()).size() == 10);
  const Matrix x{{1, 2, 3}, {4, 5, 6}};
  const std::vector<std::size_t> perm{2, 0, 1};
  // column j of X·P is column perm[j] of X
  CHECK(matmul(x, permutation_matrix(perm)) == Matrix{{3, 1, 2}, {6, 4, 5}});
}

TEST_CASE("hconcat and elementwise operators") {
  CHECK(hconcat(Matrix{{1, 2}}, Matrix{{9}}) == Matrix{{1, 2, 9}});
  CHECK_THROWS_KIND(hconcat(Matrix(2, 1), Matrix(3, 1)), ErrorKind::Dimension);
  Matrix a{{1, 2}};
  a += Matrix{{1, 1}};
  CHECK(a == Matrix{{2, 3}});
  CHECK(2.0 * a == Matrix{{4, 6}});
  CHECK_THROWS_KIND(a += Matrix(2, 2), ErrorKind::Dimension);
}

TEST_CASE("allocation tracking sees matrix buffers") {
  alloc_stats::reset_peak();
  const auto before = alloc_stats::current_bytes();
  {
    Matrix big(1000, 100);
    CHECK(alloc_stats::current_bytes() - before == 1000 * 100 * sizeof(double));
  }
  CHECK(alloc_stats::current_bytes() == before);
  CHECK(alloc_stats::peak_bytes() >= before + 1000 * 100 * sizeof(double));
}
