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

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "allin/error.hpp"

namespace allin {

// Process-wide byte accounting for Matrix storage. Only Matrix buffers are
// counted; the bench command reads these to report transient allocation.
namespace alloc_stats {
std::size_t current_bytes() noexcept;
std::size_t peak_bytes() noexcept;
/// Resets the peak watermark to the current live byte count.
void reset_peak() noexcept;
void on_allocate(std::size_t bytes) noexcept;
void on_deallocate(std::size_t bytes) noexcept;
}  // namespace alloc_stats

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t count) {
    auto* p = static_cast<T*>(::operator new(count * sizeof(T)));
    alloc_stats::on_allocate(count * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t count) noexcept {
    alloc_stats::on_deallocate(count * sizeof(T));
    ::operator delete(p);
  }

  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

/// Dense row-major float64 matrix.
class Matrix {
 public:
  using Storage = std::vector<double, TrackingAllocator<double>>;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return {data_.data(), data_.size()}; }
  std::span<const double> data() const noexcept {
    return {data_.data(), data_.size()};
  }

  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Storage data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// Counter-based random stream.
///
/// The stream key is `mix64(master_seed ^ mix64(fnv1a64(purpose_tag)))`, and
/// output i is `mix64(key + (i + 1) * 0x9E3779B97F4A7C15)` where mix64 is the
/// splitmix64 finalizer. That is exactly a SplitMix64 generator seeded with
/// `key`, so any (seed, tag, counter) triple fully determines what follows.
class SeedStream {
 public:
  SeedStream(std::uint64_t master_seed, std::string purpose_tag,
             std::uint64_t counter = 0);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  const std::string& purpose_tag() const noexcept { return purpose_tag_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double next_uniform() noexcept;
  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) noexcept;

  /// Independent child stream: same master seed, tag extended by `/sub`.
  SeedStream derive(std::string_view sub) const;
  SeedStream derive(std::uint64_t index) const;

 private:
  std::uint64_t master_seed_;
  std::string purpose_tag_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// I.i.d. standard normals via Box-Muller; each pair of uniforms yields the
/// cosine and sine variates in that order, row-major.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, SeedStream& stream);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// Π_c · m: subtracts each column's mean over rows.
Matrix center_over_nodes(const Matrix& m);
std::vector<double> column_means(const Matrix& m);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs of the
/// R diagonal folded into Q).
Matrix random_orthogonal(std::size_t d, SeedStream& stream);

/// Uniformly random permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> random_permutation(std::size_t n, SeedStream& stream);
/// Permutation matrix P with (X·P) column j equal to X column perm[j].
Matrix permutation_matrix(std::span<const std::size_t> perm);

/// Column-wise concatenation [a | b].
Matrix hconcat(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace allin
