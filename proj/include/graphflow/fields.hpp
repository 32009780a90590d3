#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace graphflow {

// Dense per-vertex or per-ordered-edge storage. The tag keeps node and edge
// quantities from being mixed up at call sites.
template <class Tag>
class Field {
 public:
  Field() = default;
  explicit Field(std::size_t n, double value = 0.0) : values_(n, value) {}
  explicit Field(std::vector<double> values) : values_(std::move(values)) {}
  Field(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  std::span<const double> view() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  Field& operator+=(const Field& other) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }
  Field& operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator*(double c, Field a) { return a *= c; }
  friend bool operator==(const Field&, const Field&) = default;

 private:
  std::vector<double> values_;
};

struct NodeTag {};
struct EdgeTag {};

using NodeField = Field<NodeTag>;
// Indexed by ordered edge id of a FiniteGraph.
using EdgeField = Field<EdgeTag>;

}  // namespace graphflow
