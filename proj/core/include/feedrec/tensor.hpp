#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "feedrec/random.hpp"

namespace feedrec::nn {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  // Leading dimension; 1 for scalars.
  std::size_t rows() const { return shape.empty() ? 1 : shape.front(); }
  // Product of the trailing dimensions.
  std::size_t cols() const;
  bool all_finite() const;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

struct ParamId {
  std::size_t index = 0;
};

// Named parameters with parallel gradient buffers, enumerated in insertion
// order. Rank-2 tensors are row-major (rows = fan-in for weight matrices).
class ParamStore {
 public:
  ParamId add(std::string name, std::vector<std::size_t> shape);

  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;
  const std::string& name(ParamId id) const { return entries_[id.index].name; }
  std::optional<ParamId> find(std::string_view name) const;
  ParamId at(std::string_view name) const;

  Tensor& value(ParamId id) { return entries_[id.index].value; }
  const Tensor& value(ParamId id) const { return entries_[id.index].value; }
  Tensor& grad(ParamId id) { return entries_[id.index].grad; }
  const Tensor& grad(ParamId id) const { return entries_[id.index].grad; }

  ConstMatrixMap matrix(ParamId id) const;
  MatrixMap grad_matrix(ParamId id);
  ConstVectorMap vector(ParamId id) const;
  VectorMap grad_vector(ParamId id);
  // Row `r` of a rank-2 parameter as a vector.
  ConstVectorMap row(ParamId id, std::size_t r) const;
  VectorMap grad_row(ParamId id, std::size_t r);

  void init_uniform(double lo, double hi, Rng& rng);
  void zero_grad();
  bool values_finite() const;
  bool grads_finite() const;

  // Adds `other`'s gradients; both stores must have the same layout.
  void accumulate_grads(const ParamStore& other);

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };
  std::vector<Entry> entries_;
};

// theta <- theta - lr * grad for every parameter, then clears gradients.
void sgd_update(ParamStore& params, double lr);

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates checked per tensor; 0 checks every coordinate.
  std::size_t samples_per_tensor = 0;
  std::uint64_t seed = 0;
  // Denominator floor for the relative error.
  double floor = 1e-6;
  // Only tensors whose name starts with one of these prefixes; empty = all.
  std::vector<std::string> prefixes{};
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares the gradients currently stored in `params` against central
// differences (f(theta + eps) - f(theta - eps)) / 2 eps of `loss`. The
// relative error of a coordinate is |a - n| / max(|a|, |n|, floor).
// Parameters are restored on return.
GradCheckResult grad_check(const std::function<double()>& loss, ParamStore& params,
                           const GradCheckOptions& options = {});

}  // namespace feedrec::nn
