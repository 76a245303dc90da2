#include "feedrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace feedrec::nn {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), values(shape_size(shape), fill) {}

std::size_t Tensor::cols() const {
  if (shape.size() < 2) return 1;
  return std::accumulate(shape.begin() + 1, shape.end(), std::size_t{1}, std::multiplies<>());
}

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ParamId ParamStore::add(std::string name, std::vector<std::size_t> shape) {
  if (find(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Entry e{std::move(name), Tensor(shape), Tensor(shape)};
  entries_.push_back(std::move(e));
  return ParamId{entries_.size() - 1};
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (entries_[k].name == name) return ParamId{k};
  }
  return std::nullopt;
}

ParamId ParamStore::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

ConstMatrixMap ParamStore::matrix(ParamId id) const {
  const auto& t = entries_[id.index].value;
  return ConstMatrixMap(t.values.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

MatrixMap ParamStore::grad_matrix(ParamId id) {
  auto& t = entries_[id.index].grad;
  return MatrixMap(t.values.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

ConstVectorMap ParamStore::vector(ParamId id) const {
  const auto& t = entries_[id.index].value;
  return ConstVectorMap(t.values.data(), static_cast<Eigen::Index>(t.size()));
}

VectorMap ParamStore::grad_vector(ParamId id) {
  auto& t = entries_[id.index].grad;
  return VectorMap(t.values.data(), static_cast<Eigen::Index>(t.size()));
}

ConstVectorMap ParamStore::row(ParamId id, std::size_t r) const {
  const auto& t = entries_[id.index].value;
  if (r >= t.rows()) throw std::out_of_range("row " + std::to_string(r) + " of " + entries_[id.index].name);
  return ConstVectorMap(t.values.data() + r * t.cols(), static_cast<Eigen::Index>(t.cols()));
}

VectorMap ParamStore::grad_row(ParamId id, std::size_t r) {
  auto& t = entries_[id.index].grad;
  if (r >= t.rows()) throw std::out_of_range("row " + std::to_string(r) + " of " + entries_[id.index].name);
  return VectorMap(t.values.data() + r * t.cols(), static_cast<Eigen::Index>(t.cols()));
}

void ParamStore::init_uniform(double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& e : entries_) {
    for (double& v : e.value.values) v = dist(rng);
  }
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) std::fill(e.grad.values.begin(), e.grad.values.end(), 0.0);
}

bool ParamStore::values_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.value.all_finite(); });
}

bool ParamStore::grads_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.grad.all_finite(); });
}

void ParamStore::accumulate_grads(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) throw std::invalid_argument("parameter layouts differ");
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    auto& dst = entries_[k].grad.values;
    const auto& src = other.entries_[k].grad.values;
    if (src.size() != dst.size()) throw std::invalid_argument("parameter layouts differ");
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void sgd_update(ParamStore& params, double lr) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params.value(ParamId{k}).values;
    const auto& g = params.grad(ParamId{k}).values;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= lr * g[j];
  }
  params.zero_grad();
}

GradCheckResult grad_check(const std::function<double()>& loss, ParamStore& params,
                           const GradCheckOptions& options) {
  GradCheckResult result;
  auto rng = make_rng(options.seed, 0x9c);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamId id{k};
    const auto& name = params.name(id);
    if (!options.prefixes.empty() &&
        std::none_of(options.prefixes.begin(), options.prefixes.end(),
                     [&](const std::string& p) { return name.rfind(p, 0) == 0; })) {
      continue;
    }
    auto& values = params.value(id).values;
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.samples_per_tensor > 0 && coords.size() > options.samples_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.samples_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t j : coords) {
      const double saved = values[j];
      values[j] = saved + options.eps;
      const double up = loss();
      values[j] = saved - options.eps;
      const double down = loss();
      values[j] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double analytic = params.grad(id).values[j];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error || !std::isfinite(rel)) {
        result.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        result.worst_parameter = name;
        result.worst_index = j;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace feedrec::nn
