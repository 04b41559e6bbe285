#include "flowid/parameters.hpp"

#include <cmath>
#include <sstream>

#include "flowid/error.hpp"
#include "flowid/rng.hpp"

namespace flowid {

void ParameterStore::add(const std::string& name, Tensor value) {
  if (name.empty()) throw ConfigError("parameter name must be non-empty");
  if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor grad(value.shape(), 0.0);
  entries_.emplace(name, Entry{std::move(value), std::move(grad)});
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParameterStore::value(const std::string& name) const { return entry(name).value; }
Tensor& ParameterStore::value(const std::string& name) { return entry(name).value; }
const Tensor& ParameterStore::grad(const std::string& name) const { return entry(name).grad; }
Tensor& ParameterStore::grad(const std::string& name) { return entry(name).grad; }

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t total = 0;
  for (const auto& [_, e] : entries_) total += e.value.size();
  return total;
}

void ParameterStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

void ParameterStore::round_to_f32() {
  for (auto& [_, e] : entries_)
    for (auto& v : e.value.values()) v = static_cast<double>(static_cast<float>(v));
}

bool ParameterStore::all_finite() const {
  for (const auto& [_, e] : entries_)
    if (!e.value.all_finite()) return false;
  return true;
}

std::string ParameterStore::norm_report() const {
  std::ostringstream out;
  for (const auto& [name, e] : entries_) {
    double v2 = 0.0, g2 = 0.0;
    for (double v : e.value.values()) v2 += v * v;
    for (double g : e.grad.values()) g2 += g * g;
    out << name << ": |value|=" << std::sqrt(v2) << " |grad|=" << std::sqrt(g2) << '\n';
  }
  return out.str();
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  auto ia = a.entries_.begin();
  auto ib = b.entries_.begin();
  for (; ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !(ia->second.value == ib->second.value)) return false;
  }
  return true;
}

Tensor glorot_uniform(const Tensor::Shape& shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor out(shape);
  for (auto& v : out.values()) v = rng.uniform(-bound, bound);
  return out;
}

void AdamOptimizer::step(ParameterStore& store, const std::vector<std::string>& frozen_prefixes) {
  ++step_;
  const auto& c = config_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& name : store.names()) {
    bool frozen = false;
    for (const auto& prefix : frozen_prefixes) frozen = frozen || name.rfind(prefix, 0) == 0;
    if (frozen) continue;
    Tensor& value = store.value(name);
    const Tensor& grad = store.grad(name);
    auto [it, inserted] = moments_.try_emplace(name);
    if (inserted) {
      it->second.first = Tensor(value.shape(), 0.0);
      it->second.second = Tensor(value.shape(), 0.0);
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      value[i] -= c.learning_rate * c.weight_decay * value[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace flowid
