#include <algorithm>
#include <cmath>

#include "bcn/error.hpp"
#include "bcn/model.hpp"

namespace bcn {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  Param p;
  p.grad = Tensor(init.shape, 0.0);
  p.m = Tensor(init.shape, 0.0);
  p.v = Tensor(init.shape, 0.0);
  p.value = std::move(init);
  auto [it, fresh] = params_.emplace(name, std::move(p));
  if (!fresh) throw Error(Errc::InvalidArgument, "duplicate parameter " + name);
  return it->second.value;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(Errc::MissingInput, "missing parameter " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(Errc::MissingInput, "missing parameter " + name);
  return it->second;
}

Var ParamStore::var(Tape& tape, const std::string& name) {
  Param& p = at(name);
  return tape.param(p.value, p.grad);
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void Adam::step(ParamStore& params, double lr) {
  constexpr double b1 = 0.9, b2 = 0.99, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, t_);
  const double c2 = 1.0 - std::pow(b2, t_);
  for (auto& [name, p] : params.all()) {
    p.grad.check_finite("gradient of " + name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      p.m.data[i] = b1 * p.m.data[i] + (1 - b1) * g;
      p.v.data[i] = b2 * p.v.data[i] + (1 - b2) * g * g;
      p.value.data[i] -= lr * (p.m.data[i] / c1) / (std::sqrt(p.v.data[i] / c2) + eps);
    }
  }
}

std::map<std::string, double> gradient_check(ParamStore& params, const std::function<Var(Tape&)>& loss_fn, double h,
                                             int per_block, std::uint64_t seed) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  std::map<std::string, Tensor> analytic;
  for (auto& [name, p] : params.all()) analytic[name] = p.grad;

  auto eval = [&] {
    Tape tape;
    return tape.value(loss_fn(tape)).data[0];
  };
  std::mt19937_64 rng(seed);
  std::map<std::string, double> worst;
  for (auto& [name, p] : params.all()) {
    const Tensor& ga = analytic[name];
    // Probe the entries with the largest analytic gradient plus random ones,
    // so blocks with sparse gradients (embedding tables) are exercised.
    std::vector<std::size_t> order(p.value.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(ga.data[a]) > std::abs(ga.data[b]); });
    std::vector<std::size_t> probe(order.begin(), order.begin() + std::min<std::size_t>(order.size(), per_block / 2 + 1));
    std::uniform_int_distribution<std::size_t> pick(0, p.value.size() - 1);
    while (static_cast<int>(probe.size()) < std::min<int>(per_block, static_cast<int>(p.value.size()))) {
      probe.push_back(pick(rng));
    }
    double w = 0.0;
    for (std::size_t i : probe) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + h;
      const double up = eval();
      p.value.data[i] = orig - h;
      const double down = eval();
      p.value.data[i] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = ga.data[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-5});
      w = std::max(w, rel);
    }
    worst[name] = w;
  }
  params.zero_grad();
  return worst;
}

}  // namespace bcn
