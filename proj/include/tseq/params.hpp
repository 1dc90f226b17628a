#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "tseq/common.hpp"
#include "tseq/mat.hpp"
#include "tseq/rng.hpp"

namespace tseq {

// Named learnable arrays with paired gradient buffers. Declaration order is
// the checkpoint serialization order. The trainer is the single writer of
// values; the tape accumulates into grads.
template <class T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat<T> value;
    Mat<T> grad;
  };

  int add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (index_.count(name)) throw Error("duplicate parameter: " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back({name, Mat<T>(rows, cols), Mat<T>(rows, cols)});
    return static_cast<int>(entries_.size()) - 1;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  Entry& at(int id) { return entries_[static_cast<std::size_t>(id)]; }
  const Entry& at(int id) const { return entries_[static_cast<std::size_t>(id)]; }
  Entry& named(const std::string& name) {
    int id = find(name);
    if (id < 0) throw Error("unknown parameter: " + name);
    return entries_[static_cast<std::size_t>(id)];
  }

  std::size_t count() const { return entries_.size(); }
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.grad.fill(T(0));
  }

  // Deep copy of values only (checkpoint snapshots during training).
  std::vector<Mat<T>> snapshot() const {
    std::vector<Mat<T>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.value);
    return out;
  }

  void restore(const std::vector<Mat<T>>& snap) {
    if (snap.size() != entries_.size()) throw Error("snapshot size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      if (!snap[i].same_shape(entries_[i].value)) throw Error("snapshot shape mismatch");
      entries_[i].value = snap[i];
    }
  }

  // Uniform init in [-scale, scale] from a stream derived from (seed, name).
  void init_uniform(const std::string& name, std::uint64_t seed, double scale) {
    Entry& e = named(name);
    auto rng = make_rng(seed, "init:" + name);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (std::size_t i = 0; i < e.value.size(); ++i) e.value.data()[i] = static_cast<T>(dist(rng));
  }

  // Fan-in scaled uniform init for affine weights, biases stay zero.
  void init_fan_in(const std::string& name, std::uint64_t seed) {
    Entry& e = named(name);
    const double scale = 1.0 / std::sqrt(static_cast<double>(e.value.rows()));
    init_uniform(name, seed, scale);
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace tseq
