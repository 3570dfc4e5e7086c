#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "symspin/types.hpp"

namespace symspin {

inline long long binomial(int a, int b) {
  if (b < 0 || b > a) return 0;
  if (b > a - b) b = a - b;
  long long out = 1;
  for (int i = 1; i <= b; ++i) out = out * (a - b + i) / i;
  return out;
}

// all multi-indices in `nvars` variables with total degree <= maxdeg,
// ordered by total degree and then lexicographically within each degree
class MultiIndexSet {
 public:
  MultiIndexSet(int nvars, int maxdeg) : nvars_(nvars), maxdeg_(maxdeg) {
    if (nvars < 1) throw std::invalid_argument("MultiIndexSet: nvars must be positive");
    if (maxdeg < 0) throw std::invalid_argument("MultiIndexSet: maxdeg must be nonnegative");
    std::vector<int> cur(nvars, 0);
    for (int d = 0; d <= maxdeg; ++d) emit(cur, 0, d);
    degree_.resize(static_cast<int>(mi_.size()));
    for (std::size_t i = 0; i < mi_.size(); ++i) {
      int s = 0;
      for (int v : mi_[i]) s += v;
      degree_[static_cast<int>(i)] = s;
      lookup_[mi_[i]] = static_cast<int>(i);
    }
  }

  int nvars() const { return nvars_; }
  int maxdeg() const { return maxdeg_; }
  int size() const { return static_cast<int>(mi_.size()); }
  const std::vector<int>& operator[](int i) const { return mi_[i]; }
  const IVec& degrees() const { return degree_; }
  int degree(int i) const { return degree_[i]; }

  int find(const std::vector<int>& alpha) const {
    auto it = lookup_.find(alpha);
    return it == lookup_.end() ? -1 : it->second;
  }

 private:
  void emit(std::vector<int>& cur, int pos, int remaining) {
    if (pos == nvars_ - 1) {
      cur[pos] = remaining;
      mi_.push_back(cur);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      cur[pos] = v;
      emit(cur, pos + 1, remaining - v);
    }
  }

  int nvars_, maxdeg_;
  std::vector<std::vector<int>> mi_;
  IVec degree_;
  std::map<std::vector<int>, int> lookup_;
};

inline long long truncation_dim(int nvars, int maxdeg) {
  return binomial(maxdeg + nvars, nvars);
}

}  // namespace symspin
