#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "disentlab/common/random.hpp"

namespace disentlab::synth {

struct Factor {
  std::string name;
  int cardinality = 1;
  // A frozen factor always takes this value and does not span the grid.
  std::optional<int> frozen;
};

/// One value index per factor of a FactorSpace.
using FactorTuple = std::vector<int>;

/// Ordered set of named factors of variation. The grid spans the Cartesian
/// product of the non-frozen factors in mixed-radix order, last factor
/// varying fastest.
class FactorSpace {
 public:
  FactorSpace() = default;
  explicit FactorSpace(std::vector<Factor> factors);

  // Texture:5 Color:7 Shape:3 Scale:6 Orientation:40 PosX:32 PosY:32.
  static FactorSpace texture_dsprites(int orientation_count = 40);

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }
  const Factor& factor(std::size_t k) const { return factors_.at(k); }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  void freeze(std::string_view name, int value);
  // Freeze at the middle value (cardinality / 2).
  void freeze_centered(std::string_view name);

  std::uint64_t grid_size() const;
  std::vector<std::size_t> free_factors() const;
  // Factors that can take more than one value in the grid.
  std::vector<std::size_t> variable_factors() const;

  FactorTuple tuple_at(std::uint64_t flat) const;
  std::uint64_t flat_index(const FactorTuple& tuple) const;

  // Throws ValidationError naming the offending factor.
  void validate(const FactorTuple& tuple) const;

 private:
  std::vector<Factor> factors_;
};

struct FactorPair {
  FactorTuple first;
  FactorTuple second;
  std::set<std::size_t> changed;
};

/// Weak-supervision pair: the first tuple is uniform on the grid, then k
/// distinct variable factors are resampled to a different value each.
FactorPair sample_pair(const FactorSpace& space, Rng& rng, int k);

}  // namespace disentlab::synth
