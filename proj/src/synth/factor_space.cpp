#include "disentlab/synth/factor_space.hpp"

#include <algorithm>
#include <unordered_set>

#include "disentlab/common/error.hpp"

namespace disentlab::synth {

FactorSpace::FactorSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
  std::unordered_set<std::string> names;
  for (const auto& f : factors_) {
    if (f.name.empty()) throw ValidationError("factor name must be nonempty");
    if (!names.insert(f.name).second) throw ValidationError("duplicate factor name: " + f.name);
    if (f.cardinality < 1) throw ValidationError("factor " + f.name + " has cardinality < 1");
    if (f.frozen && (*f.frozen < 0 || *f.frozen >= f.cardinality)) {
      throw ValidationError("factor " + f.name + " frozen outside its range");
    }
  }
}

FactorSpace FactorSpace::texture_dsprites(int orientation_count) {
  return FactorSpace({{"Texture", 5, {}},
                      {"Color", 7, {}},
                      {"Shape", 3, {}},
                      {"Scale", 6, {}},
                      {"Orientation", orientation_count, {}},
                      {"PosX", 32, {}},
                      {"PosY", 32, {}}});
}

std::size_t FactorSpace::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (factors_[k].name == name) return k;
  }
  throw ValidationError("unknown factor: " + std::string(name));
}

bool FactorSpace::contains(std::string_view name) const {
  return std::any_of(factors_.begin(), factors_.end(), [&](const Factor& f) { return f.name == name; });
}

void FactorSpace::freeze(std::string_view name, int value) {
  auto& f = factors_[index_of(name)];
  if (value < 0 || value >= f.cardinality) {
    throw ValidationError("cannot freeze " + f.name + " at " + std::to_string(value));
  }
  f.frozen = value;
}

void FactorSpace::freeze_centered(std::string_view name) {
  const auto& f = factors_[index_of(name)];
  freeze(name, f.cardinality / 2);
}

std::uint64_t FactorSpace::grid_size() const {
  std::uint64_t n = 1;
  for (const auto& f : factors_) {
    if (!f.frozen) n *= static_cast<std::uint64_t>(f.cardinality);
  }
  return n;
}

std::vector<std::size_t> FactorSpace::free_factors() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (!factors_[k].frozen) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> FactorSpace::variable_factors() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (!factors_[k].frozen && factors_[k].cardinality > 1) out.push_back(k);
  }
  return out;
}

FactorTuple FactorSpace::tuple_at(std::uint64_t flat) const {
  if (flat >= grid_size()) {
    throw ValidationError("flat index " + std::to_string(flat) + " outside grid of size " +
                          std::to_string(grid_size()));
  }
  FactorTuple t(factors_.size(), 0);
  for (std::size_t k = factors_.size(); k-- > 0;) {
    const auto& f = factors_[k];
    if (f.frozen) {
      t[k] = *f.frozen;
      continue;
    }
    const auto card = static_cast<std::uint64_t>(f.cardinality);
    t[k] = static_cast<int>(flat % card);
    flat /= card;
  }
  return t;
}

std::uint64_t FactorSpace::flat_index(const FactorTuple& tuple) const {
  validate(tuple);
  std::uint64_t flat = 0;
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    const auto& f = factors_[k];
    if (f.frozen) continue;
    flat = flat * static_cast<std::uint64_t>(f.cardinality) + static_cast<std::uint64_t>(tuple[k]);
  }
  return flat;
}

void FactorSpace::validate(const FactorTuple& tuple) const {
  if (tuple.size() != factors_.size()) {
    throw ValidationError("factor tuple has " + std::to_string(tuple.size()) + " values, space has " +
                          std::to_string(factors_.size()) + " factors");
  }
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    const auto& f = factors_[k];
    if (tuple[k] < 0 || tuple[k] >= f.cardinality) {
      throw ValidationError("factor " + f.name + " value " + std::to_string(tuple[k]) +
                            " outside [0, " + std::to_string(f.cardinality) + ")");
    }
    if (f.frozen && tuple[k] != *f.frozen) {
      throw ValidationError("factor " + f.name + " is frozen at " + std::to_string(*f.frozen));
    }
  }
}

FactorPair sample_pair(const FactorSpace& space, Rng& rng, int k) {
  auto candidates = space.variable_factors();
  if (k <= 0) throw ValidationError("pair sampling needs k >= 1");
  if (static_cast<std::size_t>(k) > candidates.size()) {
    throw ValidationError("k = " + std::to_string(k) + " exceeds the " + std::to_string(candidates.size()) +
                          " non-frozen factors");
  }
  FactorPair pair;
  pair.first = space.tuple_at(rng.uniform_index(space.grid_size()));
  pair.second = pair.first;
  // Partial Fisher-Yates: the first k entries become a uniform k-subset.
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
    const auto factor = candidates[i];
    const auto card = static_cast<std::uint64_t>(space.factor(factor).cardinality);
    // Draw among the card-1 other values.
    auto v = static_cast<int>(rng.uniform_index(card - 1));
    if (v >= pair.first[factor]) ++v;
    pair.second[factor] = v;
    pair.changed.insert(factor);
  }
  return pair;
}

}  // namespace disentlab::synth
