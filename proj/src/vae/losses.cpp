#include "disentlab/vae/losses.hpp"

namespace disentlab::vae {

std::vector<double> gauss_kl(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw ValidationError("gauss_kl: mean and log-variance lengths differ");
  std::vector<double> out(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) out[j] = gauss_kl(mu[j], logvar[j]);
  return out;
}

std::vector<bool> select_shared_dims(std::span<const double> divergence, std::optional<int> k_known) {
  const auto L = divergence.size();
  std::vector<bool> shared(L, true);
  if (L == 0) return shared;
  if (k_known) {
    if (*k_known < 0 || static_cast<std::size_t>(*k_known) > L) {
      throw ValidationError("k_known must lie in [0, latent_dim]");
    }
    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return divergence[a] > divergence[b]; });
    for (int i = 0; i < *k_known; ++i) shared[order[static_cast<std::size_t>(i)]] = false;
    return shared;
  }
  const auto [lo, hi] = std::minmax_element(divergence.begin(), divergence.end());
  if (*lo == *hi) {
    shared[0] = false;
    return shared;
  }
  const double tau = 0.5 * (*lo + *hi);
  for (std::size_t j = 0; j < L; ++j) shared[j] = divergence[j] < tau;
  return shared;
}

}  // namespace disentlab::vae
