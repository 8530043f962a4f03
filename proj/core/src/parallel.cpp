#include "dynalloc/parallel.hpp"

namespace dynalloc {

namespace {
std::atomic<std::size_t> g_workers{0};
}

std::size_t worker_count() noexcept {
  const std::size_t w = g_workers.load();
  if (w != 0) return w;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void set_worker_count(std::size_t workers) noexcept { g_workers.store(workers); }

void pairwise_sum_into(std::vector<std::vector<double>>& parts, std::vector<double>& out) {
  if (parts.empty()) return;
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) {
      auto& dst = parts[i];
      const auto& src = parts[i + stride];
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  out.assign(parts.front().begin(), parts.front().end());
}

}  // namespace dynalloc
