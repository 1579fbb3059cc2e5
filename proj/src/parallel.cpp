#include "hig/parallel.hpp"

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#include "hig/error.hpp"

namespace hig {

namespace {
int g_max_threads = 1;
}

int max_threads() { return g_max_threads; }

void set_max_threads(int n) {
  if (n < 1) throw ConfigError("threads must be >= 1");
  g_max_threads = n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  int workers = std::min<std::size_t>(static_cast<std::size_t>(g_max_threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = n;
  std::exception_ptr error;

  auto body = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) threads.emplace_back(body);
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace hig
