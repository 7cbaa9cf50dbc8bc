#include "redinv/util.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>

namespace redinv {

void check_finite(const Vector& v, const char* where) {
  if (!v.allFinite()) throw InvalidInputError(where, "non-finite entries");
}

void check_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) throw InvalidInputError(where, "non-finite entries");
}

void parallel_for(Eigen::Index n, int threads, const std::function<void(Eigen::Index)>& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<Eigen::Index>(threads, n));
  std::atomic<Eigen::Index> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const Eigen::Index i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(); }

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }

}  // namespace redinv
