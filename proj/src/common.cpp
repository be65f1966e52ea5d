#include "adrsq/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace adrsq {

namespace {

std::atomic<unsigned> g_threads{0};

LogLevel parse_level(const char* s) {
  if (s == nullptr) return LogLevel::Warn;
  const std::string v(s);
  if (v == "error") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

}  // namespace

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
  const unsigned n = g_threads.load();
  if (n != 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    try {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(n);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

LogLevel log_level() {
  static const LogLevel level = parse_level(std::getenv("ADRSQ_LOG"));
  return level;
}

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex m;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(m);
  std::cerr << "[adrsq " << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace adrsq
