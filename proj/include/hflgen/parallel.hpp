// Copyright 2026 The HFLGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace hflgen {

// Worker-thread count for the Monte Carlo drivers. Results never depend on
// it: every trial writes into its own slot and reductions run in index order.
struct Parallelism {
  std::size_t threads = 1;

  // HFLGEN_THREADS if set and positive, otherwise 1.
  static Parallelism from_environment() {
    if (const char* env = std::getenv("HFLGEN_THREADS")) {
      try {
        const long value = std::stol(env);
        if (value > 0) return {static_cast<std::size_t>(value)};
      } catch (const std::exception&) {
      }
    }
    return {1};
  }
};

// Calls fn(i) for every i in [0, count). The first exception thrown by any
// worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, Parallelism par, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(par.threads, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 0; t + 1 < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& thread : pool) thread.join();
  if (failure) std::rethrow_exception(failure);
}

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

// Monte Carlo mean with its standard error (sample sd / sqrt(n)).
struct GenEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

// Two-pass mean and standard error. A single sample has standard error 0.
inline GenEstimate summarize(std::span<const double> values) {
  GenEstimate est;
  est.trials = values.size();
  if (values.empty()) return est;
  const double n = static_cast<double>(values.size());
  est.mean = compensated_sum(values) / n;
  if (values.size() < 2) return est;
  CompensatedSum squares;
  for (double v : values) squares.add((v - est.mean) * (v - est.mean));
  est.std_error = std::sqrt(squares.value() / (n - 1.0)) / std::sqrt(n);
  return est;
}

}  // namespace hflgen
