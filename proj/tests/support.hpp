#pragma once
// Generators and small utilities shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "streamweave/scenario.hpp"
#include "streamweave/segmenter.hpp"

namespace swt {

using streamweave::Vec;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double gauss(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(eng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
  int between(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  bool coin(double p = 0.5) { return uniform() < p; }

  Vec vec(std::size_t d, double sigma = 1.0) {
    Vec v(d);
    for (auto& x : v) x = gauss(sigma);
    return v;
  }
  Vec unit(std::size_t d) {
    Vec v = vec(d);
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    return v;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Random frame stream made of regimes: steady direction with noise, slow
/// drift, and abrupt flicker. Timestamps step by period.
inline std::vector<streamweave::FrameEmbedding> random_stream(Rng& rng, std::size_t d, std::size_t frames,
                                                              double sigma, std::int64_t period = 1000) {
  std::vector<streamweave::FrameEmbedding> out;
  Vec dir = rng.unit(d);
  std::size_t left = 0;
  int regime = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    if (left == 0) {
      regime = rng.between(0, 2);
      left = static_cast<std::size_t>(rng.between(1, 24));
      dir = rng.unit(d);
    }
    --left;
    if (regime == 1) {
      Vec step = rng.vec(d, 0.15);
      for (std::size_t k = 0; k < d; ++k) dir[k] += step[k];
    } else if (regime == 2 && rng.coin(0.3)) {
      dir = rng.unit(d);
    }
    Vec v = dir;
    for (auto& x : v) x += rng.gauss(sigma);
    out.push_back({static_cast<std::int64_t>(i) * period, v});
  }
  return out;
}

/// Error code thrown by f, or nullopt when it returns normally.
template <typename F>
std::optional<streamweave::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const streamweave::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  auto p = std::filesystem::temp_directory_path() /
           ("swtest_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ProcResult {
  int code = -1;
  std::string out;
};

/// Runs a shell command, capturing stdout and stderr together.
inline ProcResult run_cmd(const std::string& cmd) {
  ProcResult r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace swt
