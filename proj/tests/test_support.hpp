#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "latentforge/latent_geometry.hpp"

namespace testsupport {

inline latentforge::LatentVector lv(std::vector<double> v) { return latentforge::LatentVector(std::move(v)); }

inline latentforge::AttributeBoundary bnd(std::vector<double> n, double bias = 0.0, std::string name = "a") {
  return latentforge::AttributeBoundary(std::move(name), std::move(n), bias);
}

inline std::vector<double> gaussian(std::mt19937_64& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(d);
  for (auto& x : v) x = g(rng);
  return v;
}

inline double dotp(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
