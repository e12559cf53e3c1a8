#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "relrank/data.hpp"
#include "relrank/rng.hpp"

namespace relrank::testing {

/// Fresh empty directory under the system temp dir, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("relrank-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// 1-D dataset whose single feature equals the label. Groups are one per sample.
inline data::Dataset labeled_line(const std::vector<int>& labels) {
  std::vector<data::Sample> samples;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    samples.push_back({"x" + std::to_string(i), {static_cast<double>(labels[i])}, labels[i], "g" + std::to_string(i)});
  }
  return data::Dataset(std::move(samples));
}

inline std::vector<double> random_vector(Engine& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

/// Small synthetic set for fast end-to-end tests.
inline data::SynthConfig small_synth(std::uint64_t seed, std::size_t n = 600) {
  data::SynthConfig c;
  c.n = n;
  c.seed = seed;
  c.feature_dim = 8;
  c.informative_dims = 2;
  return c;
}

}  // namespace relrank::testing
