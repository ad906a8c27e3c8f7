#pragma once

#include "fdz/models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fdz::bench {

// Forward-pass throughput sweep: resolutions x batch sizes, fixed-seed random
// inputs, warmup runs excluded, timing covers the forward pass only.
struct BenchSpec {
  models::ModelKind kind = models::ModelKind::fastnet;
  models::FastNetConfig cfg;
  std::optional<std::string> checkpoint;
  std::vector<std::pair<int, int>> resolutions{{64, 64}, {128, 128}};
  std::vector<int> batch_sizes{1, 8};
  int runs = 20;
  int warmup = 3;
  std::string precision = "fp32";  // metadata only
  std::uint64_t seed = 0;

  void validate() const {
    if (runs < 1) throw std::invalid_argument("BenchSpec: runs must be >= 1");
    if (warmup < 0) throw std::invalid_argument("BenchSpec: warmup must be >= 0");
    if (resolutions.empty() || batch_sizes.empty())
      throw std::invalid_argument("BenchSpec: empty sweep");
  }
};

struct BenchCell {
  int height = 0, width = 0, batch = 0;
  bool padded = false;     // resolution was rounded up to a multiple of 32
  bool feasible = true;    // false when allocation failed; sweep continues
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  double fps = 0.0;            // batch / mean_seconds
  double per_image_ms = 0.0;   // mean_seconds / batch * 1000
  long peak_rss_kb = 0;        // process high-water mark, 0 if unavailable
};

struct BenchReport {
  std::string model_name;
  std::string precision;
  std::string host;
  int runs = 0, warmup = 0;
  std::vector<BenchCell> cells;

  // Aligned columns: size, batch, model, precision, fps.
  std::string to_table() const;
  // One key=value record per cell.
  std::string to_records() const;
};

BenchReport run_bench(const BenchSpec& spec);

std::string host_fingerprint();

}  // namespace fdz::bench
