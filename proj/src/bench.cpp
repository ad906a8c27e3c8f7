#include "fdz/bench.hpp"

#include "fdz/checkpoint.hpp"

#include <sys/resource.h>
#include <sys/utsname.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <new>
#include <sstream>
#include <thread>

namespace fdz::bench {

namespace {

long peak_rss_kb() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) == 0 && usage.ru_maxrss > 0) return usage.ru_maxrss;
  std::ifstream f("/proc/self/status");
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream is(line.substr(6));
      long kb = 0;
      is >> kb;
      return kb;
    }
  }
  return 0;  // not measurable on this host
}

}  // namespace

std::string host_fingerprint() {
  std::string cpu = "unknown-cpu";
  std::ifstream f("/proc/cpuinfo");
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("model name", 0) == 0) {
      const size_t colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  utsname un{};
  std::string sys = "unknown-os";
  if (uname(&un) == 0) sys = std::string(un.sysname) + " " + un.machine;
  return cpu + " / " + sys + " / " + std::to_string(std::thread::hardware_concurrency()) +
         " hw threads";
}

BenchReport run_bench(const BenchSpec& spec) {
  spec.validate();
  models::Model<float> model = models::build_model<float>(spec.kind, spec.cfg);
  if (spec.checkpoint) training::load_checkpoint(model, *spec.checkpoint);

  BenchReport report;
  report.model_name = spec.kind == models::ModelKind::fastnet ? "fastnet" : "dualfastnet";
  report.precision = spec.precision;
  report.host = host_fingerprint();
  report.runs = spec.runs;
  report.warmup = spec.warmup;

  std::uint64_t cell_index = 0;
  for (const auto& [res_h, res_w] : spec.resolutions) {
    const int h = models::pad_to_multiple(res_h, 32);
    const int w = models::pad_to_multiple(res_w, 32);
    for (int batch : spec.batch_sizes) {
      BenchCell cell;
      cell.height = h;
      cell.width = w;
      cell.batch = batch;
      cell.padded = (h != res_h || w != res_w);
      ++cell_index;
      try {
        const nn::Tensor4<float> input =
            nn::random_uniform<float>(batch, 3, h, w, 0.f, 1.f, spec.seed ^ cell_index);
        for (int i = 0; i < spec.warmup; ++i) models::forward_batch(model, input, false);
        std::vector<double> seconds;
        seconds.reserve(static_cast<size_t>(spec.runs));
        for (int i = 0; i < spec.runs; ++i) {
          const auto t0 = std::chrono::steady_clock::now();
          models::forward_batch(model, input, false);
          const auto t1 = std::chrono::steady_clock::now();
          seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        double mean = 0.0;
        for (double s : seconds) mean += s;
        mean /= static_cast<double>(seconds.size());
        double var = 0.0;
        for (double s : seconds) var += (s - mean) * (s - mean);
        var /= static_cast<double>(seconds.size());
        cell.mean_seconds = mean;
        cell.std_seconds = std::sqrt(var);
        cell.fps = batch / mean;
        cell.per_image_ms = mean / batch * 1000.0;
        cell.peak_rss_kb = peak_rss_kb();
      } catch (const std::bad_alloc&) {
        cell.feasible = false;  // record and continue the sweep
      }
      report.cells.push_back(cell);
    }
  }
  return report;
}

std::string BenchReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "size" << std::setw(7) << "batch" << std::setw(14) << "model"
     << std::setw(11) << "precision" << std::right << std::setw(10) << "fps" << "\n";
  for (const auto& c : cells) {
    const std::string size = std::to_string(c.width) + "x" + std::to_string(c.height);
    os << std::left << std::setw(12) << size << std::setw(7) << c.batch << std::setw(14)
       << model_name << std::setw(11) << precision << std::right << std::setw(10);
    if (c.feasible)
      os << std::fixed << std::setprecision(2) << c.fps;
    else
      os << "infeasible";
    os << "\n";
  }
  return os.str();
}

std::string BenchReport::to_records() const {
  std::ostringstream os;
  os << "host=" << host << "\n";
  os << "runs=" << runs << "\twarmup=" << warmup << "\n";
  for (const auto& c : cells) {
    os << "size=" << c.width << "x" << c.height << "\tbatch=" << c.batch << "\tmodel="
       << model_name << "\tprecision=" << precision << "\tfeasible=" << (c.feasible ? 1 : 0)
       << "\tpadded=" << (c.padded ? 1 : 0) << "\tfps=" << c.fps << "\tmean_s=" << c.mean_seconds
       << "\tstd_s=" << c.std_seconds << "\tper_image_ms=" << c.per_image_ms
       << "\tpeak_rss_kb=" << c.peak_rss_kb << "\n";
  }
  return os.str();
}

}  // namespace fdz::bench
