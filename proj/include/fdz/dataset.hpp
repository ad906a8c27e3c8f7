#pragma once

#include "fdz/image.hpp"
#include "fdz/scattering.hpp"
#include "fdz/training.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fdz::data {

// Haze synthesis parameters: per clean/depth pair, `variations` independent
// draws of atmospheric light (shared RGB scalar) and scattering coefficient.
struct SynthesisSpec {
  std::array<float, 2> a_range{0.5f, 1.0f};
  std::array<float, 2> beta_range{1.4f, 1.6f};
  int variations = 4;
  std::uint64_t seed = 0;
  std::string out_dir;
  double train_frac = 0.8;  // scene-level split fractions; remainder is test
  double val_frac = 0.1;

  void validate() const;
};

struct SampleRecord {
  std::string id;  // "<scene>_v<k>"
  std::string clean_path, depth_path, hazy_path, trans_path, airlight_path;  // manifest-relative
  float a = 0.f;
  float beta = 0.f;
  int variation = 0;
  std::string split;  // train | val | test
  std::uint32_t crc_clean = 0, crc_hazy = 0, crc_trans = 0, crc_airlight = 0;
};

struct Manifest {
  std::string base_dir;  // directory holding the manifest file
  std::vector<SampleRecord> records;

  std::string resolve(const std::string& rel) const { return base_dir + "/" + rel; }
};

struct dataset_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthesizes `variations` hazy samples per clean/depth pair into
// out_dir/{clean,depth,hazy,trans,airlight}/ and writes out_dir/manifest.tsv.
// Clean images are PNG, depth and transmission are FMAP, airlight is stored
// as a constant PNG; the exact draw values live in the manifest. Scenes are
// processed in sorted-stem order with per-scene derived seeds (seed XOR scene
// index), so parallel and serial runs produce identical bytes. The
// train/val/test split is assigned per scene, never per variation.
Manifest synthesize_dataset(const std::string& clean_dir, const std::string& depth_dir,
                            const SynthesisSpec& spec);

void write_manifest(const Manifest& m, const std::string& path);
Manifest read_manifest(const std::string& path);

// Records of one split, in manifest order. split "all" selects everything.
std::vector<SampleRecord> split_records(const Manifest& m, const std::string& split);

// Decodes one record into a training sample, verifying stored checksums.
training::Sample load_sample(const Manifest& m, const SampleRecord& rec);

// Eager convenience loader used by the trainer and CLI.
std::vector<training::Sample> load_split(const Manifest& m, const std::string& split);

// CRC-32 of a file's raw bytes.
std::uint32_t file_crc32(const std::string& path);

// Procedural desk-scale scenes: smooth colorful clean images (values kept
// away from 0 and 1) and ramp/sphere depth maps scaled so transmission stays
// above 1/3 for any beta in the synthesis range, which keeps 8-bit round-trip
// recovery within 2/255.
void generate_desk_scenes(int count, int height, int width, std::uint64_t seed,
                          const std::string& clean_dir, const std::string& depth_dir);

}  // namespace fdz::data
