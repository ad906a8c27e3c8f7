#include "fdz/dataset.hpp"

#include "fdz/fmap.hpp"
#include "fdz/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace fdz::data {

void SynthesisSpec::validate() const {
  if (!(a_range[0] > 0.f) || a_range[1] > 1.f || a_range[0] > a_range[1])
    throw std::invalid_argument("SynthesisSpec: A range must lie within (0,1]");
  if (!(beta_range[0] > 0.f) || beta_range[0] > beta_range[1])
    throw std::invalid_argument("SynthesisSpec: beta range must be positive");
  if (variations < 1) throw std::invalid_argument("SynthesisSpec: variations must be >= 1");
  if (train_frac < 0 || val_frac < 0 || train_frac + val_frac > 1.0)
    throw std::invalid_argument("SynthesisSpec: bad split fractions");
  if (out_dir.empty()) throw std::invalid_argument("SynthesisSpec: out_dir required");
}

std::uint32_t file_crc32(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw file_not_found("no such file: " + path);
  std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, nullptr, 0));
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    const std::streamsize n = f.gcount();
    if (n > 0)
      crc = static_cast<std::uint32_t>(
          crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(n)));
  }
  return crc;
}

namespace {

std::vector<std::string> sorted_stems(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw dataset_error("not a directory: " + dir);
  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) stems.push_back(e.path().stem());
  std::sort(stems.begin(), stems.end());
  return stems;
}

struct SceneOutput {
  std::vector<SampleRecord> records;
};

SceneOutput synthesize_scene(const std::string& stem, int scene_index,
                             const std::string& clean_src, const std::string& depth_src,
                             const SynthesisSpec& spec, const std::string& split) {
  const Image clean = load_image(clean_src);
  const Raster depth_raster = read_fmap(depth_src);
  if (depth_raster.height() != clean.height() || depth_raster.width() != clean.width() ||
      depth_raster.channels() != 1)
    throw dataset_error("depth map does not match clean image: " + depth_src);
  const DepthMap depth{Raster(depth_raster)};

  // Normalized clean copy and depth copy make the output tree self-contained.
  const std::string clean_rel = "clean/" + stem + ".png";
  const std::string depth_rel = "depth/" + stem + ".fmap";
  save_image(clean, spec.out_dir + "/" + clean_rel);
  write_fmap(depth_raster, spec.out_dir + "/" + depth_rel);
  const std::uint32_t crc_clean = file_crc32(spec.out_dir + "/" + clean_rel);

  std::mt19937_64 rng(spec.seed ^ static_cast<std::uint64_t>(scene_index));
  std::uniform_real_distribution<double> draw_a(spec.a_range[0], spec.a_range[1]);
  std::uniform_real_distribution<double> draw_beta(spec.beta_range[0], spec.beta_range[1]);

  SceneOutput out;
  for (int v = 0; v < spec.variations; ++v) {
    SampleRecord rec;
    rec.id = stem + "_v" + std::to_string(v);
    rec.variation = v;
    rec.split = split;
    rec.a = static_cast<float>(draw_a(rng));
    rec.beta = static_cast<float>(draw_beta(rng));
    rec.clean_path = clean_rel;
    rec.depth_path = depth_rel;
    rec.hazy_path = "hazy/" + rec.id + ".png";
    rec.trans_path = "trans/" + rec.id + ".fmap";
    rec.airlight_path = "airlight/" + rec.id + ".png";
    rec.crc_clean = crc_clean;

    const AtmosphericLight light(rec.a);
    const TransmissionMap t = transmission_from_depth(depth, rec.beta);
    const Image hazy = synthesize_haze(clean, t, light);
    const Image airlight_map(clean.height(), clean.width(), 3, rec.a);

    save_image(hazy, spec.out_dir + "/" + rec.hazy_path);
    write_fmap(t.raster(), spec.out_dir + "/" + rec.trans_path);
    save_image(airlight_map, spec.out_dir + "/" + rec.airlight_path);
    rec.crc_hazy = file_crc32(spec.out_dir + "/" + rec.hazy_path);
    rec.crc_trans = file_crc32(spec.out_dir + "/" + rec.trans_path);
    rec.crc_airlight = file_crc32(spec.out_dir + "/" + rec.airlight_path);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

Manifest synthesize_dataset(const std::string& clean_dir, const std::string& depth_dir,
                            const SynthesisSpec& spec) {
  spec.validate();
  const std::vector<std::string> stems = sorted_stems(clean_dir, ".png");
  if (stems.empty()) throw dataset_error("no .png clean images in " + clean_dir);
  for (const auto& sub : {"clean", "depth", "hazy", "trans", "airlight"})
    fs::create_directories(fs::path(spec.out_dir) / sub);

  // Scene-level split: the first round(train_frac*S) scenes train, the next
  // round(val_frac*S) validate, the rest test. No scene appears in two splits.
  const int scene_count = static_cast<int>(stems.size());
  const int n_train = static_cast<int>(std::lround(spec.train_frac * scene_count));
  const int n_val = std::min(scene_count - n_train,
                             static_cast<int>(std::lround(spec.val_frac * scene_count)));
  auto split_of = [&](int i) {
    if (i < n_train) return std::string("train");
    if (i < n_train + n_val) return std::string("val");
    return std::string("test");
  };

  // Per-scene derived seeds make parallel and serial output identical.
  std::vector<std::future<SceneOutput>> futures(stems.size());
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  for (size_t start = 0; start < stems.size(); start += workers) {
    const size_t end = std::min(stems.size(), start + workers);
    for (size_t i = start; i < end; ++i) {
      const std::string clean_src = clean_dir + "/" + stems[i] + ".png";
      const std::string depth_src = depth_dir + "/" + stems[i] + ".fmap";
      if (!fs::exists(depth_src)) throw dataset_error("missing depth map: " + depth_src);
      futures[i] = std::async(std::launch::async, synthesize_scene, stems[i],
                              static_cast<int>(i), clean_src, depth_src, std::cref(spec),
                              split_of(static_cast<int>(i)));
    }
    for (size_t i = start; i < end; ++i) futures[i].wait();
  }

  Manifest m;
  m.base_dir = spec.out_dir;
  for (auto& f : futures) {
    SceneOutput s = f.get();
    for (auto& r : s.records) m.records.push_back(std::move(r));
  }
  write_manifest(m, spec.out_dir + "/manifest.tsv");
  return m;
}

void write_manifest(const Manifest& m, const std::string& path) {
  std::ostringstream os;
  os << "# fdz-manifest v1\n";
  os << "# id\tclean\tdepth\thazy\ttrans\tairlight\tA\tbeta\tvariation\tsplit\t"
        "crc_clean\tcrc_hazy\tcrc_trans\tcrc_airlight\n";
  os.precision(9);  // round-trips 32-bit floats
  for (const auto& r : m.records) {
    os << r.id << '\t' << r.clean_path << '\t' << r.depth_path << '\t' << r.hazy_path << '\t'
       << r.trans_path << '\t' << r.airlight_path << '\t' << r.a << '\t' << r.beta << '\t'
       << r.variation << '\t' << r.split << '\t' << r.crc_clean << '\t' << r.crc_hazy << '\t'
       << r.crc_trans << '\t' << r.crc_airlight << '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw unwritable_path("cannot open for writing: " + path);
  f << os.str();
}

Manifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw file_not_found("no such file: " + path);
  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();
  if (m.base_dir.empty()) m.base_dir = ".";
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    SampleRecord r;
    std::string a, beta, variation, crc1, crc2, crc3, crc4;
    if (!(std::getline(is, r.id, '\t') && std::getline(is, r.clean_path, '\t') &&
          std::getline(is, r.depth_path, '\t') && std::getline(is, r.hazy_path, '\t') &&
          std::getline(is, r.trans_path, '\t') && std::getline(is, r.airlight_path, '\t') &&
          std::getline(is, a, '\t') && std::getline(is, beta, '\t') &&
          std::getline(is, variation, '\t') && std::getline(is, r.split, '\t') &&
          std::getline(is, crc1, '\t') && std::getline(is, crc2, '\t') &&
          std::getline(is, crc3, '\t') && std::getline(is, crc4)))
      throw dataset_error(path + ":" + std::to_string(line_no) + ": malformed manifest record");
    r.a = std::stof(a);
    r.beta = std::stof(beta);
    r.variation = std::stoi(variation);
    r.crc_clean = static_cast<std::uint32_t>(std::stoul(crc1));
    r.crc_hazy = static_cast<std::uint32_t>(std::stoul(crc2));
    r.crc_trans = static_cast<std::uint32_t>(std::stoul(crc3));
    r.crc_airlight = static_cast<std::uint32_t>(std::stoul(crc4));
    m.records.push_back(std::move(r));
  }
  return m;
}

std::vector<SampleRecord> split_records(const Manifest& m, const std::string& split) {
  std::vector<SampleRecord> out;
  for (const auto& r : m.records)
    if (split == "all" || r.split == split) out.push_back(r);
  return out;
}

training::Sample load_sample(const Manifest& m, const SampleRecord& rec) {
  auto checked = [&](const std::string& rel, std::uint32_t expect) {
    const std::string path = m.resolve(rel);
    const std::uint32_t crc = file_crc32(path);
    if (crc != expect)
      throw dataset_error(path + ": checksum mismatch (stored " + std::to_string(expect) +
                          ", actual " + std::to_string(crc) + ")");
    return path;
  };
  training::Sample s;
  s.hazy = load_image(checked(rec.hazy_path, rec.crc_hazy));
  s.clean = load_image(checked(rec.clean_path, rec.crc_clean));
  s.transmission = read_fmap(checked(rec.trans_path, rec.crc_trans));
  s.airlight = load_image(checked(rec.airlight_path, rec.crc_airlight));
  return s;
}

std::vector<training::Sample> load_split(const Manifest& m, const std::string& split) {
  std::vector<training::Sample> out;
  for (const auto& r : split_records(m, split)) out.push_back(load_sample(m, r));
  return out;
}

void generate_desk_scenes(int count, int height, int width, std::uint64_t seed,
                          const std::string& clean_dir, const std::string& depth_dir) {
  fs::create_directories(clean_dir);
  fs::create_directories(depth_dir);
  // Keeping beta*depth below ln(3) bounds 1/t by 3, so one 8-bit quantization
  // of the hazy image stays within 2/255 after recovery. The positive floor
  // keeps transmission targets away from the sigmoid asymptote at t = 1.
  const float depth_floor = 0.15f;
  const float depth_cap = 0.65f;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(i) << 17);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> freq(1.0, 3.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Image clean(height, width, 3);
    for (int c = 0; c < 3; ++c) {
      const double fy = freq(rng), fx = freq(rng), py = phase(rng), px = phase(rng);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double vy = std::sin(2.0 * M_PI * fy * y / height + py);
          const double vx = std::cos(2.0 * M_PI * fx * x / width + px);
          clean.at(y, x, c) = static_cast<float>(0.5 + 0.35 * 0.5 * (vy + vx));
        }
    }

    // Depth: a tilted plane with a smooth mound, scaled into
    // [depth_floor, depth_cap].
    Raster depth(height, width, 1);
    const double gy = unit(rng) - 0.5, gx = unit(rng) - 0.5;
    const double cy = unit(rng) * height, cx = unit(rng) * width;
    const double radius = 0.2 * std::min(height, width) * (0.5 + unit(rng));
    float dmax = 0.f;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double d = 0.5 + gy * (static_cast<double>(y) / height - 0.5) +
                   gx * (static_cast<double>(x) / width - 0.5);
        const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        d += 0.4 * std::exp(-r2 / (2.0 * radius * radius));
        depth.at(y, x) = static_cast<float>(d);
        dmax = std::max(dmax, depth.at(y, x));
      }
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        depth.at(y, x) =
            depth_floor + std::max(0.f, depth.at(y, x) / dmax) * (depth_cap - depth_floor);

    char name[32];
    std::snprintf(name, sizeof(name), "scene%03d", i);
    save_image(clean, clean_dir + "/" + std::string(name) + ".png");
    write_fmap(depth, depth_dir + "/" + std::string(name) + ".fmap");
  }
}

}  // namespace fdz::data
