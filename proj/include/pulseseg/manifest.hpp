#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pulseseg/image.hpp"
#include "pulseseg/rng.hpp"
#include "pulseseg/tensor.hpp"

namespace pulseseg {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One weakly labeled training sample. `tags[c]` is the image-level label
// for class c (1-based class index c+1 in masks). The ground-truth mask
// is evaluation-only and may be absent.
struct ImageSample {
  std::string id;
  Tensor image;  // (3,h,w) in [0,1]
  std::vector<std::uint8_t> tags;
  IndexMask gt_mask;  // empty when unavailable

  int num_tagged() const {
    return static_cast<int>(std::count(tags.begin(), tags.end(), std::uint8_t{1}));
  }
};

struct ManifestRecord {
  std::string image_path;
  std::vector<std::string> tag_names;
  std::string mask_path;  // optional
};

// Line-delimited dataset index:
//   classes<TAB>name1,name2,...
//   image_path<TAB>tag1,tag2[<TAB>mask_path]
// Paths are resolved relative to the manifest location.
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<std::string> class_names;
  std::vector<ManifestRecord> records;

  int num_classes() const { return static_cast<int>(class_names.size()); }

  int class_index(const std::string& name) const {
    for (size_t i = 0; i < class_names.size(); ++i)
      if (class_names[i] == name) return static_cast<int>(i);
    return -1;
  }

  std::vector<std::uint8_t> tags_of(const ManifestRecord& rec) const {
    std::vector<std::uint8_t> tags(class_names.size(), 0);
    for (const auto& t : rec.tag_names) tags[static_cast<size_t>(class_index(t))] = 1;
    return tags;
  }
};

namespace detail {
inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace detail

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_manifest: cannot open " + path.string());
  DatasetManifest mf;
  mf.base_dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw DataError("load_manifest: " + path.string() + " is empty");
  auto header = detail::split(line, '\t');
  if (header.size() != 2 || header[0] != "classes" || header[1].empty())
    throw DataError("load_manifest: bad header line in " + path.string() + " (want classes<TAB>a,b,...)");
  mf.class_names = detail::split(header[1], ',');
  int rec_index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto parts = detail::split(line, '\t');
    if (parts.size() < 2 || parts.size() > 3)
      throw DataError("load_manifest: malformed record " + std::to_string(rec_index) + " in " + path.string());
    ManifestRecord rec;
    rec.image_path = parts[0];
    rec.tag_names = detail::split(parts[1], ',');
    for (const auto& t : rec.tag_names) {
      if (mf.class_index(t) < 0)
        throw DataError("load_manifest: unknown class \"" + t + "\" in record " + std::to_string(rec_index));
    }
    if (rec.tag_names.empty() || (rec.tag_names.size() == 1 && rec.tag_names[0].empty()))
      throw DataError("load_manifest: record " + std::to_string(rec_index) + " has no tags");
    if (parts.size() == 3) rec.mask_path = parts[2];
    mf.records.push_back(std::move(rec));
    ++rec_index;
  }
  return mf;
}

inline void save_manifest(const DatasetManifest& mf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_manifest: cannot open " + path.string());
  out << "classes\t";
  for (size_t i = 0; i < mf.class_names.size(); ++i) out << (i ? "," : "") << mf.class_names[i];
  out << "\n";
  for (const auto& rec : mf.records) {
    out << rec.image_path << '\t';
    for (size_t i = 0; i < rec.tag_names.size(); ++i) out << (i ? "," : "") << rec.tag_names[i];
    if (!rec.mask_path.empty()) out << '\t' << rec.mask_path;
    out << "\n";
  }
}

inline ImageSample load_sample(const DatasetManifest& mf, int index, bool with_mask = true) {
  const auto& rec = mf.records[static_cast<size_t>(index)];
  ImageSample s;
  s.id = std::filesystem::path(rec.image_path).stem().string();
  s.image = read_png_rgb((mf.base_dir / rec.image_path).string());
  s.tags = mf.tags_of(rec);
  if (with_mask && !rec.mask_path.empty()) s.gt_mask = read_png_gray((mf.base_dir / rec.mask_path).string());
  return s;
}

// Epoch-shuffled, seed-deterministic batch order. The permutation for an
// epoch depends only on (seed, epoch), so iteration can resume at any
// global step without replaying history.
class BatchIterator {
 public:
  BatchIterator(int n_records, int batch_size, std::uint64_t seed)
      : n_(n_records), batch_(batch_size), seed_(seed) {
    if (batch_size <= 0) throw DataError("BatchIterator: batch size must be positive");
  }

  int batches_per_epoch() const { return (n_ + batch_ - 1) / batch_; }

  // Record indices for global batch step t (t counts batches, not epochs).
  std::vector<int> batch_indices(std::int64_t t) const {
    const int bpe = batches_per_epoch();
    const std::int64_t epoch = t / bpe;
    const int slot = static_cast<int>(t % bpe);
    std::vector<int> perm(static_cast<size_t>(n_));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(mix_seed(seed_, 0x9a7c, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(perm);
    const int lo = slot * batch_;
    const int hi = std::min(n_, lo + batch_);
    return std::vector<int>(perm.begin() + lo, perm.begin() + hi);
  }

  std::int64_t epoch_of(std::int64_t t) const { return t / batches_per_epoch(); }

 private:
  int n_;
  int batch_;
  std::uint64_t seed_;
};

}  // namespace pulseseg
