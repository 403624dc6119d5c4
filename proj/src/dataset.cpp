#include "seqtok/dataset.hpp"

#include "seqtok/image_io.hpp"
#include "seqtok/training_util.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace seqtok {

namespace {

// Hue in [0,1) to RGB in [-1,1], full saturation/value.
void hue_to_rgb(Scalar hue, Scalar rgb[3]) {
  const Scalar h6 = hue * 6.0;
  const int sector = static_cast<int>(h6) % 6;
  const Scalar f = h6 - std::floor(h6);
  Scalar r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = 1; g = f; b = 0; break;
    case 1: r = 1 - f; g = 1; b = 0; break;
    case 2: r = 0; g = 1; b = f; break;
    case 3: r = 0; g = 1 - f; b = 1; break;
    case 4: r = f; g = 0; b = 1; break;
    default: r = 1; g = 0; b = 1 - f; break;
  }
  rgb[0] = 2 * r - 1;
  rgb[1] = 2 * g - 1;
  rgb[2] = 2 * b - 1;
}

}  // namespace

Dataset::Dataset(const DatasetSpec& spec) : spec_(spec) {
  if (spec_.resolution < 8) throw ConfigError("dataset: resolution too small");
  if (spec_.num_classes < 1) throw ConfigError("dataset: need at least one class");
  if (spec_.source == DatasetSpec::Source::synthetic) {
    if (spec_.train_count < 1 || spec_.val_count < 1) {
      throw ConfigError("dataset: synthetic corpus sizes must be positive");
    }
    train_items_ = spec_.train_count;
    val_items_ = spec_.val_count;
    train_map_.resize(static_cast<std::size_t>(train_items_));
    std::iota(train_map_.begin(), train_map_.end(), 0);
    val_map_.resize(static_cast<std::size_t>(val_items_));
    std::iota(val_map_.begin(), val_map_.end(), train_items_);
    return;
  }

  namespace fs = std::filesystem;
  if (!fs::is_directory(spec_.path)) {
    throw IoError("dataset: not a directory: " + spec_.path);
  }
  // Class subdirectories named by integer label, each holding .ppm files.
  std::vector<std::pair<int, std::string>> entries;
  for (const auto& cls : fs::directory_iterator(spec_.path)) {
    if (!cls.is_directory()) continue;
    int label = -1;
    try {
      label = std::stoi(cls.path().filename().string());
    } catch (...) {
      continue;
    }
    if (label < 0 || label >= spec_.num_classes) {
      throw ConfigError("dataset: class directory '" + cls.path().filename().string() +
                        "' outside [0, num_classes)");
    }
    for (const auto& file : fs::directory_iterator(cls.path())) {
      if (file.path().extension() == ".ppm") {
        entries.emplace_back(label, file.path().string());
      }
    }
  }
  if (entries.empty()) throw IoError("dataset: no .ppm files under " + spec_.path);
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  for (auto& [label, path] : entries) {
    file_labels_.push_back(label);
    files_.push_back(path);
  }

  const Eigen::Index total = static_cast<Eigen::Index>(files_.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = step_rng(spec_.seed, 0, /*stream=*/0xD5);
  std::shuffle(order.begin(), order.end(), rng);
  val_items_ = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(spec_.val_fraction * static_cast<Scalar>(total))));
  val_items_ = std::min(val_items_, total - 1);
  train_items_ = total - val_items_;
  val_map_.assign(order.begin(), order.begin() + val_items_);
  train_map_.assign(order.begin() + val_items_, order.end());
}

Eigen::Index Dataset::batches_per_epoch(Eigen::Index batch_size) const {
  if (batch_size < 1) throw ConfigError("dataset: batch size must be positive");
  const Eigen::Index n = train_items_ / batch_size;
  if (n < 1) throw ConfigError("dataset: batch size exceeds training corpus");
  return n;
}

Dataset::Item Dataset::synth_item(Eigen::Index global_index) const {
  const Eigen::Index res = spec_.resolution;
  const int label = static_cast<int>(global_index % spec_.num_classes);
  Rng rng = step_rng(spec_.seed, global_index, /*stream=*/0xDA7A);
  std::uniform_real_distribution<Scalar> unit(0.0, 1.0);

  const Scalar hue = std::fmod(0.61803398875 * static_cast<Scalar>(label), 1.0);
  Scalar fg[3], bg[3];
  hue_to_rgb(hue, fg);
  hue_to_rgb(std::fmod(hue + 0.5, 1.0), bg);
  const Scalar bg_level = 0.15 + 0.2 * unit(rng);  // dim background
  const Scalar cx = (0.35 + 0.3 * unit(rng)) * static_cast<Scalar>(res);
  const Scalar cy = (0.35 + 0.3 * unit(rng)) * static_cast<Scalar>(res);
  const Scalar radius = (0.18 + 0.12 * unit(rng)) * static_cast<Scalar>(res);
  const int kind = label % 4;
  std::normal_distribution<Scalar> noise(0.0, 0.02);

  Item item;
  item.label = label;
  item.pixels = Mat(res * res, spec_.channels);
  for (Eigen::Index y = 0; y < res; ++y) {
    for (Eigen::Index x = 0; x < res; ++x) {
      const Scalar dx = static_cast<Scalar>(x) - cx, dy = static_cast<Scalar>(y) - cy;
      const Scalar dist = std::sqrt(dx * dx + dy * dy);
      bool inside = false;
      switch (kind) {
        case 0: inside = dist <= radius; break;                                  // disk
        case 1: inside = dist <= radius && dist >= 0.55 * radius; break;         // ring
        case 2:  // cross
          inside = (std::abs(dx) <= 0.3 * radius && std::abs(dy) <= radius) ||
                   (std::abs(dy) <= 0.3 * radius && std::abs(dx) <= radius);
          break;
        default:  // diagonal stripes inside a square
          inside = std::abs(dx) <= radius && std::abs(dy) <= radius &&
                   (static_cast<long long>(std::floor((dx + dy) / 3.0)) % 2 == 0);
          break;
      }
      for (Eigen::Index c = 0; c < spec_.channels; ++c) {
        const Scalar base = inside ? fg[c % 3] : bg[c % 3] * bg_level;
        item.pixels(y * res + x, c) = std::clamp(base + noise(rng), Scalar(-1), Scalar(1));
      }
    }
  }
  return item;
}

Dataset::Item Dataset::load_item(Eigen::Index global_index) const {
  if (spec_.source == DatasetSpec::Source::synthetic) return synth_item(global_index);
  const auto idx = static_cast<std::size_t>(global_index);
  LoadedImage img = read_ppm(files_[idx]);
  if (img.h != spec_.resolution || img.w != spec_.resolution) {
    throw IoError("dataset: resolution mismatch in " + files_[idx]);
  }
  return {std::move(img.pixels), file_labels_[idx]};
}

ImageBatch Dataset::gather(const std::vector<Eigen::Index>& global_indices) const {
  const Eigen::Index res = spec_.resolution;
  ImageBatch out;
  out.batch = static_cast<Eigen::Index>(global_indices.size());
  out.h = out.w = res;
  out.c = spec_.channels;
  out.pixels = Mat(out.batch * res * res, spec_.channels);
  out.labels.reserve(global_indices.size());
  for (Eigen::Index b = 0; b < out.batch; ++b) {
    Item item = load_item(global_indices[static_cast<std::size_t>(b)]);
    out.pixels.middleRows(b * res * res, res * res) = item.pixels;
    out.labels.push_back(item.label);
  }
  return out;
}

ImageBatch Dataset::train_batch(Eigen::Index batch_size, long long step) const {
  const Eigen::Index per_epoch = batches_per_epoch(batch_size);
  const long long epoch = step / per_epoch;
  const Eigen::Index slot = static_cast<Eigen::Index>(step % per_epoch);
  std::vector<Eigen::Index> order(train_map_.begin(), train_map_.end());
  Rng rng = step_rng(spec_.seed, epoch, /*stream=*/0xE9);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Eigen::Index> picked(order.begin() + slot * batch_size,
                                   order.begin() + (slot + 1) * batch_size);
  return gather(picked);
}

ImageBatch Dataset::val_batch(Eigen::Index start, Eigen::Index count) const {
  if (start < 0 || count < 1 || start + count > val_items_) {
    throw DimensionError("dataset: val slice out of range");
  }
  std::vector<Eigen::Index> picked(val_map_.begin() + start, val_map_.begin() + start + count);
  return gather(picked);
}

ImageBatch Dataset::train_slice(Eigen::Index start, Eigen::Index count) const {
  if (start < 0 || count < 1 || start + count > train_items_) {
    throw DimensionError("dataset: train slice out of range");
  }
  std::vector<Eigen::Index> picked(train_map_.begin() + start, train_map_.begin() + start + count);
  return gather(picked);
}

uint64_t Dataset::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  mix(static_cast<uint64_t>(spec_.source));
  mix(static_cast<uint64_t>(spec_.resolution));
  mix(static_cast<uint64_t>(spec_.num_classes));
  mix(static_cast<uint64_t>(train_items_));
  mix(static_cast<uint64_t>(val_items_));
  mix(spec_.seed);
  for (const auto& f : files_) {
    for (char c : f) mix(static_cast<uint64_t>(static_cast<unsigned char>(c)));
  }
  return h;
}

}  // namespace seqtok
