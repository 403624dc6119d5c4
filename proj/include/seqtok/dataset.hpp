#pragma once

#include "seqtok/types.hpp"

#include <string>
#include <vector>

namespace seqtok {

struct ImageBatch {
  Mat pixels;  // (B*H*W) x C in [-1, 1]
  std::vector<int> labels;
  Eigen::Index batch = 0, h = 0, w = 0, c = 0;
};

struct DatasetSpec {
  enum class Source { synthetic, directory };
  Source source = Source::synthetic;
  std::string path;               // directory source only
  Eigen::Index resolution = 32;   // H = W
  Eigen::Index channels = 3;
  Eigen::Index num_classes = 8;
  Eigen::Index train_count = 512;  // synthetic corpus sizes
  Eigen::Index val_count = 128;
  Scalar val_fraction = 0.2;       // directory split
  uint64_t seed = 1;
};

// Deterministic image source with a fixed train/val split. Batches are a pure
// function of (spec, step): epoch shuffles derive from (seed, epoch), so
// resuming needs only the step counter.
//
// The synthetic corpus draws one class-conditional geometric pattern per item:
// shape kind = class % 4 (disk, ring, cross, stripes), base hue rotates with
// the class index, and per-item jitter (center, size, background, pixel noise)
// comes from an item-keyed RNG. Item i has label i % num_classes; val items
// continue the index range after the train items.
class Dataset {
 public:
  explicit Dataset(const DatasetSpec& spec);

  Eigen::Index train_size() const { return train_items_; }
  Eigen::Index val_size() const { return val_items_; }
  Eigen::Index batches_per_epoch(Eigen::Index batch_size) const;

  // Seeded-shuffle training batch for a global step (last partial batch of
  // each epoch is dropped).
  ImageBatch train_batch(Eigen::Index batch_size, long long step) const;
  // Contiguous validation slice [start, start+count).
  ImageBatch val_batch(Eigen::Index start, Eigen::Index count) const;
  // Contiguous unshuffled training slice, for corpus-wide encoding passes.
  ImageBatch train_slice(Eigen::Index start, Eigen::Index count) const;

  const DatasetSpec& spec() const { return spec_; }
  // Stable content fingerprint for run manifests.
  uint64_t fingerprint() const;

 private:
  struct Item {
    Mat pixels;
    int label;
  };
  Item load_item(Eigen::Index global_index) const;
  Item synth_item(Eigen::Index global_index) const;
  ImageBatch gather(const std::vector<Eigen::Index>& global_indices) const;

  DatasetSpec spec_;
  Eigen::Index train_items_ = 0, val_items_ = 0;
  // directory mode: resolved file list and labels, deterministic order
  std::vector<std::string> files_;
  std::vector<int> file_labels_;
  std::vector<Eigen::Index> train_map_, val_map_;  // global indices per split
};

}  // namespace seqtok
