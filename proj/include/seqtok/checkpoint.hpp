#pragma once

#include "seqtok/nn.hpp"

#include <map>
#include <string>

namespace seqtok {

// Versioned binary archive of named matrices plus string metadata. All model,
// optimizer, and EMA state goes through this one container.
struct Archive {
  static constexpr uint32_t kMagic = 0x53515431;  // "SQT1"
  static constexpr uint32_t kVersion = 1;

  std::map<std::string, Mat> mats;
  std::map<std::string, std::string> meta;

  void save(const std::string& path) const;
  static Archive load(const std::string& path);  // CheckpointError on corrupt/mismatched files

  void put_scalar(const std::string& key, Scalar v);
  Scalar scalar(const std::string& key) const;
  long long integer(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  const Mat& mat(const std::string& key) const;
};

// Store every parameter of the set under its registered name.
void pack_params(Archive& a, const ParamSet& ps);
// Restore values; throws CheckpointError naming the first missing or
// shape-mismatched parameter.
void unpack_params(const Archive& a, ParamSet& ps);

}  // namespace seqtok
