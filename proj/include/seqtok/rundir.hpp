#pragma once

#include "seqtok/types.hpp"

#include <string>

namespace seqtok {

// One training/eval run owns one directory: manifest.json (written before the
// first step), config.json, metrics.jsonl, checkpoints/, samples/, plots/,
// reports/. A `lock` file guards against two concurrent writers.
class RunDir {
 public:
  // Creates <root>/<name> with subdirectories and takes the lock. Throws
  // IoError when the directory is already locked.
  static RunDir create(const std::string& root, const std::string& name);
  // Opens an existing run directory without taking the lock (read-only use).
  static RunDir open(const std::string& path);
  // $SEQTOK_RUN_ROOT when set, otherwise ./runs.
  static std::string default_root();

  const std::string& path() const { return path_; }
  std::string file(const std::string& rel) const;

  void write_text(const std::string& rel, const std::string& text) const;
  void append_line(const std::string& rel, const std::string& line) const;

  void release();  // removes the lock file
  ~RunDir();
  RunDir(RunDir&& other) noexcept;
  RunDir& operator=(RunDir&&) = delete;
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

 private:
  RunDir() = default;
  std::string path_;
  bool locked_ = false;
};

// UTC wall-clock timestamp, ISO-8601 with seconds.
std::string timestamp_utc();

}  // namespace seqtok
