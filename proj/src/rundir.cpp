#include "seqtok/rundir.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace seqtok {

RunDir RunDir::create(const std::string& root, const std::string& name) {
  RunDir rd;
  rd.path_ = (fs::path(root) / name).string();
  std::error_code ec;
  fs::create_directories(rd.path_, ec);
  if (ec) throw IoError("run dir: cannot create '" + rd.path_ + "': " + ec.message());
  const fs::path lock = fs::path(rd.path_) / "lock";
  if (fs::exists(lock)) {
    throw IoError("run dir: '" + rd.path_ + "' is locked by another writer (remove 'lock' if stale)");
  }
  std::ofstream lf(lock);
  if (!lf) throw IoError("run dir: cannot take lock in '" + rd.path_ + "'");
  lf << timestamp_utc() << "\n";
  rd.locked_ = true;
  for (const char* sub : {"checkpoints", "samples", "plots", "reports"}) {
    fs::create_directories(fs::path(rd.path_) / sub, ec);
    if (ec) throw IoError("run dir: cannot create subdirectory '" + std::string(sub) + "'");
  }
  return rd;
}

RunDir RunDir::open(const std::string& path) {
  if (!fs::exists(path)) throw IoError("run dir: '" + path + "' does not exist");
  RunDir rd;
  rd.path_ = path;
  return rd;
}

std::string RunDir::default_root() {
  const char* env = std::getenv("SEQTOK_RUN_ROOT");
  return env && *env ? std::string(env) : std::string("runs");
}

std::string RunDir::file(const std::string& rel) const {
  return (fs::path(path_) / rel).string();
}

void RunDir::write_text(const std::string& rel, const std::string& text) const {
  std::ofstream out(file(rel));
  if (!out) throw IoError("run dir: cannot write '" + rel + "'");
  out << text;
}

void RunDir::append_line(const std::string& rel, const std::string& line) const {
  std::ofstream out(file(rel), std::ios::app);
  if (!out) throw IoError("run dir: cannot append to '" + rel + "'");
  out << line << "\n";
}

void RunDir::release() {
  if (locked_) {
    std::error_code ec;
    fs::remove(fs::path(path_) / "lock", ec);
    locked_ = false;
  }
}

RunDir::~RunDir() { release(); }

RunDir::RunDir(RunDir&& other) noexcept : path_(std::move(other.path_)), locked_(other.locked_) {
  other.locked_ = false;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

}  // namespace seqtok
