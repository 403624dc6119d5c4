#include "seqtok/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace seqtok {

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw CheckpointError("checkpoint: truncated file");
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw CheckpointError("checkpoint: truncated file");
  return v;
}
std::string read_string(std::istream& in) {
  const uint64_t len = read_u64(in);
  if (len > (1ull << 32)) throw CheckpointError("checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("checkpoint: truncated string");
  return s;
}

}  // namespace

void Archive::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u64(out, meta.size());
  for (const auto& [key, value] : meta) {
    write_string(out, key);
    write_string(out, value);
  }
  write_u64(out, mats.size());
  for (const auto& [key, value] : mats) {
    write_string(out, key);
    write_u64(out, static_cast<uint64_t>(value.rows()));
    write_u64(out, static_cast<uint64_t>(value.cols()));
    out.write(reinterpret_cast<const char*>(value.data()),
              static_cast<std::streamsize>(sizeof(Scalar) * value.size()));
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

Archive Archive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  if (read_u32(in) != kMagic) throw CheckpointError("checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Archive a;
  const uint64_t n_meta = read_u64(in);
  for (uint64_t i = 0; i < n_meta; ++i) {
    std::string key = read_string(in);
    a.meta[key] = read_string(in);
  }
  const uint64_t n_mats = read_u64(in);
  for (uint64_t i = 0; i < n_mats; ++i) {
    std::string key = read_string(in);
    const uint64_t rows = read_u64(in);
    const uint64_t cols = read_u64(in);
    if (rows * cols > (1ull << 30)) throw CheckpointError("checkpoint: implausible matrix size");
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
    if (!in) throw CheckpointError("checkpoint: truncated matrix '" + key + "'");
    a.mats[key] = std::move(m);
  }
  return a;
}

void Archive::put_scalar(const std::string& key, Scalar v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  meta[key] = s.str();
}

Scalar Archive::scalar(const std::string& key) const {
  return std::stod(text(key));
}

long long Archive::integer(const std::string& key) const {
  return std::stoll(text(key));
}

const std::string& Archive::text(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint: missing field '" + key + "'");
  return it->second;
}

const Mat& Archive::mat(const std::string& key) const {
  auto it = mats.find(key);
  if (it == mats.end()) throw CheckpointError("checkpoint: missing tensor '" + key + "'");
  return it->second;
}

void pack_params(Archive& a, const ParamSet& ps) {
  for (const auto& p : ps.all()) a.mats[p->name] = p->value;
}

void unpack_params(const Archive& a, ParamSet& ps) {
  for (const auto& p : ps.all()) {
    auto it = a.mats.find(p->name);
    if (it == a.mats.end()) {
      throw CheckpointError("checkpoint: missing parameter '" + p->name + "'");
    }
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw CheckpointError(
          "checkpoint: shape mismatch for '" + p->name + "': stored " +
          std::to_string(it->second.rows()) + "x" + std::to_string(it->second.cols()) +
          ", model expects " + std::to_string(p->value.rows()) + "x" +
          std::to_string(p->value.cols()));
    }
    p->value = it->second;
  }
}

}  // namespace seqtok
