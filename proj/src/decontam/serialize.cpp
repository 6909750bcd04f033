#include <array>
#include <cstring>
#include <fstream>

#include "tracemill/decontam.hpp"
#include "tracemill/util/error.hpp"

namespace tracemill::decontam {

namespace {

constexpr std::array<char, 8> kMagic = {'T', 'M', 'D', 'X', 'I', 'D', 'X', '1'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_magic() {
    need(kMagic.size());
    if (std::memcmp(data_.data(), kMagic.data(), kMagic.size()) != 0)
      throw ValidationError(name_ + ": not a decontamination index (bad magic)");
    pos_ = kMagic.size();
  }
  /// Bounds a declared element count by the bytes still available.
  std::uint64_t count(std::size_t min_elem_size) {
    std::uint64_t n = u64();
    if (n > (data_.size() - pos_) / min_elem_size) throw ValidationError(name_ + ": truncated index file");
    return n;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ValidationError(name_ + ": truncated index file");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_index(const std::filesystem::path& path, const DecontamIndex& idx) {
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(idx.n()));
  w.str(idx.normalization_id());
  w.u64(idx.ngram_fingerprints().size());
  for (auto fp : idx.ngram_fingerprints()) w.u64(fp);
  w.u64(idx.short_fingerprints().size());
  for (auto fp : idx.short_fingerprints()) w.u64(fp);
  w.u64(idx.image_digests().size());
  for (const auto& d : idx.image_digests()) w.str(d);
  w.u64(idx.benchmark_ids().size());
  for (const auto& id : idx.benchmark_ids()) w.str(id);

  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("write failed: " + path.string());
}

DecontamIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  r.expect_magic();
  if (std::uint32_t v = r.u32(); v != kFormatVersion)
    throw ValidationError(path.string() + ": unsupported index version " + std::to_string(v));
  std::size_t n = r.u32();
  std::string norm = r.str();
  std::vector<std::uint64_t> ngrams(r.count(8));
  for (auto& fp : ngrams) fp = r.u64();
  std::vector<std::uint64_t> shorts(r.count(8));
  for (auto& fp : shorts) fp = r.u64();
  std::vector<std::string> digests(r.count(4));
  for (auto& d : digests) d = r.str();
  std::vector<std::string> ids(r.count(4));
  for (auto& id : ids) id = r.str();
  if (!r.at_end()) throw ValidationError(path.string() + ": trailing bytes in index file");
  return {n, std::move(norm), std::move(ngrams), std::move(shorts), std::move(digests), std::move(ids)};
}

}  // namespace tracemill::decontam
