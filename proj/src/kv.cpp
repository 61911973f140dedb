#include "tgs/kv.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

#include "tgs/error.hpp"
#include "tgs/keys.hpp"

namespace tgs {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_error(const std::string& what) {
  throw Error(ErrorCode::kBackendIO, what + ": " + std::strerror(errno));
}

std::string read_whole_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kBackendIO, "cannot open " + p.string());
  }
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kBackendIO, "read failed: " + p.string());
  return data;
}

void write_all(int fd, const char* data, std::size_t n, const std::string& what) {
  while (n > 0) {
    ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      io_error(what);
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

}  // namespace

void atomic_write_file(const fs::path& target, std::string_view content) {
  fs::path tmp = target;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) io_error("open " + tmp.string());
  write_all(fd, content.data(), content.size(), "write " + tmp.string());
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_error("fsync " + tmp.string());
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    throw Error(ErrorCode::kBackendIO,
                "rename " + tmp.string() + ": " + ec.message());
  }
}

void WriteBatch::put(std::string key, std::string value) {
  ops_.insert_or_assign(std::move(key), std::move(value));
}

void WriteBatch::erase(std::string key) {
  ops_.insert_or_assign(std::move(key), std::nullopt);
}

std::vector<KvPair> KvBackend::scan_prefix(std::string_view prefix) const {
  return scan(prefix, prefix_successor(prefix));
}

// ---- MemoryBackend --------------------------------------------------------

MemoryBackend::MemoryBackend() : current_(std::make_shared<Map>()) {}

std::shared_ptr<const MemoryBackend::Map> MemoryBackend::view() const {
  std::shared_lock lock(mu_);
  return current_;
}

std::optional<std::string> MemoryBackend::get(std::string_view key) const {
  auto m = view();
  auto it = m->find(key);
  if (it == m->end()) return std::nullopt;
  return it->second;
}

std::vector<KvPair> MemoryBackend::scan(std::string_view lo,
                                        std::string_view hi) const {
  auto m = view();
  std::vector<KvPair> out;
  if (!hi.empty() && hi <= lo) return out;
  auto end = hi.empty() ? m->end() : m->lower_bound(hi);
  for (auto it = m->lower_bound(lo); it != end; ++it) {
    out.emplace_back(it->first, it->second);
  }
  return out;
}

void MemoryBackend::prepare(const WriteBatch& batch) {
  auto next = std::make_shared<Map>(*view());
  for (const auto& [key, value] : batch.ops()) {
    if (value) {
      next->insert_or_assign(key, *value);
    } else {
      next->erase(key);
    }
  }
  staged_ = std::move(next);
}

void MemoryBackend::publish() {
  if (!staged_) return;
  std::unique_lock lock(mu_);
  current_ = std::move(staged_);
  staged_.reset();
  ++generation_;
}

void MemoryBackend::abort() { staged_.reset(); }

std::uint64_t MemoryBackend::generation() const {
  std::shared_lock lock(mu_);
  return generation_;
}

std::uint64_t MemoryBackend::staged_generation() const { return generation() + 1; }

BackendStats MemoryBackend::stats() const {
  auto m = view();
  BackendStats s;
  s.records = m->size();
  for (const auto& [k, v] : *m) s.value_bytes += v.size();
  return s;
}

// ---- FileBackend ----------------------------------------------------------

FileBackend::FileBackend(fs::path dir, std::uint64_t generation)
    : dir_(std::move(dir)), generation_(generation) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) {
    throw Error(ErrorCode::kBackendIO,
                "create " + dir_.string() + ": " + ec.message());
  }
  fs::path seg = dir_ / "segment.dat";
  fd_ = ::open(seg.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) io_error("open " + seg.string());
  if (generation == 0) {
    current_ = std::make_shared<Index>();
  } else {
    current_ = load_index(index_path(generation));
  }
  struct stat st {};
  if (::fstat(fd_, &st) != 0) io_error("stat " + seg.string());
  if (static_cast<std::uint64_t>(st.st_size) < current_->segment_length) {
    throw Error(ErrorCode::kCorruptRecord,
                "segment shorter than committed index: " + seg.string());
  }
}

FileBackend::~FileBackend() {
  if (fd_ >= 0) ::close(fd_);
}

fs::path FileBackend::index_path(std::uint64_t gen) const {
  return dir_ / ("index." + std::to_string(gen));
}

std::shared_ptr<const FileBackend::Index> FileBackend::view() const {
  std::shared_lock lock(mu_);
  return current_;
}

std::shared_ptr<const FileBackend::Index> FileBackend::load_index(
    const fs::path& p) {
  std::string data = read_whole_file(p);
  auto corrupt = [&] {
    throw Error(ErrorCode::kCorruptRecord, "malformed index " + p.string());
  };
  if (data.size() < 16) corrupt();
  auto idx = std::make_shared<Index>();
  idx->segment_length = read_be64(data, 0);
  const std::uint64_t count = read_be64(data, 8);
  std::size_t pos = 16;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (data.size() - pos < 4) corrupt();
    const std::uint32_t klen = read_be32(data, pos);
    pos += 4;
    if (data.size() - pos < klen + 12ULL) corrupt();
    std::string key = data.substr(pos, klen);
    pos += klen;
    Slot s{read_be64(data, pos), read_be32(data, pos + 8)};
    pos += 12;
    if (s.offset + s.length > idx->segment_length) corrupt();
    idx->slots.emplace(std::move(key), s);
  }
  if (pos != data.size()) corrupt();
  return idx;
}

void FileBackend::write_index(const Index& idx, std::uint64_t gen) const {
  std::string out;
  append_be64(out, idx.segment_length);
  append_be64(out, idx.slots.size());
  for (const auto& [key, s] : idx.slots) {
    append_be32(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    append_be64(out, s.offset);
    append_be32(out, s.length);
  }
  atomic_write_file(index_path(gen), out);
}

std::string FileBackend::read_slot(const Slot& s) const {
  std::string out(s.length, '\0');
  std::size_t done = 0;
  while (done < s.length) {
    ssize_t r = ::pread(fd_, out.data() + done, s.length - done,
                        static_cast<off_t>(s.offset + done));
    if (r < 0) {
      if (errno == EINTR) continue;
      io_error("read " + (dir_ / "segment.dat").string());
    }
    if (r == 0) {
      throw Error(ErrorCode::kCorruptRecord,
                  "segment truncated: " + (dir_ / "segment.dat").string());
    }
    done += static_cast<std::size_t>(r);
  }
  return out;
}

std::optional<std::string> FileBackend::get(std::string_view key) const {
  auto idx = view();
  auto it = idx->slots.find(key);
  if (it == idx->slots.end()) return std::nullopt;
  return read_slot(it->second);
}

std::vector<KvPair> FileBackend::scan(std::string_view lo,
                                      std::string_view hi) const {
  auto idx = view();
  std::vector<KvPair> out;
  if (!hi.empty() && hi <= lo) return out;
  auto end = hi.empty() ? idx->slots.end() : idx->slots.lower_bound(hi);
  for (auto it = idx->slots.lower_bound(lo); it != end; ++it) {
    out.emplace_back(it->first, read_slot(it->second));
  }
  return out;
}

void FileBackend::prepare(const WriteBatch& batch) {
  auto base = view();
  auto next = std::make_shared<Index>(*base);
  // Bytes past the committed length belong to an abandoned prepare.
  if (::ftruncate(fd_, static_cast<off_t>(base->segment_length)) != 0) {
    io_error("truncate segment");
  }
  std::string appended;
  std::uint64_t offset = base->segment_length;
  for (const auto& [key, value] : batch.ops()) {
    if (!value) {
      next->slots.erase(key);
      continue;
    }
    if (value->size() > 0xffffffffULL) {
      throw Error(ErrorCode::kBackendIO, "value exceeds 4 GiB");
    }
    next->slots.insert_or_assign(
        key, Slot{offset + appended.size(),
                  static_cast<std::uint32_t>(value->size())});
    appended += *value;
  }
  if (::pwrite(fd_, appended.data(), appended.size(),
               static_cast<off_t>(offset)) !=
      static_cast<ssize_t>(appended.size())) {
    io_error("append segment");
  }
  if (::fsync(fd_) != 0) io_error("fsync segment");
  next->segment_length = offset + appended.size();
  write_index(*next, staged_generation());
  staged_ = std::move(next);
}

void FileBackend::publish() {
  if (!staged_) return;
  std::unique_lock lock(mu_);
  current_ = std::move(staged_);
  staged_.reset();
  ++generation_;
}

void FileBackend::abort() { staged_.reset(); }

std::uint64_t FileBackend::generation() const {
  std::shared_lock lock(mu_);
  return generation_;
}

std::uint64_t FileBackend::staged_generation() const { return generation() + 1; }

BackendStats FileBackend::stats() const {
  auto idx = view();
  BackendStats s;
  s.records = idx->slots.size();
  for (const auto& [k, slot] : idx->slots) s.value_bytes += slot.length;
  return s;
}

void FileBackend::prune_indexes() const {
  const std::string keep = "index." + std::to_string(generation());
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("index.", 0) == 0 && name != keep) fs::remove(entry.path(), ec);
  }
}

}  // namespace tgs
