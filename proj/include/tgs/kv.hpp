#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tgs {

using KvPair = std::pair<std::string, std::string>;

// Ordered set of puts and erases applied as one unit. Later operations on the
// same key win.
class WriteBatch {
 public:
  void put(std::string key, std::string value);
  void erase(std::string key);

  bool empty() const { return ops_.empty(); }
  std::size_t size() const { return ops_.size(); }
  // nullopt value marks an erase.
  const std::map<std::string, std::optional<std::string>>& ops() const {
    return ops_;
  }

 private:
  std::map<std::string, std::optional<std::string>> ops_;
};

struct BackendStats {
  std::uint64_t records = 0;
  std::uint64_t value_bytes = 0;
};

// Ordered byte-string map. Reads are safe from any thread. Writes go through
// prepare() then publish(): prepare makes a batch durable but invisible,
// publish swaps it in atomically. One writer at a time.
class KvBackend {
 public:
  virtual ~KvBackend() = default;

  virtual std::optional<std::string> get(std::string_view key) const = 0;
  // Records with lo <= key < hi in key order; an empty hi is unbounded.
  virtual std::vector<KvPair> scan(std::string_view lo,
                                   std::string_view hi) const = 0;
  std::vector<KvPair> scan_prefix(std::string_view prefix) const;

  virtual void prepare(const WriteBatch& batch) = 0;
  virtual void publish() = 0;
  virtual void abort() = 0;
  void commit(const WriteBatch& batch) {
    prepare(batch);
    publish();
  }

  // Committed generation; each publish advances it by one.
  virtual std::uint64_t generation() const = 0;
  // Generation a pending prepare() will publish as.
  virtual std::uint64_t staged_generation() const = 0;
  virtual BackendStats stats() const = 0;
};

class MemoryBackend final : public KvBackend {
 public:
  MemoryBackend();

  std::optional<std::string> get(std::string_view key) const override;
  std::vector<KvPair> scan(std::string_view lo,
                           std::string_view hi) const override;
  void prepare(const WriteBatch& batch) override;
  void publish() override;
  void abort() override;
  std::uint64_t generation() const override;
  std::uint64_t staged_generation() const override;
  BackendStats stats() const override;

 private:
  using Map = std::map<std::string, std::string, std::less<>>;

  std::shared_ptr<const Map> view() const;

  mutable std::shared_mutex mu_;
  std::shared_ptr<const Map> current_;
  std::shared_ptr<const Map> staged_;
  std::uint64_t generation_ = 0;
};

// One append-only segment file plus a generation-numbered index file per
// directory:
//
//   segment.dat        value bytes, appended, never rewritten
//   index.<gen>        [segment length u64][count u64] then per record
//                      [key len u32][key][offset u64][length u32], BE
//
// Opening at generation g reads index.<g> and ignores segment bytes beyond
// the recorded length, so an interrupted prepare() leaves no visible trace.
// Generation 0 is the empty store and has no index file.
class FileBackend final : public KvBackend {
 public:
  FileBackend(std::filesystem::path dir, std::uint64_t generation);
  ~FileBackend() override;

  FileBackend(const FileBackend&) = delete;
  FileBackend& operator=(const FileBackend&) = delete;

  std::optional<std::string> get(std::string_view key) const override;
  std::vector<KvPair> scan(std::string_view lo,
                           std::string_view hi) const override;
  void prepare(const WriteBatch& batch) override;
  void publish() override;
  void abort() override;
  std::uint64_t generation() const override;
  std::uint64_t staged_generation() const override;
  BackendStats stats() const override;

  const std::filesystem::path& dir() const { return dir_; }
  // Removes index files other than the committed one.
  void prune_indexes() const;

 private:
  struct Slot {
    std::uint64_t offset = 0;
    std::uint32_t length = 0;
  };
  struct Index {
    std::uint64_t segment_length = 0;
    std::map<std::string, Slot, std::less<>> slots;
  };

  std::shared_ptr<const Index> view() const;
  std::string read_slot(const Slot& s) const;
  std::filesystem::path index_path(std::uint64_t gen) const;
  static std::shared_ptr<const Index> load_index(const std::filesystem::path& p);
  void write_index(const Index& idx, std::uint64_t gen) const;

  std::filesystem::path dir_;
  int fd_ = -1;
  mutable std::shared_mutex mu_;
  std::shared_ptr<const Index> current_;
  std::shared_ptr<const Index> staged_;
  std::uint64_t generation_ = 0;
};

// Writes `content` to `target` through a temporary file and a rename.
void atomic_write_file(const std::filesystem::path& target,
                       std::string_view content);

}  // namespace tgs
