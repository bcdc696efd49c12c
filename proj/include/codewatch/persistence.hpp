#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "codewatch/event_model.hpp"

namespace codewatch {

enum class Collection : std::uint8_t { User, InteractionLogs };

std::string_view to_string(Collection c);

struct StoredDocument {
  std::string id;
  Collection collection = Collection::InteractionLogs;
  Json body;
  EpochMs stored_at = 0;

  friend bool operator==(const StoredDocument&, const StoredDocument&) = default;
};

/// Conjunction over the indexed fields. Unset members match everything.
/// The time range is inclusive on both ends and applies to a log's first
/// event time (or an account's created_at).
struct QueryFilter {
  std::optional<std::string> user_id;
  std::optional<std::string> file_path;
  std::optional<EpochMs> from;
  std::optional<EpochMs> to;

  bool matches(const StoredDocument& doc) const;
};

/// Values of the indexed fields for one document.
struct IndexKeys {
  std::optional<std::string> user_id;
  std::optional<std::string> file_path;
  std::optional<EpochMs> time;
};

IndexKeys index_keys(const StoredDocument& doc);

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::function<EpochMs()>;
EpochMs system_now_ms();

/// Repository over the `user` and `interaction_logs` collections.
///
/// Bodies are validated for their collection before any write; a rejected
/// write throws ValidationFailed and leaves the store unchanged. Reads return
/// the latest committed state. Implementations are safe to call from
/// multiple threads.
class Repository {
 public:
  virtual ~Repository() = default;

  std::string insert(Collection c, Json body);
  /// Overwrites an existing document in place; false when the id is unknown.
  bool replace(Collection c, const std::string& id, Json body);

  virtual std::optional<StoredDocument> get(Collection c, const std::string& id) const = 0;
  /// False when the id was already absent.
  virtual bool remove(Collection c, const std::string& id) = 0;
  /// Sorted by (stored_at, id).
  virtual std::vector<StoredDocument> query(Collection c, const QueryFilter& filter) const = 0;

  static void validate_body(Collection c, const Json& body);

 protected:
  virtual std::string do_insert(Collection c, Json body) = 0;
  virtual bool do_replace(Collection c, const std::string& id, Json body) = 0;
};

/// Reference backend: one append-only journal per collection under a
/// directory, with an in-memory index rebuilt on open.
///
/// Journal framing, one record per line:
///
///     <decimal byte length of JSON>\t<JSON record>\n
///
/// A record is {"op":"put","id":...,"stored_at":...,"body":{...}} or the
/// tombstone {"op":"del","id":...}. A later put for an id supersedes earlier
/// ones. On open, a torn or corrupt tail is truncated back to the last
/// complete record.
class FileRepository final : public Repository {
 public:
  struct Options {
    bool sync = true;  // fdatasync after every append
    Clock clock = system_now_ms;
  };

  explicit FileRepository(std::filesystem::path dir);
  FileRepository(std::filesystem::path dir, Options options);
  ~FileRepository() override;

  FileRepository(const FileRepository&) = delete;
  FileRepository& operator=(const FileRepository&) = delete;

  std::optional<StoredDocument> get(Collection c, const std::string& id) const override;
  bool remove(Collection c, const std::string& id) override;
  std::vector<StoredDocument> query(Collection c, const QueryFilter& filter) const override;

  static std::filesystem::path journal_path(const std::filesystem::path& dir, Collection c);

  /// Reads every committed record of a journal without the index. Used for
  /// recovery and as a linear-scan reference.
  static std::vector<StoredDocument> scan_journal(const std::filesystem::path& path, Collection c);

 protected:
  std::string do_insert(Collection c, Json body) override;
  bool do_replace(Collection c, const std::string& id, Json body) override;

 private:
  struct Table;

  Table& table(Collection c) const;
  void load(Table& t);

  std::filesystem::path dir_;
  Options options_;
  std::unique_ptr<Table> tables_[2];
};

/// Volatile backend with the same contract, for in-process pipelines.
class MemoryRepository final : public Repository {
 public:
  explicit MemoryRepository(Clock clock = system_now_ms);

  std::optional<StoredDocument> get(Collection c, const std::string& id) const override;
  bool remove(Collection c, const std::string& id) override;
  std::vector<StoredDocument> query(Collection c, const QueryFilter& filter) const override;

 protected:
  std::string do_insert(Collection c, Json body) override;
  bool do_replace(Collection c, const std::string& id, Json body) override;

 private:
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, StoredDocument> docs_[2];
  std::uint64_t next_id_[2] = {1, 1};
};

/// Opens a backend from a location string: "memory:" or a directory path
/// (optionally prefixed "file:").
std::unique_ptr<Repository> open_repository(std::string_view location);

std::string format_document_id(std::uint64_t seq);

}  // namespace codewatch
