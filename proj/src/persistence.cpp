#include "codewatch/persistence.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>

namespace codewatch {

namespace {

constexpr std::size_t kIdWidth = 12;

std::optional<std::uint64_t> parse_document_seq(std::string_view id) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), value);
  if (ec != std::errc{} || ptr != id.data() + id.size()) return std::nullopt;
  return value;
}

bool sorted_before(const StoredDocument& a, const StoredDocument& b) {
  if (a.stored_at != b.stored_at) return a.stored_at < b.stored_at;
  return a.id < b.id;
}

std::string frame_record(const Json& record) {
  const auto payload = record.dump();
  std::string out = std::to_string(payload.size());
  out += '\t';
  out += payload;
  out += '\n';
  return out;
}

std::string errno_message(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

// Parses records from the start of `data`; returns the documents that are
// live after replay and sets `good_bytes` to the end of the last complete
// record.
struct ReplayResult {
  std::map<std::string, StoredDocument> live;
  std::uint64_t max_seq = 0;
  std::size_t good_bytes = 0;
};

ReplayResult replay(std::string_view data, Collection c) {
  ReplayResult r;
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto tab = data.find('\t', pos);
    if (tab == std::string_view::npos || tab == pos || tab - pos > 20) break;
    std::size_t len = 0;
    const auto [ptr, ec] = std::from_chars(data.data() + pos, data.data() + tab, len);
    if (ec != std::errc{} || ptr != data.data() + tab) break;
    const auto body_begin = tab + 1;
    if (len > data.size() - body_begin || body_begin + len >= data.size() ||
        data[body_begin + len] != '\n') {
      break;
    }
    Json record;
    try {
      record = Json::parse(data.substr(body_begin, len));
    } catch (const Json::parse_error&) {
      break;
    }
    if (!record.is_object() || !record.contains("op") || !record.contains("id") ||
        !record["id"].is_string()) {
      break;
    }
    const auto id = record["id"].get<std::string>();
    const auto& op = record["op"];
    if (op == "put") {
      if (!record.contains("body") || !record["stored_at"].is_number_integer()) break;
      StoredDocument doc{id, c, std::move(record["body"]), record["stored_at"].get<EpochMs>()};
      r.live[id] = std::move(doc);
    } else if (op == "del") {
      r.live.erase(id);
    } else {
      break;
    }
    if (const auto seq = parse_document_seq(id)) r.max_seq = std::max(r.max_seq, *seq);
    pos = body_begin + len + 1;
    r.good_bytes = pos;
  }
  return r;
}

}  // namespace

std::string_view to_string(Collection c) {
  return c == Collection::User ? "user" : "interaction_logs";
}

EpochMs system_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string format_document_id(std::uint64_t seq) {
  auto digits = std::to_string(seq);
  if (digits.size() < kIdWidth) digits.insert(0, kIdWidth - digits.size(), '0');
  return digits;
}

IndexKeys index_keys(const StoredDocument& doc) {
  IndexKeys keys;
  const auto& b = doc.body;
  if (!b.is_object()) return keys;
  if (doc.collection == Collection::User) {
    keys.user_id = doc.id;
    if (const auto it = b.find("created_at"); it != b.end() && it->is_number_integer()) {
      keys.time = it->get<EpochMs>();
    }
    return keys;
  }
  if (const auto it = b.find("user_id"); it != b.end() && it->is_string()) {
    keys.user_id = it->get<std::string>();
  }
  if (const auto it = b.find("file_path"); it != b.end() && it->is_string()) {
    keys.file_path = it->get<std::string>();
  }
  if (const auto it = b.find("events"); it != b.end() && it->is_array() && !it->empty()) {
    const auto& first = it->front();
    if (first.is_object()) {
      if (const auto t = first.find("time"); t != first.end() && t->is_number_integer()) {
        keys.time = t->get<EpochMs>();
      }
    }
  }
  return keys;
}

bool QueryFilter::matches(const StoredDocument& doc) const {
  const auto keys = index_keys(doc);
  if (user_id && keys.user_id != user_id) return false;
  if (file_path && keys.file_path != file_path) return false;
  if (from || to) {
    if (!keys.time) return false;
    if (from && *keys.time < *from) return false;
    if (to && *keys.time > *to) return false;
  }
  return true;
}

// --- Repository -------------------------------------------------------------

void Repository::validate_body(Collection c, const Json& body) {
  if (c == Collection::User) {
    if (auto v = validate_account_document(body); !v.ok()) {
      throw ValidationFailed(std::move(v.violations));
    }
    return;
  }
  try {
    log_from_json(body);
  } catch (const MalformedDocument& e) {
    throw ValidationFailed({e.what()});
  }
}

std::string Repository::insert(Collection c, Json body) {
  validate_body(c, body);
  return do_insert(c, std::move(body));
}

bool Repository::replace(Collection c, const std::string& id, Json body) {
  validate_body(c, body);
  return do_replace(c, id, std::move(body));
}

// --- FileRepository ---------------------------------------------------------

struct FileRepository::Table {
  Collection collection;
  std::filesystem::path path;
  int fd = -1;
  off_t size = 0;
  mutable std::shared_mutex mutex;
  std::map<std::string, StoredDocument> docs;
  std::map<std::string, std::set<std::string>> by_user;
  std::map<std::string, std::set<std::string>> by_file;
  std::uint64_t next_seq = 1;

  void index(const StoredDocument& doc) {
    const auto keys = index_keys(doc);
    if (keys.user_id) by_user[*keys.user_id].insert(doc.id);
    if (keys.file_path) by_file[*keys.file_path].insert(doc.id);
  }

  void unindex(const StoredDocument& doc) {
    const auto keys = index_keys(doc);
    const auto drop = [&](auto& idx, const std::optional<std::string>& key) {
      if (!key) return;
      const auto it = idx.find(*key);
      if (it == idx.end()) return;
      it->second.erase(doc.id);
      if (it->second.empty()) idx.erase(it);
    };
    drop(by_user, keys.user_id);
    drop(by_file, keys.file_path);
  }

  // Appends one framed record; on failure the journal is cut back so a
  // partial record never survives.
  void append(const std::string& framed, bool sync) {
    std::size_t written = 0;
    while (written < framed.size()) {
      const auto n = ::write(fd, framed.data() + written, framed.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        const auto msg = errno_message("journal write failed");
        [[maybe_unused]] auto rc = ::ftruncate(fd, size);
        throw StorageError(msg);
      }
      written += static_cast<std::size_t>(n);
    }
    if (sync && ::fdatasync(fd) != 0) {
      const auto msg = errno_message("journal sync failed");
      [[maybe_unused]] auto rc = ::ftruncate(fd, size);
      throw StorageError(msg);
    }
    size += static_cast<off_t>(framed.size());
  }
};

FileRepository::FileRepository(std::filesystem::path dir) : FileRepository(std::move(dir), Options{}) {}

FileRepository::FileRepository(std::filesystem::path dir, Options options)
    : dir_(std::move(dir)), options_(std::move(options)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw StorageError("cannot create store directory " + dir_.string() + ": " + ec.message());
  for (const auto c : {Collection::User, Collection::InteractionLogs}) {
    auto t = std::make_unique<Table>();
    t->collection = c;
    t->path = journal_path(dir_, c);
    load(*t);
    tables_[static_cast<int>(c)] = std::move(t);
  }
}

FileRepository::~FileRepository() {
  for (auto& t : tables_) {
    if (t && t->fd >= 0) ::close(t->fd);
  }
}

std::filesystem::path FileRepository::journal_path(const std::filesystem::path& dir, Collection c) {
  return dir / (std::string(to_string(c)) + ".journal");
}

FileRepository::Table& FileRepository::table(Collection c) const {
  return *tables_[static_cast<int>(c)];
}

void FileRepository::load(Table& t) {
  t.fd = ::open(t.path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (t.fd < 0) throw StorageError(errno_message("cannot open journal " + t.path.string()));

  std::ifstream in(t.path, std::ios::binary);
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  auto r = replay(data, t.collection);
  if (r.good_bytes < data.size()) {
    if (::ftruncate(t.fd, static_cast<off_t>(r.good_bytes)) != 0) {
      throw StorageError(errno_message("cannot truncate torn journal " + t.path.string()));
    }
  }
  t.size = static_cast<off_t>(r.good_bytes);
  t.next_seq = r.max_seq + 1;
  t.docs = std::move(r.live);
  for (const auto& [id, doc] : t.docs) t.index(doc);
}

std::vector<StoredDocument> FileRepository::scan_journal(const std::filesystem::path& path,
                                                         Collection c) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  auto r = replay(data, c);
  std::vector<StoredDocument> out;
  out.reserve(r.live.size());
  for (auto& [id, doc] : r.live) out.push_back(std::move(doc));
  std::sort(out.begin(), out.end(), sorted_before);
  return out;
}

std::string FileRepository::do_insert(Collection c, Json body) {
  auto& t = table(c);
  std::unique_lock lock(t.mutex);
  StoredDocument doc{format_document_id(t.next_seq), c, std::move(body), options_.clock()};
  Json record;
  record["op"] = "put";
  record["id"] = doc.id;
  record["stored_at"] = doc.stored_at;
  record["body"] = doc.body;
  t.append(frame_record(record), options_.sync);
  ++t.next_seq;
  t.index(doc);
  auto id = doc.id;
  t.docs.emplace(id, std::move(doc));
  return id;
}

bool FileRepository::do_replace(Collection c, const std::string& id, Json body) {
  auto& t = table(c);
  std::unique_lock lock(t.mutex);
  const auto it = t.docs.find(id);
  if (it == t.docs.end()) return false;
  Json record;
  record["op"] = "put";
  record["id"] = id;
  record["stored_at"] = it->second.stored_at;
  record["body"] = body;
  t.append(frame_record(record), options_.sync);
  t.unindex(it->second);
  it->second.body = std::move(body);
  t.index(it->second);
  return true;
}

std::optional<StoredDocument> FileRepository::get(Collection c, const std::string& id) const {
  auto& t = table(c);
  std::shared_lock lock(t.mutex);
  const auto it = t.docs.find(id);
  if (it == t.docs.end()) return std::nullopt;
  return it->second;
}

bool FileRepository::remove(Collection c, const std::string& id) {
  auto& t = table(c);
  std::unique_lock lock(t.mutex);
  const auto it = t.docs.find(id);
  if (it == t.docs.end()) return false;
  Json record;
  record["op"] = "del";
  record["id"] = id;
  t.append(frame_record(record), options_.sync);
  t.unindex(it->second);
  t.docs.erase(it);
  return true;
}

std::vector<StoredDocument> FileRepository::query(Collection c, const QueryFilter& filter) const {
  auto& t = table(c);
  std::shared_lock lock(t.mutex);
  std::vector<StoredDocument> out;

  // Narrow via the smallest applicable secondary index, then filter.
  const std::set<std::string>* candidates = nullptr;
  static const std::set<std::string> kEmpty;
  const auto consider = [&](const auto& idx, const std::optional<std::string>& key) {
    if (!key) return;
    const auto it = idx.find(*key);
    const auto* ids = it == idx.end() ? &kEmpty : &it->second;
    if (!candidates || ids->size() < candidates->size()) candidates = ids;
  };
  if (c == Collection::InteractionLogs) consider(t.by_user, filter.user_id);
  consider(t.by_file, filter.file_path);

  if (candidates) {
    for (const auto& id : *candidates) {
      const auto& doc = t.docs.at(id);
      if (filter.matches(doc)) out.push_back(doc);
    }
  } else {
    for (const auto& [id, doc] : t.docs) {
      if (filter.matches(doc)) out.push_back(doc);
    }
  }
  std::sort(out.begin(), out.end(), sorted_before);
  return out;
}

// --- MemoryRepository -------------------------------------------------------

MemoryRepository::MemoryRepository(Clock clock) : clock_(std::move(clock)) {}

std::string MemoryRepository::do_insert(Collection c, Json body) {
  std::unique_lock lock(mutex_);
  const auto idx = static_cast<int>(c);
  auto id = format_document_id(next_id_[idx]++);
  docs_[idx].emplace(id, StoredDocument{id, c, std::move(body), clock_()});
  return id;
}

bool MemoryRepository::do_replace(Collection c, const std::string& id, Json body) {
  std::unique_lock lock(mutex_);
  auto& docs = docs_[static_cast<int>(c)];
  const auto it = docs.find(id);
  if (it == docs.end()) return false;
  it->second.body = std::move(body);
  return true;
}

std::optional<StoredDocument> MemoryRepository::get(Collection c, const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto& docs = docs_[static_cast<int>(c)];
  const auto it = docs.find(id);
  if (it == docs.end()) return std::nullopt;
  return it->second;
}

bool MemoryRepository::remove(Collection c, const std::string& id) {
  std::unique_lock lock(mutex_);
  return docs_[static_cast<int>(c)].erase(id) > 0;
}

std::vector<StoredDocument> MemoryRepository::query(Collection c, const QueryFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<StoredDocument> out;
  for (const auto& [id, doc] : docs_[static_cast<int>(c)]) {
    if (filter.matches(doc)) out.push_back(doc);
  }
  std::sort(out.begin(), out.end(), sorted_before);
  return out;
}

std::unique_ptr<Repository> open_repository(std::string_view location) {
  if (location == "memory:" || location == "memory") return std::make_unique<MemoryRepository>();
  if (location.starts_with("file:")) location.remove_prefix(5);
  if (location.empty()) throw StorageError("empty store location");
  return std::make_unique<FileRepository>(std::filesystem::path(location));
}

}  // namespace codewatch
