#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codewatch/classifier.hpp"
#include "codewatch/event_model.hpp"

namespace codewatch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitOperational = 1;
inline constexpr int kExitUsage = 2;

/// Runs one CLI invocation. `env` stands in for the process environment so
/// callers can test precedence (flag > environment > config file).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const std::map<std::string, std::string>& env);

/// Environment snapshot of the CODEWATCH_* variables.
std::map<std::string, std::string> process_environment();

/// Loads session logs from a file, a directory of *.json files, or a glob
/// pattern with '*' / '?' in the final path component. A file may hold one
/// session document or a JSON array of them. Order: sorted by path, then
/// position within the file.
std::vector<SessionLog> load_logs_from_files(const std::string& source);

/// Parses ground truth: a JSON array of label tags, or plain text with one
/// tag per non-empty line.
std::vector<LineLabelKind> load_ground_truth(const std::string& content);

}  // namespace codewatch::cli
