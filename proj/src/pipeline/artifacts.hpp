// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cgru::pipeline {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

/// Exclusive ownership of an output directory via <dir>/.lock, created with
/// O_EXCL and removed on destruction.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

/// Comma-separated table with doubles printed round-trip exact.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvTable& row();
  CsvTable& add(const std::string& cell);
  CsvTable& add(double value);
  CsvTable& add(long long value);
  CsvTable& add(int value) { return add(static_cast<long long>(value)); }
  CsvTable& add(std::size_t value) { return add(static_cast<long long>(value)); }
  std::string str() const;
  void write(const fs::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Minimal reader for the tables written above: header plus string cells.
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const;
};
CsvData read_csv(const fs::path& path);

void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

struct PhaseRecord {
  std::string status;  // "ok" | "failed"
  double seconds = 0.0;
  std::string message;
};

/// manifest.json: config hash, artifacts (relative path -> sha256) and
/// per-phase status and wall-clock time.
struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::string> artifacts;
  std::map<std::string, PhaseRecord> phases;

  static RunManifest load_or_empty(const fs::path& dir);
  void save(const fs::path& dir) const;
  void record_artifact(const fs::path& dir, const std::string& relative);
};

}  // namespace cgru::pipeline
