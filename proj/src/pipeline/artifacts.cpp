// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline/artifacts.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include <json.hpp>

#include "common/errors.hpp"

namespace cgru::pipeline {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

DirLock::DirLock(const fs::path& dir) : path_(dir / ".lock") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw IoError("output directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                    " if stale)");
    throw IoError("cannot create " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirLock::~DirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(const std::string& cell) {
  if (rows_.empty()) row();
  rows_.back().push_back(cell);
  return *this;
}

CsvTable& CsvTable::add(double value) { return add(fmt::format("{:.17g}", value)); }
CsvTable& CsvTable::add(long long value) { return add(std::to_string(value)); }

std::string CsvTable::str() const {
  auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
    return line + "\n";
  };
  std::string out = join(header_);
  for (const auto& r : rows_) {
    if (r.size() != header_.size())
      throw UsageError(fmt::format("csv row has {} cells, header has {}", r.size(), header_.size()));
    out += join(r);
  }
  return out;
}

void CsvTable::write(const fs::path& path) const { write_text(path, str()); }

std::size_t CsvData::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw FormatError("csv has no column '" + name + "'");
}

CsvData read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  CsvData data;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t comma; (comma = l.find(',', start)) != std::string::npos; start = comma + 1)
      cells.push_back(l.substr(start, comma - start));
    cells.push_back(l.substr(start));
    return cells;
  };
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty csv");
  data.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    data.rows.push_back(split(line));
    if (data.rows.back().size() != data.header.size())
      throw FormatError(path.string() + ": row width does not match header");
  }
  return data;
}

void write_text(const fs::path& path, std::string_view text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunManifest RunManifest::load_or_empty(const fs::path& dir) {
  RunManifest m;
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return m;
  try {
    auto j = nlohmann::json::parse(read_text(p));
    m.config_hash = j.value("config_hash", "");
    const auto artifacts = j.value("artifacts", nlohmann::json::object());
    const auto phases = j.value("phases", nlohmann::json::object());
    for (const auto& [k, v] : artifacts.items()) m.artifacts[k] = v.get<std::string>();
    for (const auto& [k, v] : phases.items())
      m.phases[k] = {v.value("status", ""), v.value("seconds", 0.0), v.value("message", "")};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  return m;
}

void RunManifest::save(const fs::path& dir) const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["artifacts"] = nlohmann::json::object();
  for (const auto& [k, v] : artifacts) j["artifacts"][k] = v;
  j["phases"] = nlohmann::json::object();
  for (const auto& [k, v] : phases) {
    nlohmann::json p{{"status", v.status}, {"seconds", v.seconds}};
    if (!v.message.empty()) p["message"] = v.message;
    j["phases"][k] = p;
  }
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

void RunManifest::record_artifact(const fs::path& dir, const std::string& relative) {
  artifacts[relative] = sha256_file(dir / relative);
}

}  // namespace cgru::pipeline
