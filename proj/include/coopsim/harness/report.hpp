#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "coopsim/harness/runner.hpp"

namespace coopsim::harness {

enum class ReportFormat { Csv, Markdown, Json };

std::string_view to_string(ReportFormat f);
ReportFormat report_format_from_string(std::string_view s);  // throws ConfigError
std::string_view extension(ReportFormat f);

// Deterministic rendering; numbers in csv and markdown use %.9g. One row
// per (record, variant). Throws std::invalid_argument on empty input.
std::string render_report(const std::vector<RunRecord>& records, ReportFormat format);

// Throws std::runtime_error naming the path on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Every run*.json / sweep*.json record file in `dir`, by file name.
std::vector<RunRecord> load_records(const std::filesystem::path& dir);

}  // namespace coopsim::harness
