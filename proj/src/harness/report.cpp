#include "coopsim/harness/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coopsim::harness {

std::string_view to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Markdown: return "markdown";
    case ReportFormat::Json: return "json";
  }
  return "unknown";
}

ReportFormat report_format_from_string(std::string_view s) {
  for (auto f : {ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Json}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown report format: " + std::string(s));
}

std::string_view extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Markdown: return "md";
    case ReportFormat::Json: return "json";
  }
  return "txt";
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double metric(const MetricRow& row, const std::string& key) {
  for (const auto& [k, v] : row)
    if (k == key) return v;
  return 0.0;
}

std::string value_text(const RunRecord& r) { return r.value ? num(*r.value) : ""; }

std::string label(const VariantResult& v) {
  return v.name == "dense_bev" ? "dense_bev (cost-only baseline)" : v.name;
}

std::string render_csv(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "record,config_hash,mode,axis,value,variant,seeds";
  for (const auto& [k, v] : records.front().variants.front().mean) os << ',' << k;
  os << ",mean_body_bytes\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RunRecord& r = records[i];
    for (const auto& v : r.variants) {
      os << i << ',' << r.config_hash << ',' << r.mode << ',' << r.axis << ',' << value_text(r) << ',' << v.name
         << ',' << v.seeds.size();
      for (const auto& [k, x] : v.mean) os << ',' << num(x);
      os << ',' << num(v.cost.mean_body_bytes) << '\n';
    }
  }
  return os.str();
}

void markdown_table(std::ostringstream& os, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  os << '|';
  for (const auto& h : header) os << ' ' << h << " |";
  os << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) os << (i == 0 ? " --- |" : " ---: |");
  os << '\n';
  for (const auto& row : rows) {
    os << '|';
    for (const auto& c : row) os << ' ' << c << " |";
    os << '\n';
  }
}

std::string render_markdown(const std::vector<RunRecord>& records) {
  const bool any_axis = std::any_of(records.begin(), records.end(), [](const RunRecord& r) { return !r.axis.empty(); });
  const auto lead = [&](const RunRecord& r, const VariantResult& v) {
    std::vector<std::string> row{label(v)};
    if (any_axis) {
      row.push_back(r.axis);
      row.push_back(value_text(r));
    }
    return row;
  };
  std::vector<std::string> lead_header{"Method"};
  if (any_axis) {
    lead_header.push_back("Axis");
    lead_header.push_back("Value");
  }

  std::ostringstream os;
  os << "## Perception\n\n";
  {
    auto header = lead_header;
    for (const char* h : {"mAP", "AP car", "MOTA", "IDS", "Recall", "IoU-lane", "IoU-crosswalk", "IoU-n", "IoU-f"})
      header.emplace_back(h);
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : records) {
      for (const auto& v : r.variants) {
        auto row = lead(r, v);
        for (const char* k : {"map", "ap_car", "mota", "id_switches", "detection_recall", "iou_lane", "iou_crosswalk",
                              "iou_n", "iou_f"})
          row.push_back(num(metric(v.mean, k)));
        rows.push_back(std::move(row));
      }
    }
    markdown_table(os, header, rows);
  }
  os << "\n## Planning\n\n";
  {
    auto header = lead_header;
    for (const char* block : {"L2 (m)", "Col. Rate", "Off-Road Rate"}) {
      for (const char* h : {"2.5s", "3.5s", "4.5s", "Avg."}) header.push_back(std::string(block) + " " + h);
    }
    header.emplace_back("Transmission Cost (BPS)");
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : records) {
      for (const auto& v : r.variants) {
        auto row = lead(r, v);
        for (const char* block : {"l2", "collision", "offroad"}) {
          for (const char* h : {"2.5s", "3.5s", "4.5s", "avg"}) {
            row.push_back(num(metric(v.mean, std::string(block) + "_" + h)));
          }
        }
        row.push_back(num(metric(v.mean, "avg_bps")));
        rows.push_back(std::move(row));
      }
    }
    markdown_table(os, header, rows);
  }
  return os.str();
}

}  // namespace

std::string render_report(const std::vector<RunRecord>& records, ReportFormat format) {
  if (records.empty() || records.front().variants.empty()) throw std::invalid_argument("report: no records");
  switch (format) {
    case ReportFormat::Csv: return render_csv(records);
    case ReportFormat::Markdown: return render_markdown(records);
    case ReportFormat::Json: return records_to_json(records).dump(2) + "\n";
  }
  return {};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<RunRecord> load_records(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".json" &&
        (name.rfind("run", 0) == 0 || name.rfind("sweep", 0) == 0)) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> out;
  for (const auto& f : files) {
    try {
      for (auto& r : records_from_json(nlohmann::json::parse(read_text(f)))) out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw std::runtime_error("no run or sweep records in " + dir.string());
  return out;
}

}  // namespace coopsim::harness
