#include "vns/trace.hpp"

#include <fstream>
#include <ostream>

#include "vns/errors.hpp"

namespace vns {

void TraceWriter::write(double t, const std::string& kind, TraceFields fields) {
  ++count_;
  if (out_ == nullptr) return;
  TraceFields record;
  record["t"] = t;
  record["kind"] = kind;
  for (auto& [key, value] : fields.items()) record[key] = std::move(value);
  *out_ << record.dump() << '\n';
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  double last_t = -1.0e300;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TraceFields fields;
    try {
      fields = TraceFields::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw VnsError(Errc::MalformedTrace,
                     "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!fields.is_object() || !fields.contains("t") || !fields.contains("kind") ||
        !fields["t"].is_number() || !fields["kind"].is_string()) {
      throw VnsError(Errc::MalformedTrace,
                     "line " + std::to_string(line_no) + ": missing t/kind");
    }
    TraceRecord rec;
    rec.t = fields["t"].get<double>();
    rec.kind = fields["kind"].get<std::string>();
    if (rec.t < last_t) {
      throw VnsError(Errc::MalformedTrace,
                     "line " + std::to_string(line_no) + ": time goes backwards");
    }
    last_t = rec.t;
    fields.erase("t");
    fields.erase("kind");
    rec.fields = std::move(fields);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<TraceRecord> read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) {
    throw VnsError(Errc::IoError, "cannot open trace " + path);
  }
  return read_trace(in);
}

}  // namespace vns
