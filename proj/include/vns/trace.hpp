#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace vns {

using TraceFields = nlohmann::ordered_json;

// One record per line, UTF-8, stable key order ("t", "kind", payload fields in
// emission order) so traces diff cleanly and replay byte-identically.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream* out) : out_(out) {}

  void write(double t, const std::string& kind, TraceFields fields);
  std::uint64_t records_written() const { return count_; }

 private:
  std::ostream* out_;
  std::uint64_t count_ = 0;
};

struct TraceRecord {
  double t = 0.0;
  std::string kind;
  TraceFields fields;
};

std::vector<TraceRecord> read_trace(std::istream& in);
std::vector<TraceRecord> read_trace_file(const std::string& path);

}  // namespace vns
