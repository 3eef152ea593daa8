#pragma once

#include <stdexcept>
#include <string>

namespace vns {

enum class Errc {
  UnknownParent,
  PortOccupied,
  DuplicateNodeId,
  UnknownNode,
  CannotDetachRoot,
  TimeTravel,
  LinkNotMated,
  ProtocolViolation,
  UnknownOrigin,
  InsufficientRobots,
  NoValidSplit,
  ParseError,
  ValidationError,
  MalformedTrace,
  ScenarioError,
  IoError,
};

const char* errc_name(Errc code);

class VnsError : public std::runtime_error {
 public:
  VnsError(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

// Non-throwing diagnostic, used by validate().
struct Violation {
  Errc code;
  std::string detail;
};

}  // namespace vns
