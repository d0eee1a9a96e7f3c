#pragma once

#include <stdexcept>
#include <string>

namespace radarodo {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file. `line` is 1-based, 0 when not tied to a line.
struct ParseError : Error {
  explicit ParseError(const std::string& what, std::size_t line_no = 0)
      : Error(line_no ? "line " + std::to_string(line_no) + ": " + what : what),
        line(line_no) {}
  std::size_t line;
};

struct EmptyStream : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct GimbalLock : Error { using Error::Error; };
struct DegenerateScan : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };
struct DegenerateDirection : Error { using Error::Error; };
struct NoConsensus : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct NoCorrespondences : Error { using Error::Error; };
struct NoOverlap : Error { using Error::Error; };
struct TooShort : Error { using Error::Error; };
struct DegenerateAlignment : Error { using Error::Error; };
struct BadSpec : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace radarodo
