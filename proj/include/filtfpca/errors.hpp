#pragma once

#include <stdexcept>
#include <string>

namespace filtfpca {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Two grid-sampled objects live on different grids.
struct GridMismatch : Error {
  using Error::Error;
};

/// A requested count/depth exceeds what the data supports.
struct DimensionError : Error {
  using Error::Error;
};

/// A group has (near-)zero total variance and cannot be normalized.
struct DegenerateGroup : Error {
  std::string group;
  DegenerateGroup(const std::string& msg, std::string group_id)
      : Error(msg), group(std::move(group_id)) {}
};

/// Gram-Schmidt input is linearly dependent at the given index.
struct RankDeficient : Error {
  int index;
  RankDeficient(const std::string& msg, int offending_index)
      : Error(msg), index(offending_index) {}
};

/// Every member of a community has exhausted its variance.
struct ExhaustedCommunity : Error {
  using Error::Error;
};

/// A layer update received components inconsistent with the partition.
struct StructureError : Error {
  using Error::Error;
};

/// Invalid configuration value.
struct ConfigError : Error {
  using Error::Error;
};

/// Raw-recording input cannot be turned into epochs.
struct IngestError : Error {
  using Error::Error;
};

/// Malformed file content; carries the 1-based line number when known.
struct ParseError : Error {
  long line;
  explicit ParseError(const std::string& msg, long line_number = 0)
      : Error(line_number > 0 ? msg + " (line " + std::to_string(line_number) + ")" : msg),
        line(line_number) {}
};

/// Unknown group id or out-of-range trajectory index.
struct LookupError : Error {
  using Error::Error;
};

/// File could not be opened or written.
struct IoError : Error {
  using Error::Error;
};

}  // namespace filtfpca
