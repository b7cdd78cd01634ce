#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace voxstream {

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a world position or block coordinate falls outside the
/// addressable 16-bit block range.
class AddressingError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised when a block map would exceed its configured pool size.
class PoolExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, long frame_index = -1)
      : std::runtime_error(frame_index >= 0
                               ? what + " (frame " + std::to_string(frame_index) + ")"
                               : what),
        frame_index_(frame_index) {}

  /// Index of the frame being read when the error occurred, -1 for header errors.
  long frame_index() const { return frame_index_; }

 private:
  long frame_index_;
};

}  // namespace voxstream
