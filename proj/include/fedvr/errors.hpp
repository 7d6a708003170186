#pragma once

#include <stdexcept>
#include <string>

namespace fedvr {

enum class Errc {
  invalid_argument,   // out-of-range hyperparameter or malformed input
  dimension_mismatch, // vector/model/batch shapes disagree
  non_finite,         // a produced value is NaN or infinite
  io_error,           // file missing or unreadable
  bad_magic,          // IDX header magic is wrong
  truncated_file,     // IDX payload shorter than the header promises
  count_mismatch,     // image and label files disagree on sample count
  retries_exhausted,  // partition redraws exceeded the retry budget
  config_error,       // config text: syntax, unknown key, or bad value
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::non_finite: return "non_finite";
    case Errc::io_error: return "io_error";
    case Errc::bad_magic: return "bad_magic";
    case Errc::truncated_file: return "truncated_file";
    case Errc::count_mismatch: return "count_mismatch";
    case Errc::retries_exhausted: return "retries_exhausted";
    case Errc::config_error: return "config_error";
  }
  return "unknown";
}

class FedError : public std::runtime_error {
public:
  FedError(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw FedError(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace fedvr
