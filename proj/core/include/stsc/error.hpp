#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stsc {

enum class Errc {
  dimension,
  config,
  batch_too_small,
  state,
  parse,
  duplicate,
  range,
  not_found,
  insufficient_history,
  degenerate_range,
  empty_dataset,
  empty_input,
  divergence,
  version_mismatch,
  truncated,
  shape_mismatch,
  io,
};

std::string_view to_string(Errc code) noexcept;

// Single exception type for the toolkit; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace stsc
