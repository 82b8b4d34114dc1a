#pragma once

#include <stdexcept>
#include <string>

namespace speccf {

// Error codes surfaced through the CLI as machine-readable JSON.
enum class Errc {
  file_not_found,
  missing_cell,
  ragged_rows,
  unknown_unit,
  t0_out_of_range,
  non_uniform_time_step,
  degenerate_data,
  length_mismatch,
  too_few_controls,
  panel_mismatch,
  singular_system,
  singular_covariance,
  empty_prior,
  quadrature_underflow,
  non_finite_model,
  bad_config,
  internal,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  Errc code() const { return code_; }
  const std::string& message() const { return message_; }

 private:
  Errc code_;
  std::string message_;
};

[[noreturn]] void raise(Errc code, const std::string& message);

}  // namespace speccf
