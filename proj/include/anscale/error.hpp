#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace anscale {

enum class Errc {
  invalid_range,
  out_of_range,
  empty_input,
  domain,
  negative_eigenvalue,
  family_mismatch,
  degenerate_ensemble,
  too_few_paths,
  zero_variance,
  rank_deficient,
  non_convergence,
  undefined_timescale,
  bootstrap_failure,
  malformed_row,
  no_days,
  nonpositive_price,
  interval_out_of_range,
  io,
  format,
};

std::string_view errc_name(Errc code) noexcept;

/// Exception carrying a machine-readable category alongside the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace anscale
