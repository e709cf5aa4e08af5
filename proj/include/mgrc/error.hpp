#ifndef MGRC_ERROR_HPP
#define MGRC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mgrc {

// Every failure the library can raise. CLI diagnostics print the enum name,
// so the set doubles as the user-facing error vocabulary.
enum class errc {
  invalid_shape,
  too_many_dims,
  level_out_of_range,
  shape_mismatch,
  non_finite_input,
  degenerate_data,
  overflow,
  unknown_codec,
  corrupt_stream,
  bad_magic,
  unsupported_version,
  checksum_mismatch,
  tolerance_unreachable,
  plane_count_out_of_range,
  unsatisfiable_tolerance,
  invalid_state,
  prefix_violation,
  budget_too_small,
  io_error,
};

const char* errc_name(errc code);

class error : public std::runtime_error {
public:
  error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw error(code, message);
}

} // namespace mgrc

#endif
