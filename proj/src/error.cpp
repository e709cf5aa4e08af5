#include "mgrc/error.hpp"

namespace mgrc {

const char* errc_name(errc code) {
  switch (code) {
  case errc::invalid_shape: return "InvalidShape";
  case errc::too_many_dims: return "TooManyDims";
  case errc::level_out_of_range: return "LevelOutOfRange";
  case errc::shape_mismatch: return "ShapeMismatch";
  case errc::non_finite_input: return "NonFiniteInput";
  case errc::degenerate_data: return "DegenerateData";
  case errc::overflow: return "Overflow";
  case errc::unknown_codec: return "UnknownCodec";
  case errc::corrupt_stream: return "CorruptStream";
  case errc::bad_magic: return "BadMagic";
  case errc::unsupported_version: return "UnsupportedVersion";
  case errc::checksum_mismatch: return "ChecksumMismatch";
  case errc::tolerance_unreachable: return "ToleranceUnreachable";
  case errc::plane_count_out_of_range: return "PlaneCountOutOfRange";
  case errc::unsatisfiable_tolerance: return "UnsatisfiableTolerance";
  case errc::invalid_state: return "InvalidState";
  case errc::prefix_violation: return "PrefixViolation";
  case errc::budget_too_small: return "BudgetTooSmall";
  case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

} // namespace mgrc
