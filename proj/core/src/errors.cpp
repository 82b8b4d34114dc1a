#include "speccf/errors.hpp"

namespace speccf {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::file_not_found: return "FileNotFound";
    case Errc::missing_cell: return "MissingCell";
    case Errc::ragged_rows: return "RaggedRows";
    case Errc::unknown_unit: return "UnknownUnit";
    case Errc::t0_out_of_range: return "T0OutOfRange";
    case Errc::non_uniform_time_step: return "NonUniformTimeStep";
    case Errc::degenerate_data: return "DegenerateData";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::too_few_controls: return "TooFewControls";
    case Errc::panel_mismatch: return "PanelMismatch";
    case Errc::singular_system: return "SingularSystem";
    case Errc::singular_covariance: return "SingularCovariance";
    case Errc::empty_prior: return "EmptyPrior";
    case Errc::quadrature_underflow: return "QuadratureUnderflow";
    case Errc::non_finite_model: return "NonFiniteModel";
    case Errc::bad_config: return "BadConfig";
    case Errc::internal: return "Internal";
  }
  return "Internal";
}

void raise(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace speccf
