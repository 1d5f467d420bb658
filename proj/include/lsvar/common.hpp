#ifndef LSVAR_COMMON_HPP
#define LSVAR_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lsvar {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

enum class ErrorCode {
  InvalidArgument,
  AllWeightsZero,
  SingularGram,
  SingularCorrection,
  SingularIminusA,
  NoConvergence,
  UnstableModel,
  EmptyGrid,
  NoTruth,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable code; every failure in the library
/// is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AllWeightsZero: return "AllWeightsZero";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::SingularCorrection: return "SingularCorrection";
    case ErrorCode::SingularIminusA: return "SingularIminusA";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnstableModel: return "UnstableModel";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::NoTruth: return "NoTruth";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Reciprocal condition number below which a Gram matrix is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

}  // namespace lsvar

#endif  // LSVAR_COMMON_HPP
