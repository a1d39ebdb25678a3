#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace dnnaif {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
  BudgetExhausted,
  DimensionMismatch,
  EvaluationFailed,
  NegativeGap,
  EmptyInput,
  HeadMismatch,
  EmptyDataset,
  NonFiniteLoss,
  InvalidInput,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BudgetExhausted: return "BudgetExhausted";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EvaluationFailed: return "EvaluationFailed";
    case ErrorKind::NegativeGap: return "NegativeGap";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::HeadMismatch: return "HeadMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent, counter-addressable
/// substreams so that the i-th draw of a stream does not depend on how many
/// other streams were consumed before it.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

// Stream identifiers; arbitrary but fixed.
namespace streams {
inline constexpr std::uint64_t kNoise = 0x6e6f697365ULL;
inline constexpr std::uint64_t kDirections = 0x64697273ULL;
inline constexpr std::uint64_t kFilter = 0x66696c74ULL;
inline constexpr std::uint64_t kTraining = 0x747261696eULL;
inline constexpr std::uint64_t kInit = 0x696e6974ULL;
inline constexpr std::uint64_t kDesign = 0x64657369676eULL;
inline constexpr std::uint64_t kSimulator = 0x73696dULL;
inline constexpr std::uint64_t kStart = 0x7374617274ULL;
}  // namespace streams

}  // namespace dnnaif
