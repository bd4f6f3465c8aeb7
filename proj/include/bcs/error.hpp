#pragma once

#include <stdexcept>
#include <string>

namespace bcs {

/// Error categories surfaced across the C boundary as status codes.
enum class ErrorCode {
  kContractViolation = 2,
  kIo = 3,
  kNumerical = 4,
  kNoFeasibleBlock = 5,
  kEmptyBlock = 6,
  kRankDeficient = 7,
  kDivergence = 8,
  kInternal = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A caller broke a documented precondition (dimension mismatch, bad index, ...).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error(ErrorCode::kContractViolation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

/// Singular or ill-conditioned per-signal system.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCode::kNumerical, what) {}
};

class NoFeasibleBlock : public Error {
 public:
  NoFeasibleBlock(long signal, const std::string& what)
      : Error(ErrorCode::kNoFeasibleBlock, what), signal_(signal) {}
  long signal() const noexcept { return signal_; }

 private:
  long signal_;
};

class EmptyBlock : public Error {
 public:
  explicit EmptyBlock(const std::string& what) : Error(ErrorCode::kEmptyBlock, what) {}
};

class RankDeficient : public Error {
 public:
  RankDeficient(long rank, const std::string& what)
      : Error(ErrorCode::kRankDeficient, what), rank_(rank) {}
  long rank() const noexcept { return rank_; }

 private:
  long rank_;
};

class Divergence : public Error {
 public:
  explicit Divergence(const std::string& what) : Error(ErrorCode::kDivergence, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ErrorCode::kInternal, what) {}
};

namespace detail {
[[noreturn]] void throw_contract(const std::string& what);
}  // namespace detail

#define BCS_REQUIRE(cond, msg)                        \
  do {                                                \
    if (!(cond)) ::bcs::detail::throw_contract(msg);  \
  } while (0)

}  // namespace bcs
