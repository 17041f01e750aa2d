#pragma once

#include <stdexcept>
#include <string>

namespace vpe {

// Base of every error the library throws. A protocol "reject" is a verdict,
// never an exception.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ModulusMismatch : Error {
  ModulusMismatch() : Error("field elements belong to different moduli") {}
};

struct NotInvertible : Error {
  NotInvertible() : Error("not invertible: zero has no multiplicative inverse") {}
};

struct DigestMismatch : Error {
  using Error::Error;
};

// Connection closed or I/O failure while a session was in progress.
struct TransportError : Error {
  using Error::Error;
};

// The peer sent something the protocol does not allow at this point.
struct ProtocolError : Error {
  using Error::Error;
};

}  // namespace vpe
