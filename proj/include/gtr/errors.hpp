#pragma once

#include <stdexcept>
#include <string>

namespace gtr {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SlotNotFound : public Error {
 public:
  using Error::Error;
};

class FileNotIndexed : public Error {
 public:
  using Error::Error;
};

class SequenceTooLong : public Error {
 public:
  using Error::Error;
};

class EmptyNegatives : public Error {
 public:
  using Error::Error;
};

class EmptyCandidateUniverse : public Error {
 public:
  using Error::Error;
};

class EmptyPool : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace gtr
