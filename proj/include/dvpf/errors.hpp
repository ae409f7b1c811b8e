// Copyright 2026 The DVPF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef DVPF_ERRORS_HPP_
#define DVPF_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dvpf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent inputs: bad distributions, dimension mismatches,
// out-of-range labels.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Mathematical domain violation, e.g. KL divergence with p_i > 0 = q_i.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Problem too large for the exact solver.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Non-finite activation or loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace dvpf

#endif  // DVPF_ERRORS_HPP_
