// Copyright 2026 The Trainsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRAINSIM_ERRORS_HPP_
#define TRAINSIM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace trainsim {

// Error taxonomy shared by all modules. Every failure mode surfaces as one
// of these so callers (and the CLI exit-code mapping) can dispatch on type.

class InvalidArgumentError : public std::invalid_argument {
 public:
  explicit InvalidArgumentError(const std::string& what)
      : std::invalid_argument(what) {}
};

class NotFoundError : public std::runtime_error {
 public:
  explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

// A plan or request violates a structural constraint, e.g. column-splitting
// a table whose optimizer updates whole rows.
class ConstraintViolationError : public std::runtime_error {
 public:
  explicit ConstraintViolationError(const std::string& what)
      : std::runtime_error(what) {}
};

class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what)
      : std::runtime_error(what) {}
};

class InvalidGraphError : public std::runtime_error {
 public:
  explicit InvalidGraphError(const std::string& what)
      : std::runtime_error(what) {}
};

class MissingInputError : public std::runtime_error {
 public:
  explicit MissingInputError(const std::string& what)
      : std::runtime_error(what) {}
};

class UnsupportedError : public std::runtime_error {
 public:
  explicit UnsupportedError(const std::string& what)
      : std::runtime_error(what) {}
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what)
      : std::runtime_error(what) {}
};

// Numeric blow-up in an iterative computation; carries the step at which the
// first non-finite value appeared.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}
  long long step() const { return step_; }

 private:
  long long step_;
};

}  // namespace trainsim

#endif  // TRAINSIM_ERRORS_HPP_
