// Copyright 2026 The biofuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace biofuse {

// Base of every error the library raises. Subclasses map one-to-one onto
// the failure kinds callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments; the CLI maps this to exit code 1.
class ValidationError : public Error { using Error::Error; };

class ParseError : public Error { using Error::Error; };
class VersionError : public ParseError { using ParseError::ParseError; };

class WindowOutOfRange : public Error { using Error::Error; };
class DegenerateWindow : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };

class ShapeError : public Error { using Error::Error; };
class MiningError : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };

class IdentityError : public Error { using Error::Error; };
class CalibrationError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class EvalError : public Error { using Error::Error; };

}  // namespace biofuse
