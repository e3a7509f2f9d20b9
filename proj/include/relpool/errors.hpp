// Copyright 2026 The relpool authors
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relpool {

// Base class for all library errors. The CLI maps IoError to exit code 2
// (usage/IO) and every other Error to exit code 1 (domain error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A malformed input line or conjunct. Carries the 1-based position.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& reason)
      : Error("parse error at " + std::to_string(position) + ": " + reason),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownPreposition : public Error {
 public:
  explicit UnknownPreposition(const std::string& preposition)
      : Error("unknown preposition '" + preposition + "'"),
        preposition_(preposition) {}
  const std::string& preposition() const { return preposition_; }

 private:
  std::string preposition_;
};

class MissingCategory : public Error {
 public:
  MissingCategory(const std::string& scene_id, const std::string& category)
      : Error("scene '" + scene_id + "' has no detection of category '" +
              category + "'") {}
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace relpool
