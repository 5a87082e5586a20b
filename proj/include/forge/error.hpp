/* Copyright 2026 The Forge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef FORGE_ERROR_HPP_
#define FORGE_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace forge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or configuration. The CLI maps this family to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class AttackError : public Error {
 public:
  AttackError(const std::string& what, std::size_t sample)
      : Error(what + " (sample " + std::to_string(sample) + ")"), sample_(sample) {}
  std::size_t sample() const { return sample_; }

 private:
  std::size_t sample_;
};

// A linear-regime experiment whose data violates the margin assumption.
class TheoremScopeError : public Error {
 public:
  using Error::Error;
};

class DegeneratePerturbationError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace forge

#endif  // FORGE_ERROR_HPP_
