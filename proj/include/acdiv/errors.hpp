/*
   Copyright 2026 The acdiv Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace acdiv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter violates a model or problem constraint.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// An exponential factor would overflow a double.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature did not reach the requested tolerance.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double achieved_error)
        : Error(what), achieved_error_(achieved_error) {}

    double achieved_error() const noexcept { return achieved_error_; }

private:
    double achieved_error_;
};

/// A denominator in a closed-form expression vanished.
class DegenerateInput : public Error {
public:
    DegenerateInput(const std::string& what, double at)
        : Error(what), at_(at) {}

    /// The argument (usually the threshold b) at which the degeneracy occurred.
    double at() const noexcept { return at_; }

private:
    double at_;
};

/// Root bracketing or refinement failed.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace acdiv
