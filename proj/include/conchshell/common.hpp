/* Copyright 2026 The ConchShell Authors. All Rights Reserved.

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

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace conchshell {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ill-formed or missing inputs: unreadable files, empty corpora, shape
// mismatches between caller-supplied objects. CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf reached a place that requires finite values. CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void strf_cat(std::ostringstream&) {}
template <typename A, typename... Rest>
void strf_cat(std::ostringstream& os, const A& a, Rest&&... rest) {
  os << a;
  strf_cat(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

// Small stream-based formatter; keeps error messages one-liners.
template <typename... Args>
std::string strf(Args&&... args) {
  std::ostringstream os;
  detail::strf_cat(os, std::forward<Args>(args)...);
  return os.str();
}

}  // namespace conchshell
