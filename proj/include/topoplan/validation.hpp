/* Copyright 2026 The Topoplan Authors.

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

#ifndef TOPOPLAN_VALIDATION_HPP_
#define TOPOPLAN_VALIDATION_HPP_

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace topoplan {

// Thrown on contract violations (indivisible extents, incompatible layouts,
// malformed documents). Input validation goes through ValidationReport
// instead so callers can surface every problem at once.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct Issue {
  enum class Severity { kError, kWarning };
  Severity severity;
  std::string code;     // stable machine-readable tag, e.g. "cycle"
  std::string message;  // human-readable, names the offending element
};

class ValidationReport {
 public:
  bool ok() const {
    for (const auto& issue : issues_) {
      if (issue.severity == Issue::Severity::kError) return false;
    }
    return true;
  }

  bool empty() const { return issues_.empty(); }

  void add_error(std::string code, std::string message) {
    issues_.push_back(
        {Issue::Severity::kError, std::move(code), std::move(message)});
  }

  void add_warning(std::string code, std::string message) {
    issues_.push_back(
        {Issue::Severity::kWarning, std::move(code), std::move(message)});
  }

  bool has(const std::string& code) const {
    for (const auto& issue : issues_) {
      if (issue.code == code) return true;
    }
    return false;
  }

  const std::vector<Issue>& issues() const { return issues_; }

  std::string to_string() const {
    std::ostringstream out;
    for (const auto& issue : issues_) {
      out << (issue.severity == Issue::Severity::kError ? "error" : "warning")
          << " [" << issue.code << "] " << issue.message << "\n";
    }
    return out.str();
  }

 private:
  std::vector<Issue> issues_;
};

}  // namespace topoplan

#endif  // TOPOPLAN_VALIDATION_HPP_
