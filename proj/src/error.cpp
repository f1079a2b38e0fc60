// Copyright 2026 The labelfill Authors.
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

#include "labelfill/error.hpp"

namespace labelfill {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Hypothesis: return "hypothesis";
    case ErrorKind::Feasibility: return "feasibility";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Data: return "data";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Configuration:
    case ErrorKind::Hypothesis:
    case ErrorKind::Feasibility:
      return 2;
    case ErrorKind::Dimension:
    case ErrorKind::Parse:
    case ErrorKind::Data:
    case ErrorKind::Integrity:
      return 3;
    case ErrorKind::Domain:
    case ErrorKind::Numeric:
      return 4;
    case ErrorKind::Io:
      return 5;
  }
  return 1;
}

}  // namespace labelfill
