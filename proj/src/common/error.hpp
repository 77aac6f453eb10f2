// Copyright 2026 The clipforensics Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <fmt/format.h>

namespace cfx {

// Values double as process exit codes for the CLI.
enum class ErrorKind : int {
  internal = 1,
  config = 2,
  data = 3,
  backend = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <typename... Args>
[[noreturn]] void config_error(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(ErrorKind::config, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void data_error(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(ErrorKind::data, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void backend_error(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(ErrorKind::backend, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void internal_error(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(ErrorKind::internal, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace cfx
