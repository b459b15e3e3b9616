// Copyright 2026 The subflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <string>

namespace subflow {

// "key=value" lines; blank lines and lines starting with '#' are skipped.
// Duplicate keys and lines without '=' are errors naming the line.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& label);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

std::size_t parse_size(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);

}  // namespace subflow
