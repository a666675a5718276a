// Copyright 2026 The protospoof Authors
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

#include <string_view>

namespace protospoof {

/// Reserved label of genuine speech. Every other label is a spoof class.
inline constexpr std::string_view kBonafide = "bonafide";

/// Pooled spoof label used by binary episodes.
inline constexpr std::string_view kFake = "fake";

inline bool is_spoof_label(std::string_view label) { return label != kBonafide; }

}  // namespace protospoof
