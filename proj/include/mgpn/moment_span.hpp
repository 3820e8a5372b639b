// Copyright 2026 The MGPN Authors.
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

namespace mgpn {

/// A temporal segment in seconds, 0 <= start_s < end_s.
struct MomentSpan {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  friend bool operator==(const MomentSpan&, const MomentSpan&) = default;
};

}  // namespace mgpn
