// Copyright 2026 The Garden Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GARDEN_BYTES_H_
#define GARDEN_BYTES_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace garden {

// Arbitrary octets. std::string is used as the container because HTTP code
// constantly compares against literals; nothing here assumes text.
using Bytes = std::string;
using BytesView = std::string_view;

// Upper bound on the total size of a request stream.
inline constexpr size_t kMaxStreamBytes = 64 * 1024;

// Ordered sequence of byte strings sent with inter-element read timeouts.
// Never empty; individual elements may be.
class RequestStream {
 public:
  RequestStream() : elements_(1) {}
  explicit RequestStream(std::vector<Bytes> elements);
  RequestStream(std::initializer_list<Bytes> elements)
      : RequestStream(std::vector<Bytes>(elements)) {}

  const std::vector<Bytes>& elements() const { return elements_; }
  size_t size() const { return elements_.size(); }
  const Bytes& operator[](size_t i) const { return elements_[i]; }

  size_t TotalBytes() const;
  Bytes Concatenated() const;

  // Enforces the size cap by cutting bytes off the tail. Returns true if
  // anything was removed.
  bool TruncateTo(size_t max_bytes);

  friend bool operator==(const RequestStream&, const RequestStream&) = default;

 private:
  std::vector<Bytes> elements_;
};

// Backslash escapes used by the REPL and by human-readable dumps:
// \r \n \0 \t \\ \xNN. Everything else outside printable ASCII, and the
// double quote, is rendered as \xNN.
std::string EscapeBytes(BytesView bytes);
std::optional<Bytes> UnescapeBytes(std::string_view text);

std::string Base64Encode(BytesView bytes);
std::optional<Bytes> Base64Decode(std::string_view text);

// 64-bit FNV-1a. Stable across platforms; used for signatures and digests.
uint64_t Fnv1a64(BytesView bytes, uint64_t seed = 0xcbf29ce484222325ULL);
std::string HexDigest(uint64_t value);

bool EqualsIgnoreCase(BytesView a, BytesView b);
Bytes AsciiLower(BytesView in);

}  // namespace garden

#endif  // GARDEN_BYTES_H_
