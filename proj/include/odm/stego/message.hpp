#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace odm::stego {

// Fixed-length bit secret. When derived from text, bits hold the 8-bit
// character codes (MSB first) truncated or zero-padded to length L.
struct SecretMessage {
  std::vector<std::uint8_t> bits;  // values 0/1, length L
  std::optional<std::string> source_string;
  bool truncated = false;  // set when the text did not fit in L bits

  std::size_t length() const { return bits.size(); }
};

// Throws EmptySecret on empty text; requires L >= 8.
SecretMessage string_to_bits(const std::string& text, int length_bits);

// Inverse of string_to_bits: recovers the text prefix that fit (padding
// zero bytes are dropped).
std::string bits_to_string(const SecretMessage& message);

// Uniform random bits, for generator training.
SecretMessage random_message(int length_bits, std::uint64_t draw1, std::uint64_t draw2);

}  // namespace odm::stego
