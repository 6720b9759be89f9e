#include "odm/stego/message.hpp"

#include "odm/errors.hpp"
#include "odm/util/rng.hpp"

namespace odm::stego {

SecretMessage string_to_bits(const std::string& text, int length_bits) {
  if (text.empty()) throw EmptySecret("target string is empty");
  if (length_bits < 8) throw EmptySecret("message length must be at least 8 bits");
  SecretMessage msg;
  msg.source_string = text;
  msg.bits.assign(static_cast<std::size_t>(length_bits), 0);
  const std::size_t fit_chars = static_cast<std::size_t>(length_bits) / 8;
  msg.truncated = text.size() * 8 > static_cast<std::size_t>(length_bits);
  for (std::size_t i = 0; i < text.size() && i < fit_chars; ++i) {
    const auto byte = static_cast<std::uint8_t>(text[i]);
    for (int b = 0; b < 8; ++b) {
      msg.bits[i * 8 + static_cast<std::size_t>(b)] =
          static_cast<std::uint8_t>((byte >> (7 - b)) & 1);
    }
  }
  return msg;
}

std::string bits_to_string(const SecretMessage& message) {
  std::string out;
  for (std::size_t i = 0; i + 8 <= message.bits.size(); i += 8) {
    std::uint8_t byte = 0;
    for (int b = 0; b < 8; ++b) {
      byte = static_cast<std::uint8_t>((byte << 1) | message.bits[i + static_cast<std::size_t>(b)]);
    }
    if (byte == 0) break;  // zero padding
    out.push_back(static_cast<char>(byte));
  }
  return out;
}

SecretMessage random_message(int length_bits, std::uint64_t draw1, std::uint64_t draw2) {
  SecretMessage msg;
  msg.bits.resize(static_cast<std::size_t>(length_bits));
  auto gen = rng::fork(draw1, draw2);
  for (auto& b : msg.bits) b = static_cast<std::uint8_t>(gen() & 1);
  return msg;
}

}  // namespace odm::stego
