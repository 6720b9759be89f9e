#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace odm::inventory {

// Extracts the .rodata section of a little-endian ELF32/ELF64 image.
// Throws NotAnElf on a magic mismatch and MissingRodata when the image has no
// usable section table or no .rodata section (stripped/unusual binaries).
std::vector<std::uint8_t> rodata_section(std::span<const std::uint8_t> elf);

// Assembles a minimal shared-object-shaped ELF64 whose .rodata holds exactly
// the given bytes; used to plant framework identifier strings in fixtures.
std::vector<std::uint8_t> build_elf_with_rodata(const std::vector<std::uint8_t>& rodata);

}  // namespace odm::inventory
