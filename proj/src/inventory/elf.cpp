#include "odm/inventory/elf.hpp"

#include <cstring>
#include <string_view>

#include "odm/errors.hpp"

namespace odm::inventory {

namespace {

constexpr std::uint32_t kShtProgbits = 1;
constexpr std::uint64_t kShfWrite = 0x1;
constexpr std::uint64_t kShfAlloc = 0x2;
constexpr std::uint64_t kShfExec = 0x4;

std::uint16_t rd16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t rd32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint64_t rd64(const std::uint8_t* p) {
  return static_cast<std::uint64_t>(rd32(p)) | (static_cast<std::uint64_t>(rd32(p + 4)) << 32);
}

struct Section {
  std::string_view name;
  std::uint32_t type = 0;
  std::uint64_t flags = 0;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
};

}  // namespace

std::vector<std::uint8_t> rodata_section(std::span<const std::uint8_t> elf) {
  if (elf.size() < 4 || elf[0] != 0x7f || elf[1] != 'E' || elf[2] != 'L' || elf[3] != 'F') {
    throw NotAnElf("bad magic");
  }
  if (elf.size() < 52) throw MissingRodata("truncated ELF header");
  const std::uint8_t elf_class = elf[4];  // 1 = 32-bit, 2 = 64-bit
  const std::uint8_t elf_data = elf[5];   // 1 = little-endian
  if (elf_data != 1 || (elf_class != 1 && elf_class != 2)) {
    throw MissingRodata("unsupported ELF class or byte order");
  }
  const bool is64 = elf_class == 2;
  if (is64 && elf.size() < 64) throw MissingRodata("truncated ELF header");

  const std::uint64_t shoff = is64 ? rd64(elf.data() + 40) : rd32(elf.data() + 32);
  const std::uint16_t shentsize = rd16(elf.data() + (is64 ? 58 : 46));
  const std::uint16_t shnum = rd16(elf.data() + (is64 ? 60 : 48));
  const std::uint16_t shstrndx = rd16(elf.data() + (is64 ? 62 : 50));
  const std::uint16_t min_entsize = is64 ? 64 : 40;
  if (shoff == 0 || shnum == 0 || shentsize < min_entsize || shstrndx >= shnum) {
    throw MissingRodata("no usable section table");
  }
  if (shoff + static_cast<std::uint64_t>(shnum) * shentsize > elf.size()) {
    throw MissingRodata("section table outside image");
  }

  auto read_section = [&](std::uint16_t idx) {
    const std::uint8_t* sh = elf.data() + shoff + static_cast<std::uint64_t>(idx) * shentsize;
    Section s;
    if (is64) {
      s.type = rd32(sh + 4);
      s.flags = rd64(sh + 8);
      s.offset = rd64(sh + 24);
      s.size = rd64(sh + 32);
    } else {
      s.type = rd32(sh + 4);
      s.flags = rd32(sh + 8);
      s.offset = rd32(sh + 16);
      s.size = rd32(sh + 20);
    }
    return std::pair<std::uint32_t, Section>(rd32(sh), s);
  };

  const auto [_, strtab] = read_section(shstrndx);
  if (strtab.offset + strtab.size > elf.size()) throw MissingRodata("bad string table");
  const char* names = reinterpret_cast<const char*>(elf.data() + strtab.offset);

  auto section_name = [&](std::uint32_t name_off) -> std::string_view {
    if (name_off >= strtab.size) return {};
    const char* start = names + name_off;
    const std::size_t max_len = strtab.size - name_off;
    const std::size_t len = strnlen(start, max_len);
    return std::string_view(start, len);
  };

  std::vector<std::uint8_t> out;
  auto append = [&](const Section& s) {
    if (s.offset + s.size <= elf.size() && s.size > 0) {
      out.insert(out.end(), elf.data() + s.offset, elf.data() + s.offset + s.size);
    }
  };

  // Prefer sections literally named .rodata (incl. .rodata.str1.1 style
  // splits); fall back to any allocated, non-writable, non-executable
  // PROGBITS section.
  bool found_named = false;
  for (std::uint16_t i = 0; i < shnum; ++i) {
    const auto [name_off, s] = read_section(i);
    const auto name = section_name(name_off);
    if (s.type == kShtProgbits &&
        (name == ".rodata" || name.substr(0, 8) == ".rodata.")) {
      append(s);
      found_named = true;
    }
  }
  if (!found_named) {
    for (std::uint16_t i = 0; i < shnum; ++i) {
      const auto [name_off, s] = read_section(i);
      if (s.type == kShtProgbits && (s.flags & kShfAlloc) && !(s.flags & kShfWrite) &&
          !(s.flags & kShfExec)) {
        append(s);
      }
    }
  }
  if (out.empty()) throw MissingRodata("no read-only data section");
  return out;
}

std::vector<std::uint8_t> build_elf_with_rodata(const std::vector<std::uint8_t>& rodata) {
  const std::string shstrtab = std::string("\0.rodata\0.shstrtab\0", 19);
  const std::uint64_t rodata_off = 64;
  const std::uint64_t strtab_off = rodata_off + rodata.size();
  std::uint64_t shoff = strtab_off + shstrtab.size();
  shoff = (shoff + 7) & ~7ull;

  std::vector<std::uint8_t> elf(shoff + 3 * 64, 0);
  auto w16 = [&](std::size_t at, std::uint16_t v) {
    elf[at] = static_cast<std::uint8_t>(v & 0xff);
    elf[at + 1] = static_cast<std::uint8_t>(v >> 8);
  };
  auto w32 = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) elf[at + i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
  };
  auto w64 = [&](std::size_t at, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) elf[at + i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
  };

  elf[0] = 0x7f;
  elf[1] = 'E';
  elf[2] = 'L';
  elf[3] = 'F';
  elf[4] = 2;  // ELFCLASS64
  elf[5] = 1;  // little-endian
  elf[6] = 1;  // EV_CURRENT
  w16(16, 3);    // ET_DYN
  w16(18, 183);  // EM_AARCH64
  w32(20, 1);    // e_version
  w64(40, shoff);
  w16(52, 64);  // e_ehsize
  w16(58, 64);  // e_shentsize
  w16(60, 3);   // e_shnum
  w16(62, 2);   // e_shstrndx

  std::memcpy(elf.data() + rodata_off, rodata.data(), rodata.size());
  std::memcpy(elf.data() + strtab_off, shstrtab.data(), shstrtab.size());

  // Section 0 stays null. Section 1: .rodata. Section 2: .shstrtab.
  std::size_t sh = shoff + 64;
  w32(sh + 0, 1);   // name offset of ".rodata"
  w32(sh + 4, kShtProgbits);
  w64(sh + 8, kShfAlloc);
  w64(sh + 24, rodata_off);
  w64(sh + 32, rodata.size());
  w64(sh + 48, 1);  // addralign

  sh = shoff + 128;
  w32(sh + 0, 9);  // name offset of ".shstrtab"
  w32(sh + 4, 3);  // SHT_STRTAB
  w64(sh + 24, strtab_off);
  w64(sh + 32, shstrtab.size());
  w64(sh + 48, 1);
  return elf;
}

}  // namespace odm::inventory
