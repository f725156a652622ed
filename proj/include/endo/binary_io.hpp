#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>

// Little-endian scalar encoding independent of host byte order.
namespace endo::le {

template <typename U>
void put(std::ostream& os, U bits) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, sizeof(U));
}

template <typename U>
U get(std::istream& is) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw std::runtime_error("unexpected end of file");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return bits;
}

inline void put_u32(std::ostream& os, std::uint32_t v) { put<std::uint32_t>(os, v); }
inline void put_f32(std::ostream& os, float v) { put<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(std::istream& is) { return get<std::uint32_t>(is); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get<std::uint32_t>(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get<std::uint64_t>(is)); }

}  // namespace endo::le
