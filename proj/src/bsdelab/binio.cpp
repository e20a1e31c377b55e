#include "bsdelab/binio.hpp"

#include <bit>
#include <cstring>

#include "bsdelab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact format assumes a little-endian host");

namespace bsdelab {

BinWriter::BinWriter(const std::filesystem::path& file)
    : out_(file, std::ios::binary | std::ios::trunc) {
  if (!out_) throw DataError("cannot open for writing: " + file.string());
}

void BinWriter::u8(std::uint8_t v) {
  out_.write(reinterpret_cast<const char*>(&v), 1);
}
void BinWriter::u32(std::uint32_t v) {
  out_.write(reinterpret_cast<const char*>(&v), 4);
}
void BinWriter::u64(std::uint64_t v) {
  out_.write(reinterpret_cast<const char*>(&v), 8);
}
void BinWriter::f64(double v) {
  out_.write(reinterpret_cast<const char*>(&v), 8);
}
void BinWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void BinWriter::f64_array(std::span<const double> v) {
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}
void BinWriter::u32_array(std::span<const std::uint32_t> v) {
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(std::uint32_t)));
}
void BinWriter::u8_array(std::span<const std::uint8_t> v) {
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size()));
}

BinReader::BinReader(const std::filesystem::path& file)
    : in_(file, std::ios::binary) {
  if (!in_) throw DataError("cannot open for reading: " + file.string());
}

std::uint8_t BinReader::u8() {
  std::uint8_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), 1);
  if (!in_) throw DataError("truncated artifact");
  return v;
}
std::uint32_t BinReader::u32() {
  std::uint32_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), 4);
  if (!in_) throw DataError("truncated artifact");
  return v;
}
std::uint64_t BinReader::u64() {
  std::uint64_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), 8);
  if (!in_) throw DataError("truncated artifact");
  return v;
}
double BinReader::f64() {
  double v = 0;
  in_.read(reinterpret_cast<char*>(&v), 8);
  if (!in_) throw DataError("truncated artifact");
  return v;
}
std::string BinReader::str() {
  const std::uint32_t n = u32();
  std::string s(n, '\0');
  in_.read(s.data(), n);
  if (!in_) throw DataError("truncated artifact");
  return s;
}
void BinReader::f64_array(std::span<double> v) {
  in_.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in_) throw DataError("truncated artifact");
}
void BinReader::u32_array(std::span<std::uint32_t> v) {
  in_.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(std::uint32_t)));
  if (!in_) throw DataError("truncated artifact");
}
void BinReader::u8_array(std::span<std::uint8_t> v) {
  in_.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size()));
  if (!in_) throw DataError("truncated artifact");
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file: " + file.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace bsdelab
