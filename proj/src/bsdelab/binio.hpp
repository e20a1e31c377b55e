#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace bsdelab {

// Little-endian binary artifact IO. Arrays of 64-bit reals are written
// bit-exactly so a stored run can be reloaded and compared byte for byte.

class BinWriter {
 public:
  explicit BinWriter(const std::filesystem::path& file);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);               // u32 length + bytes
  void f64_array(std::span<const double> v);    // raw payload, no length
  void u32_array(std::span<const std::uint32_t> v);
  void u8_array(std::span<const std::uint8_t> v);

 private:
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::filesystem::path& file);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  void f64_array(std::span<double> v);
  void u32_array(std::span<std::uint32_t> v);
  void u8_array(std::span<std::uint8_t> v);

 private:
  std::ifstream in_;
};

// FNV-1a 64-bit content hash, used for the run MANIFEST integrity records.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& file);

}  // namespace bsdelab
