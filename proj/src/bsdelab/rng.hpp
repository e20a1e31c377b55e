#pragma once

#include <array>
#include <cstdint>

namespace bsdelab {

// Philox4x32-10 counter-based generator. Stateless: every (seed, stream,
// counter) triple maps to the same 128 output bits no matter which thread
// evaluates it, which is what makes path simulation reproducible under any
// parallel layout. Streams are used as per-path substream ids.
std::array<std::uint32_t, 4> philox4x32(std::uint64_t seed,
                                        std::uint64_t stream,
                                        std::uint64_t counter);

// Maps 64 random bits to a uniform in the open interval (0,1).
double uniform_from_bits(std::uint64_t bits);

// Inverse standard normal CDF (Wichura's AS 241 double-precision rational
// approximation, relative error below 1e-15 away from the extreme tails).
double inverse_normal_cdf(double u);

// n-th standard normal of substream (seed, stream). Two consecutive draws
// share one Philox block.
double normal_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t n);

// n-th uniform(0,1) of substream (seed, stream).
double uniform_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t n);

// n-th raw 64-bit word of substream (seed, stream).
std::uint64_t bits_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t n);

}  // namespace bsdelab
