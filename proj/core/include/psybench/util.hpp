#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace psybench {

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// 64-bit FNV-1a. Stable across platforms.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Unlike std::uniform_int_distribution the result
/// sequence is identical across standard library implementations.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

/// Uniform real in [0, 1) built from the top 53 bits of one draw.
double uniform_unit(Rng& rng);

/// Shortest round-trip decimal representation, locale independent.
std::string format_number(double v);

/// Fixed-point with `decimals` digits, locale independent.
std::string format_fixed(double v, int decimals);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string to_lower(std::string_view s);

}  // namespace psybench
