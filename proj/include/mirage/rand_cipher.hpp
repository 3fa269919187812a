#pragma once

// 64-bit block ciphers used as set-index derivation functions.
//
// PRESENT-80 (31 rounds) and PRINCE-128 (12-round core with whitening) are
// provided as keyed objects with precomputed schedules. Index derivation takes
// the low index bits of two ciphertexts under distinct keys. A second
// derivation path reproduces a known porting fault in which the binary-digit
// string of the address was parsed as hexadecimal, so that only the low 16
// address bits reach the cipher.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mirage/rng.hpp"

namespace mirage::cipher {

enum class Algorithm { Present80, Prince128 };

std::string_view to_string(Algorithm algorithm);
/// Accepts "present", "present80", "prince", "prince128" (case-insensitive).
Algorithm parse_algorithm(std::string_view name);

/// Key material stored as a 128-bit value split in two words. PRESENT-80 uses
/// the low 16 bits of `hi` and all of `lo`; PRINCE-128 uses hi = k0, lo = k1.
struct BlockCipherKey {
  Algorithm algorithm = Algorithm::Present80;
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  static BlockCipherKey present80(std::uint16_t hi, std::uint64_t lo);
  static BlockCipherKey prince128(std::uint64_t k0, std::uint64_t k1);
  /// 20 hex digits for PRESENT-80, 32 for PRINCE-128. Throws ConfigError.
  static BlockCipherKey from_hex(Algorithm algorithm, std::string_view hex);
  static BlockCipherKey random(Algorithm algorithm, Rng& rng);

  /// Number of key bits for the algorithm (80 or 128).
  unsigned width() const;
  std::string to_hex() const;
  /// Throws ConfigError if the key has bits set above its width.
  void validate() const;

  friend bool operator==(const BlockCipherKey&, const BlockCipherKey&) = default;
};

struct KeyPair {
  BlockCipherKey k1;
  BlockCipherKey k2;

  /// Both keys well-formed, same algorithm, and distinct.
  void validate() const;
  static KeyPair random(Algorithm algorithm, Rng& rng);
  /// Fixed, distinct default keys for reproducible experiments.
  static KeyPair defaults(Algorithm algorithm);
};

struct SiblingIndices {
  std::uint32_t i1 = 0;
  std::uint32_t i2 = 0;
  friend bool operator==(const SiblingIndices&, const SiblingIndices&) = default;
};

/// A keyed block cipher with its round-key schedule expanded once.
class BlockCipher {
 public:
  explicit BlockCipher(const BlockCipherKey& key);

  std::uint64_t encrypt(std::uint64_t block) const;
  std::uint64_t decrypt(std::uint64_t block) const;
  Algorithm algorithm() const { return algorithm_; }

 private:
  std::uint64_t present_encrypt(std::uint64_t block) const;
  std::uint64_t present_decrypt(std::uint64_t block) const;
  std::uint64_t prince_encrypt(std::uint64_t block) const;
  std::uint64_t prince_decrypt(std::uint64_t block) const;

  Algorithm algorithm_;
  // PRESENT: 32 round keys. PRINCE: [0] = k0, [1] = k0', [2] = k1.
  std::array<std::uint64_t, 32> round_keys_{};
};

std::uint64_t encrypt(std::uint64_t block, const BlockCipherKey& key);
std::uint64_t decrypt(std::uint64_t block, const BlockCipherKey& key);

enum class IndexMode { Correct, Buggy };

/// The faulty conversion: the 64-character binary expansion of `line_addr`
/// read as base-16 digits, truncated to the low 64 bits. Bit j of the
/// address becomes nibble j of the result.
std::uint64_t buggy_block(std::uint64_t line_addr);

/// Keyed sibling-index derivation for one cache. Pure and thread-safe.
class IndexFunction {
 public:
  IndexFunction(const KeyPair& keys, unsigned index_bits, IndexMode mode = IndexMode::Correct);

  SiblingIndices operator()(std::uint64_t line_addr) const;
  unsigned index_bits() const { return index_bits_; }
  IndexMode mode() const { return mode_; }

 private:
  BlockCipher c1_;
  BlockCipher c2_;
  unsigned index_bits_;
  std::uint64_t mask_;
  IndexMode mode_;
};

/// i1/i2 = low `index_bits` bits of the two ciphertexts of `line_addr`.
/// Requires 1 <= index_bits <= 30.
SiblingIndices derive_sibling_indices(std::uint64_t line_addr, const KeyPair& keys,
                                      unsigned index_bits);
/// Same, but through the faulty conversion; depends only on line_addr mod 2^16.
SiblingIndices derive_sibling_indices_buggy(std::uint64_t line_addr, const KeyPair& keys,
                                            unsigned index_bits);

struct UniformityReport {
  std::uint64_t samples = 0;
  std::uint64_t bins = 0;
  double chi_square_skew1 = 0.0;
  double chi_square_skew2 = 0.0;

  /// bins + 4 * sqrt(2 * bins): four standard deviations above the mean of a
  /// chi-square variable with `bins` degrees of freedom.
  double upper_bound() const;
  double lower_bound() const;
};

/// Tallies i1/i2 over `sample_count` distinct pseudo-random line addresses
/// and returns Pearson's statistic against the uniform expectation per skew.
UniformityReport uniformity_report(const KeyPair& keys, unsigned index_bits,
                                   std::uint64_t sample_count, std::uint64_t seed,
                                   IndexMode mode = IndexMode::Correct);

/// One line of a vector file: `algorithm,key_hex,plaintext_hex,ciphertext_hex`.
struct TestVector {
  BlockCipherKey key;
  std::uint64_t plaintext = 0;
  std::uint64_t ciphertext = 0;
};

/// Blank lines and lines starting with '#' are skipped. Throws ConfigError
/// with the offending line number on malformed input.
std::vector<TestVector> parse_test_vectors(std::istream& in);

struct VectorCheck {
  TestVector vector;
  std::uint64_t encrypted = 0;
  std::uint64_t decrypted = 0;
  bool passed() const { return encrypted == vector.ciphertext && decrypted == vector.plaintext; }
};

std::vector<VectorCheck> check_test_vectors(const std::vector<TestVector>& vectors);

std::uint64_t parse_hex_u64(std::string_view hex);
std::string to_hex_u64(std::uint64_t value);

}  // namespace mirage::cipher
