#include "mirage/rand_cipher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <sstream>

#include "mirage/errors.hpp"

namespace mirage::cipher {

namespace {

constexpr std::array<std::uint8_t, 16> kPresentSbox = {0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD,
                                                       0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2};

constexpr std::array<std::uint8_t, 16> kPrinceSbox = {0xB, 0xF, 0x3, 0x2, 0xA, 0xC, 0x9, 0x1,
                                                      0x6, 0x7, 0x8, 0x0, 0xE, 0x5, 0xD, 0x4};

constexpr std::array<std::uint64_t, 12> kPrinceRc = {
    0x0000000000000000ULL, 0x13198a2e03707344ULL, 0xa4093822299f31d0ULL, 0x082efa98ec4e6c89ULL,
    0x452821e638d01377ULL, 0xbe5466cf34e90c6cULL, 0x7ef84f78fd955cb1ULL, 0x85840851f1ac43aaULL,
    0xc882d32f25323c54ULL, 0x64a51195e0e3610dULL, 0xd3b5a399ca0c2399ULL, 0xc0ac29b7c97c50ddULL};

constexpr std::uint64_t kPrinceAlpha = 0xc0ac29b7c97c50ddULL;

// PRINCE ShiftRows on nibbles, nibble 0 being the most significant.
constexpr std::array<int, 16> kShiftRows = {0, 5, 10, 15, 4, 9, 14, 3, 8, 13, 2, 7, 12, 1, 6, 11};

template <std::size_t N>
constexpr std::array<std::uint8_t, N> invert(const std::array<std::uint8_t, N>& p) {
  std::array<std::uint8_t, N> inv{};
  for (std::size_t i = 0; i < N; ++i) inv[p[i]] = static_cast<std::uint8_t>(i);
  return inv;
}

using NibbleTable = std::array<std::array<std::uint64_t, 16>, 16>;

std::uint64_t present_player_bitwise(std::uint64_t x, bool inverse) {
  std::uint64_t out = 0;
  for (int i = 0; i < 64; ++i) {
    const int p = (i == 63) ? 63 : (i * 16) % 63;
    if (!inverse)
      out |= ((x >> i) & 1ULL) << p;
    else
      out |= ((x >> p) & 1ULL) << i;
  }
  return out;
}

std::uint64_t prince_mprime_bitwise(std::uint64_t x) {
  constexpr std::array<int, 4> kBlock = {0, 1, 1, 0};
  std::uint64_t out = 0;
  for (int chunk = 0; chunk < 4; ++chunk) {
    const int shift = 48 - 16 * chunk;
    const auto in = static_cast<std::uint32_t>((x >> shift) & 0xFFFF);
    std::uint32_t res = 0;
    for (int j = 0; j < 16; ++j) {
      std::uint32_t acc = 0;
      for (int i = 0; i < 16; ++i) {
        if (i % 4 == j % 4 && j % 4 != (j / 4 + i / 4 + kBlock[chunk]) % 4)
          acc ^= (in >> (15 - i)) & 1U;
      }
      res |= acc << (15 - j);
    }
    out |= static_cast<std::uint64_t>(res) << shift;
  }
  return out;
}

std::uint64_t prince_shift_rows(std::uint64_t x, bool inverse) {
  std::uint64_t out = 0;
  for (int i = 0; i < 16; ++i) {
    if (!inverse)
      out |= ((x >> (60 - 4 * kShiftRows[i])) & 0xF) << (60 - 4 * i);
    else
      out |= ((x >> (60 - 4 * i)) & 0xF) << (60 - 4 * kShiftRows[i]);
  }
  return out;
}

// Every linear layer is tabulated per input nibble; the layer is the XOR of
// sixteen lookups. PRESENT's S-box is folded into its permutation table.
struct Tables {
  NibbleTable present_sp{};
  NibbleTable present_pinv{};
  std::array<std::uint8_t, 16> present_sinv{};
  std::array<std::uint8_t, 256> prince_s8{};
  std::array<std::uint8_t, 256> prince_sinv8{};
  NibbleTable prince_m{};
  NibbleTable prince_mprime{};
  NibbleTable prince_minv{};

  Tables() {
    present_sinv = invert(kPresentSbox);
    const auto prince_sinv = invert(kPrinceSbox);
    for (int pos = 0; pos < 16; ++pos) {
      for (std::uint64_t v = 0; v < 16; ++v) {
        const std::uint64_t in = v << (4 * pos);
        present_sp[pos][v] =
            present_player_bitwise(static_cast<std::uint64_t>(kPresentSbox[v]) << (4 * pos), false);
        present_pinv[pos][v] = present_player_bitwise(in, true);
        prince_mprime[pos][v] = prince_mprime_bitwise(in);
        prince_m[pos][v] = prince_shift_rows(prince_mprime_bitwise(in), false);
        prince_minv[pos][v] = prince_mprime_bitwise(prince_shift_rows(in, true));
      }
    }
    for (int b = 0; b < 256; ++b) {
      prince_s8[b] = static_cast<std::uint8_t>((kPrinceSbox[b >> 4] << 4) | kPrinceSbox[b & 0xF]);
      prince_sinv8[b] = static_cast<std::uint8_t>((prince_sinv[b >> 4] << 4) | prince_sinv[b & 0xF]);
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

inline std::uint64_t apply_nibbles(const NibbleTable& table, std::uint64_t x) {
  std::uint64_t out = 0;
  for (int pos = 0; pos < 16; ++pos) out ^= table[pos][(x >> (4 * pos)) & 0xF];
  return out;
}

inline std::uint64_t apply_bytes(const std::array<std::uint8_t, 256>& table, std::uint64_t x) {
  std::uint64_t out = 0;
  for (int b = 0; b < 8; ++b)
    out |= static_cast<std::uint64_t>(table[(x >> (8 * b)) & 0xFF]) << (8 * b);
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string_view strip_hex_prefix(std::string_view hex) {
  if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) hex.remove_prefix(2);
  return hex;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::uint64_t prince_core(std::uint64_t x, std::uint64_t k1) {
  const Tables& t = tables();
  x ^= k1 ^ kPrinceRc[0];
  for (int i = 1; i <= 5; ++i) {
    x = apply_bytes(t.prince_s8, x);
    x = apply_nibbles(t.prince_m, x);
    x ^= kPrinceRc[i] ^ k1;
  }
  x = apply_bytes(t.prince_s8, x);
  x = apply_nibbles(t.prince_mprime, x);
  x = apply_bytes(t.prince_sinv8, x);
  for (int i = 6; i <= 10; ++i) {
    x ^= k1 ^ kPrinceRc[i];
    x = apply_nibbles(t.prince_minv, x);
    x = apply_bytes(t.prince_sinv8, x);
  }
  return x ^ kPrinceRc[11] ^ k1;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  return algorithm == Algorithm::Present80 ? "PRESENT80" : "PRINCE128";
}

Algorithm parse_algorithm(std::string_view name) {
  std::string lower(trim(name));
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "present" || lower == "present80") return Algorithm::Present80;
  if (lower == "prince" || lower == "prince128") return Algorithm::Prince128;
  throw ConfigError("unknown cipher algorithm '" + std::string(name) + "'");
}

std::uint64_t parse_hex_u64(std::string_view hex) {
  hex = strip_hex_prefix(trim(hex));
  if (hex.empty() || hex.size() > 16) throw ConfigError("bad 64-bit hex value '" + std::string(hex) + "'");
  std::uint64_t v = 0;
  for (char c : hex) {
    const int d = hex_digit(c);
    if (d < 0) throw ConfigError("bad hex digit in '" + std::string(hex) + "'");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

std::string to_hex_u64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[i] = kDigits[value & 0xF];
  return out;
}

BlockCipherKey BlockCipherKey::present80(std::uint16_t hi, std::uint64_t lo) {
  return {Algorithm::Present80, hi, lo};
}

BlockCipherKey BlockCipherKey::prince128(std::uint64_t k0, std::uint64_t k1) {
  return {Algorithm::Prince128, k0, k1};
}

BlockCipherKey BlockCipherKey::from_hex(Algorithm algorithm, std::string_view hex) {
  hex = strip_hex_prefix(trim(hex));
  const std::size_t digits = algorithm == Algorithm::Present80 ? 20 : 32;
  if (hex.size() != digits)
    throw ConfigError(std::string(to_string(algorithm)) + " key needs " + std::to_string(digits) +
                      " hex digits, got " + std::to_string(hex.size()));
  const std::size_t split = hex.size() - 16;
  BlockCipherKey key{algorithm, parse_hex_u64(hex.substr(0, split)), parse_hex_u64(hex.substr(split))};
  key.validate();
  return key;
}

BlockCipherKey BlockCipherKey::random(Algorithm algorithm, Rng& rng) {
  const std::uint64_t hi = rng.next_u64();
  const std::uint64_t lo = rng.next_u64();
  return algorithm == Algorithm::Present80 ? present80(static_cast<std::uint16_t>(hi), lo)
                                           : prince128(hi, lo);
}

unsigned BlockCipherKey::width() const { return algorithm == Algorithm::Present80 ? 80 : 128; }

std::string BlockCipherKey::to_hex() const {
  const std::string high = to_hex_u64(hi);
  return (algorithm == Algorithm::Present80 ? high.substr(12) : high) + to_hex_u64(lo);
}

void BlockCipherKey::validate() const {
  if (algorithm == Algorithm::Present80 && (hi >> 16) != 0)
    throw ConfigError("PRESENT80 key wider than 80 bits");
}

void KeyPair::validate() const {
  k1.validate();
  k2.validate();
  if (k1.algorithm != k2.algorithm) throw ConfigError("key pair mixes cipher algorithms");
  if (k1 == k2) throw ConfigError("key pair must hold two distinct keys");
}

KeyPair KeyPair::random(Algorithm algorithm, Rng& rng) {
  KeyPair pair{BlockCipherKey::random(algorithm, rng), BlockCipherKey::random(algorithm, rng)};
  while (pair.k2 == pair.k1) pair.k2 = BlockCipherKey::random(algorithm, rng);
  return pair;
}

KeyPair KeyPair::defaults(Algorithm algorithm) {
  if (algorithm == Algorithm::Present80)
    return {BlockCipherKey::present80(0x0123, 0x456789ABCDEF0123ULL),
            BlockCipherKey::present80(0xFEDC, 0xBA9876543210FEDCULL)};
  return {BlockCipherKey::prince128(0x0123456789ABCDEFULL, 0xFEDCBA9876543210ULL),
          BlockCipherKey::prince128(0x0F1E2D3C4B5A6978ULL, 0x8796A5B4C3D2E1F0ULL)};
}

BlockCipher::BlockCipher(const BlockCipherKey& key) : algorithm_(key.algorithm) {
  key.validate();
  if (algorithm_ == Algorithm::Present80) {
    std::uint64_t hi = key.hi;  // register bits 79..64
    std::uint64_t lo = key.lo;  // register bits 63..0
    for (unsigned round = 1; round <= 32; ++round) {
      round_keys_[round - 1] = (hi << 48) | (lo >> 16);
      if (round == 32) break;
      // Rotate the 80-bit register left by 61.
      const std::uint64_t rot_hi = (lo >> 3) & 0xFFFF;
      const std::uint64_t rot_lo = ((lo & 0x7) << 61) | (hi << 45) | (lo >> 19);
      hi = (static_cast<std::uint64_t>(kPresentSbox[rot_hi >> 12]) << 12) | (rot_hi & 0xFFF);
      lo = rot_lo ^ (static_cast<std::uint64_t>(round) << 15);
    }
  } else {
    const std::uint64_t k0 = key.hi;
    round_keys_[0] = k0;
    round_keys_[1] = ((k0 >> 1) | (k0 << 63)) ^ (k0 >> 63);
    round_keys_[2] = key.lo;
  }
}

std::uint64_t BlockCipher::encrypt(std::uint64_t block) const {
  return algorithm_ == Algorithm::Present80 ? present_encrypt(block) : prince_encrypt(block);
}

std::uint64_t BlockCipher::decrypt(std::uint64_t block) const {
  return algorithm_ == Algorithm::Present80 ? present_decrypt(block) : prince_decrypt(block);
}

std::uint64_t BlockCipher::present_encrypt(std::uint64_t x) const {
  const Tables& t = tables();
  for (int r = 0; r < 31; ++r) x = apply_nibbles(t.present_sp, x ^ round_keys_[r]);
  return x ^ round_keys_[31];
}

std::uint64_t BlockCipher::present_decrypt(std::uint64_t x) const {
  const Tables& t = tables();
  x ^= round_keys_[31];
  for (int r = 30; r >= 0; --r) {
    x = apply_nibbles(t.present_pinv, x);
    std::uint64_t s = 0;
    for (int pos = 0; pos < 16; ++pos)
      s |= static_cast<std::uint64_t>(t.present_sinv[(x >> (4 * pos)) & 0xF]) << (4 * pos);
    x = s ^ round_keys_[r];
  }
  return x;
}

std::uint64_t BlockCipher::prince_encrypt(std::uint64_t block) const {
  return prince_core(block ^ round_keys_[0], round_keys_[2]) ^ round_keys_[1];
}

// Alpha-reflection: decryption is encryption with k0 and k0' swapped and k1 ^ alpha.
std::uint64_t BlockCipher::prince_decrypt(std::uint64_t block) const {
  return prince_core(block ^ round_keys_[1], round_keys_[2] ^ kPrinceAlpha) ^ round_keys_[0];
}

std::uint64_t encrypt(std::uint64_t block, const BlockCipherKey& key) {
  return BlockCipher(key).encrypt(block);
}

std::uint64_t decrypt(std::uint64_t block, const BlockCipherKey& key) {
  return BlockCipher(key).decrypt(block);
}

std::uint64_t buggy_block(std::uint64_t line_addr) {
  std::uint64_t out = 0;
  for (int j = 0; j < 16; ++j) out |= ((line_addr >> j) & 1ULL) << (4 * j);
  return out;
}

IndexFunction::IndexFunction(const KeyPair& keys, unsigned index_bits, IndexMode mode)
    : c1_((keys.validate(), keys.k1)),
      c2_(keys.k2),
      index_bits_(index_bits),
      mask_((1ULL << index_bits) - 1),
      mode_(mode) {
  if (index_bits < 1 || index_bits > 30)
    throw ArgumentError("index_bits must lie in [1, 30], got " + std::to_string(index_bits));
}

SiblingIndices IndexFunction::operator()(std::uint64_t line_addr) const {
  const std::uint64_t block = mode_ == IndexMode::Buggy ? buggy_block(line_addr) : line_addr;
  return {static_cast<std::uint32_t>(c1_.encrypt(block) & mask_),
          static_cast<std::uint32_t>(c2_.encrypt(block) & mask_)};
}

SiblingIndices derive_sibling_indices(std::uint64_t line_addr, const KeyPair& keys,
                                      unsigned index_bits) {
  return IndexFunction(keys, index_bits, IndexMode::Correct)(line_addr);
}

SiblingIndices derive_sibling_indices_buggy(std::uint64_t line_addr, const KeyPair& keys,
                                            unsigned index_bits) {
  return IndexFunction(keys, index_bits, IndexMode::Buggy)(line_addr);
}

double UniformityReport::upper_bound() const {
  const auto b = static_cast<double>(bins);
  return b + 4.0 * std::sqrt(2.0 * b);
}

double UniformityReport::lower_bound() const {
  const auto b = static_cast<double>(bins);
  return b - 4.0 * std::sqrt(2.0 * b);
}

UniformityReport uniformity_report(const KeyPair& keys, unsigned index_bits,
                                   std::uint64_t sample_count, std::uint64_t seed, IndexMode mode) {
  if (sample_count == 0) throw ArgumentError("uniformity_report needs sample_count > 0");
  const IndexFunction index(keys, index_bits, mode);
  const std::uint64_t bins = 1ULL << index_bits;
  std::vector<std::uint64_t> h1(bins, 0), h2(bins, 0);
  // mix64 is a bijection, so consecutive counters give distinct addresses.
  const std::uint64_t base = mix64(seed);
  for (std::uint64_t i = 0; i < sample_count; ++i) {
    const SiblingIndices s = index(mix64(base + i));
    ++h1[s.i1];
    ++h2[s.i2];
  }
  const double expected = static_cast<double>(sample_count) / static_cast<double>(bins);
  auto chi = [expected](const std::vector<std::uint64_t>& h) {
    double acc = 0.0;
    for (std::uint64_t c : h) {
      const double d = static_cast<double>(c) - expected;
      acc += d * d / expected;
    }
    return acc;
  };
  return {sample_count, bins, chi(h1), chi(h2)};
}

std::vector<TestVector> parse_test_vectors(std::istream& in) {
  std::vector<TestVector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = view.find(',', start);
      fields.push_back(view.substr(start, comma == std::string_view::npos ? view.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 4)
      throw ConfigError("test vector line " + std::to_string(line_no) + ": expected 4 fields");
    try {
      const Algorithm algorithm = parse_algorithm(fields[0]);
      out.push_back({BlockCipherKey::from_hex(algorithm, fields[1]), parse_hex_u64(fields[2]),
                     parse_hex_u64(fields[3])});
    } catch (const ConfigError& e) {
      throw ConfigError("test vector line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<VectorCheck> check_test_vectors(const std::vector<TestVector>& vectors) {
  std::vector<VectorCheck> out;
  out.reserve(vectors.size());
  for (const TestVector& v : vectors) {
    const BlockCipher c(v.key);
    out.push_back({v, c.encrypt(v.plaintext), c.decrypt(v.ciphertext)});
  }
  return out;
}

}  // namespace mirage::cipher
