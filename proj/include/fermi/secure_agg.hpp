#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fermi::secagg {

using Bytes32 = std::array<std::uint8_t, 32>;
using Seed = Bytes32;

/// Curve25519 key pair. The secret is never written to any transcript.
struct KeyPair {
  Bytes32 secret{};
  Bytes32 public_key{};
};

KeyPair keygen();
KeyPair keypair_from_secret(const Bytes32& secret);
/// X25519(my_secret, their_public). Throws KeyError if the peer point
/// yields the all-zero shared value.
Bytes32 shared_secret(const Bytes32& my_secret, const Bytes32& their_public);

Bytes32 sha256(std::span<const std::uint8_t> data);

/// SHA-256(shared || round u32 LE || id_lo u16 LE || id_hi u16 LE).
Seed kdf(const Bytes32& shared, std::uint32_t round, std::uint16_t a, std::uint16_t b);
Seed derive_pair_seed(const Bytes32& my_secret, const Bytes32& their_public, std::uint32_t round,
                      std::uint16_t me, std::uint16_t peer);

/// AES-128-CTR keystream keyed by seed[0..16], zero IV, read as u32 LE words.
std::vector<std::uint32_t> expand_mask(const Seed& seed, std::size_t dim);

inline constexpr double kQuantScale = 65536.0;  // 2^16
inline constexpr double kQuantLimit = 32768.0;  // |x| < 2^15

std::vector<std::uint32_t> quantize(std::span<const double> x);
/// Centered lift of a single summed word, divided by n and the scale.
double dequantize_mean(std::uint32_t sum, std::size_t n);
std::vector<double> dequantize_mean(std::span<const std::uint32_t> sum, std::size_t n);
std::vector<double> dequantize(std::span<const std::uint32_t> q);

struct MaskedUpdate {
  std::uint16_t agent = 0;
  std::uint32_t round = 0;
  std::vector<std::uint16_t> participants;  // sorted
  std::vector<std::uint32_t> masked;
};

/// Sum over peers j > me of m_{me,j} minus sum over j < me of m_{j,me}.
std::vector<std::uint32_t> total_mask(std::uint16_t me, const std::vector<std::uint16_t>& participants,
                                      const std::map<std::uint16_t, Seed>& peer_seeds, std::size_t dim);

/// w + total_mask (mod 2^32). A missing peer seed aborts the round.
MaskedUpdate mask_update(std::span<const std::uint32_t> wq, std::uint16_t me, std::uint32_t round,
                         const std::vector<std::uint16_t>& participants,
                         const std::map<std::uint16_t, Seed>& peer_seeds);

std::vector<std::uint32_t> sum_mod(const std::vector<std::vector<std::uint32_t>>& vectors);

/// Integer-domain sum of the submitted masked vectors after checking the
/// submissions match the committed participant set exactly.
std::vector<std::uint32_t> aggregate_sum(const std::vector<MaskedUpdate>& updates, std::size_t n_expected);
/// aggregate_sum, centered lift, divided by the participant count.
std::vector<double> aggregate(const std::vector<MaskedUpdate>& updates, std::size_t n_expected);

inline constexpr std::uint8_t kWireVersion = 1;

/// u8 version | u32 round | u32 dim | u16 count | count x u16 id | dim x u32,
/// all little-endian. The sender id travels in the bus envelope.
std::string encode(const MaskedUpdate& u);
MaskedUpdate decode(std::string_view bytes, std::uint16_t sender);

/// Agents whose energy is strictly above `threshold`.
std::vector<std::uint16_t> eligibility_filter(std::span<const double> energies, double threshold);

/// Round-state owner. Submissions may arrive from any thread; every
/// mutation goes through one mutex.
class Aggregator {
 public:
  enum class State { Idle, Collecting, Aborted };

  void begin_round(std::uint32_t round, std::vector<std::uint16_t> participants, std::size_t dim);
  /// Accepts an encoded update. Wrong round, unknown sender, duplicate or
  /// malformed payloads abort the round and rethrow RoundAborted.
  void submit(std::uint16_t sender, std::string_view bytes);
  /// Releases the average once every participant has submitted; otherwise
  /// aborts and throws RoundAborted.
  std::vector<double> finalize();
  void abort(const std::string& reason);

  State state() const;
  std::size_t received() const;
  std::uint64_t bytes_received() const;
  std::string last_error() const;

 private:
  void abort_locked(const std::string& reason);

  mutable std::mutex mu_;
  State state_ = State::Idle;
  std::uint32_t round_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::uint16_t> participants_;
  std::map<std::uint16_t, MaskedUpdate> inbox_;
  std::uint64_t bytes_ = 0;
  std::string last_error_;
};

}  // namespace fermi::secagg
