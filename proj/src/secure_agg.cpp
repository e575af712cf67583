#include "fermi/secure_agg.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include "fermi/errors.hpp"

namespace fermi::secagg {

namespace {

struct PkeyFree {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxFree {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyFree>;

PkeyPtr private_key(const Bytes32& secret) {
  PkeyPtr k(EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr, secret.data(), secret.size()));
  if (!k) throw KeyError("cannot load X25519 private key");
  return k;
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::string_view in;
  std::size_t pos = 0;

  std::uint32_t take(std::size_t n) {
    if (pos + n > in.size()) throw RoundAborted("truncated masked update");
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += n;
    return v;
  }
};

void check_participants(const std::vector<std::uint16_t>& p) {
  if (!std::is_sorted(p.begin(), p.end()) || std::adjacent_find(p.begin(), p.end()) != p.end())
    throw RoundAborted("participant list must be sorted and unique");
}

}  // namespace

KeyPair keypair_from_secret(const Bytes32& secret) {
  auto k = private_key(secret);
  KeyPair kp;
  kp.secret = secret;
  std::size_t len = kp.public_key.size();
  if (EVP_PKEY_get_raw_public_key(k.get(), kp.public_key.data(), &len) != 1 || len != 32)
    throw KeyError("cannot derive X25519 public key");
  return kp;
}

KeyPair keygen() {
  Bytes32 secret;
  if (RAND_bytes(secret.data(), static_cast<int>(secret.size())) != 1) throw KeyError("system RNG failure");
  return keypair_from_secret(secret);
}

Bytes32 shared_secret(const Bytes32& my_secret, const Bytes32& their_public) {
  auto mine = private_key(my_secret);
  PkeyPtr peer(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, their_public.data(), their_public.size()));
  if (!peer) throw KeyError("invalid X25519 public key");
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree> ctx(EVP_PKEY_CTX_new(mine.get(), nullptr));
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1 || EVP_PKEY_derive_set_peer(ctx.get(), peer.get()) != 1)
    throw KeyError("X25519 setup failed");
  Bytes32 out{};
  std::size_t len = out.size();
  if (EVP_PKEY_derive(ctx.get(), out.data(), &len) != 1 || len != 32)
    throw KeyError("X25519 derivation rejected the peer key");
  if (std::all_of(out.begin(), out.end(), [](std::uint8_t b) { return b == 0; }))
    throw KeyError("peer key is a low-order point");
  return out;
}

Bytes32 sha256(std::span<const std::uint8_t> data) {
  Bytes32 out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
    throw KeyError("SHA-256 failed");
  return out;
}

Seed kdf(const Bytes32& shared, std::uint32_t round, std::uint16_t a, std::uint16_t b) {
  const std::uint16_t lo = std::min(a, b), hi = std::max(a, b);
  std::vector<std::uint8_t> msg(shared.begin(), shared.end());
  for (int i = 0; i < 4; ++i) msg.push_back(static_cast<std::uint8_t>((round >> (8 * i)) & 0xff));
  msg.push_back(static_cast<std::uint8_t>(lo & 0xff));
  msg.push_back(static_cast<std::uint8_t>(lo >> 8));
  msg.push_back(static_cast<std::uint8_t>(hi & 0xff));
  msg.push_back(static_cast<std::uint8_t>(hi >> 8));
  return sha256(msg);
}

Seed derive_pair_seed(const Bytes32& my_secret, const Bytes32& their_public, std::uint32_t round,
                      std::uint16_t me, std::uint16_t peer) {
  return kdf(shared_secret(my_secret, their_public), round, me, peer);
}

std::vector<std::uint32_t> expand_mask(const Seed& seed, std::size_t dim) {
  if (dim == 0) throw DomainError("mask dimension must be positive");
  std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree> ctx(EVP_CIPHER_CTX_new());
  const std::array<std::uint8_t, 16> iv{};
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, seed.data(), iv.data()) != 1)
    throw KeyError("AES-CTR setup failed");
  std::vector<std::uint8_t> zeros(dim * 4, 0), stream(dim * 4 + 16);
  int len = 0;
  if (EVP_EncryptUpdate(ctx.get(), stream.data(), &len, zeros.data(), static_cast<int>(zeros.size())) != 1 ||
      static_cast<std::size_t>(len) != zeros.size())
    throw KeyError("AES-CTR keystream failed");
  std::vector<std::uint32_t> out(dim);
  for (std::size_t i = 0; i < dim; ++i)
    out[i] = static_cast<std::uint32_t>(stream[4 * i]) | static_cast<std::uint32_t>(stream[4 * i + 1]) << 8 |
             static_cast<std::uint32_t>(stream[4 * i + 2]) << 16 | static_cast<std::uint32_t>(stream[4 * i + 3]) << 24;
  return out;
}

std::vector<std::uint32_t> quantize(std::span<const double> x) {
  std::vector<std::uint32_t> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || std::abs(x[i]) >= kQuantLimit)
      throw DomainError(fmt::format("value {} at index {} outside the quantizer range", x[i], i));
    const auto v = static_cast<std::int64_t>(std::llround(x[i] * kQuantScale));
    q[i] = static_cast<std::uint32_t>(v);
  }
  return q;
}

double dequantize_mean(std::uint32_t sum, std::size_t n) {
  const auto lifted = static_cast<std::int32_t>(sum);
  return static_cast<double>(lifted) / (static_cast<double>(n) * kQuantScale);
}

std::vector<double> dequantize_mean(std::span<const std::uint32_t> sum, std::size_t n) {
  if (n == 0) throw DomainError("cannot average zero participants");
  std::vector<double> out(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = dequantize_mean(sum[i], n);
  return out;
}

std::vector<double> dequantize(std::span<const std::uint32_t> q) { return dequantize_mean(q, 1); }

std::vector<std::uint32_t> total_mask(std::uint16_t me, const std::vector<std::uint16_t>& participants,
                                      const std::map<std::uint16_t, Seed>& peer_seeds, std::size_t dim) {
  std::vector<std::uint32_t> m(dim, 0);
  for (std::uint16_t j : participants) {
    if (j == me) continue;
    const auto it = peer_seeds.find(j);
    if (it == peer_seeds.end()) throw RoundAborted(fmt::format("agent {} lacks the seed shared with {}", me, j));
    const auto stream = expand_mask(it->second, dim);
    if (j > me)
      for (std::size_t d = 0; d < dim; ++d) m[d] += stream[d];
    else
      for (std::size_t d = 0; d < dim; ++d) m[d] -= stream[d];
  }
  return m;
}

MaskedUpdate mask_update(std::span<const std::uint32_t> wq, std::uint16_t me, std::uint32_t round,
                         const std::vector<std::uint16_t>& participants,
                         const std::map<std::uint16_t, Seed>& peer_seeds) {
  check_participants(participants);
  if (!std::binary_search(participants.begin(), participants.end(), me))
    throw RoundAborted(fmt::format("agent {} is not in the participant set", me));
  MaskedUpdate u;
  u.agent = me;
  u.round = round;
  u.participants = participants;
  u.masked.assign(wq.begin(), wq.end());
  if (wq.empty()) return u;
  const auto m = total_mask(me, participants, peer_seeds, wq.size());
  for (std::size_t d = 0; d < wq.size(); ++d) u.masked[d] += m[d];
  return u;
}

std::vector<std::uint32_t> sum_mod(const std::vector<std::vector<std::uint32_t>>& vectors) {
  if (vectors.empty()) return {};
  std::vector<std::uint32_t> s(vectors.front().size(), 0);
  for (const auto& v : vectors) {
    if (v.size() != s.size()) throw ShapeError("vectors differ in length");
    for (std::size_t d = 0; d < s.size(); ++d) s[d] += v[d];
  }
  return s;
}

std::vector<std::uint32_t> aggregate_sum(const std::vector<MaskedUpdate>& updates, std::size_t n_expected) {
  if (updates.size() != n_expected)
    throw RoundAborted(fmt::format("expected {} submissions, got {}", n_expected, updates.size()));
  if (updates.empty()) throw RoundAborted("empty round");
  const auto& committed = updates.front().participants;
  if (committed.size() != n_expected) throw RoundAborted("participant list does not match the expected count");
  std::set<std::uint16_t> seen;
  std::vector<std::vector<std::uint32_t>> vecs;
  vecs.reserve(updates.size());
  for (const auto& u : updates) {
    if (u.participants != committed || u.round != updates.front().round)
      throw RoundAborted("submissions disagree on the round header");
    if (!std::binary_search(committed.begin(), committed.end(), u.agent) || !seen.insert(u.agent).second)
      throw RoundAborted(fmt::format("unexpected or duplicate submission from agent {}", u.agent));
    if (u.masked.size() != updates.front().masked.size()) throw RoundAborted("submissions differ in dimension");
    vecs.push_back(u.masked);
  }
  return sum_mod(vecs);
}

std::vector<double> aggregate(const std::vector<MaskedUpdate>& updates, std::size_t n_expected) {
  return dequantize_mean(aggregate_sum(updates, n_expected), n_expected);
}

std::string encode(const MaskedUpdate& u) {
  if (u.participants.size() > 0xffff) throw ShapeError("too many participants for the wire format");
  std::string out;
  out.reserve(11 + 2 * u.participants.size() + 4 * u.masked.size());
  out.push_back(static_cast<char>(kWireVersion));
  put_u32(out, u.round);
  put_u32(out, static_cast<std::uint32_t>(u.masked.size()));
  put_u16(out, static_cast<std::uint16_t>(u.participants.size()));
  for (auto id : u.participants) put_u16(out, id);
  for (auto w : u.masked) put_u32(out, w);
  return out;
}

MaskedUpdate decode(std::string_view bytes, std::uint16_t sender) {
  Reader r{bytes};
  const auto version = r.take(1);
  if (version != kWireVersion) throw RoundAborted(fmt::format("unsupported wire version {}", version));
  MaskedUpdate u;
  u.agent = sender;
  u.round = r.take(4);
  const std::uint32_t dim = r.take(4);
  const std::uint32_t count = r.take(2);
  if (bytes.size() != 11 + 2 * static_cast<std::size_t>(count) + 4 * static_cast<std::size_t>(dim))
    throw RoundAborted("masked update length does not match its header");
  u.participants.resize(count);
  for (auto& id : u.participants) id = static_cast<std::uint16_t>(r.take(2));
  u.masked.resize(dim);
  for (auto& w : u.masked) w = r.take(4);
  check_participants(u.participants);
  return u;
}

std::vector<std::uint16_t> eligibility_filter(std::span<const double> energies, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw DomainError("energy threshold must lie in [0,1]");
  std::vector<std::uint16_t> out;
  for (std::size_t i = 0; i < energies.size(); ++i)
    if (energies[i] > threshold) out.push_back(static_cast<std::uint16_t>(i));
  return out;
}

void Aggregator::begin_round(std::uint32_t round, std::vector<std::uint16_t> participants, std::size_t dim) {
  std::lock_guard lk(mu_);
  check_participants(participants);
  if (participants.empty()) throw RoundAborted("empty participant set");
  state_ = State::Collecting;
  round_ = round;
  dim_ = dim;
  participants_ = std::move(participants);
  inbox_.clear();
  bytes_ = 0;
}

void Aggregator::abort_locked(const std::string& reason) {
  state_ = State::Aborted;
  inbox_.clear();
  last_error_ = reason;
}

void Aggregator::abort(const std::string& reason) {
  std::lock_guard lk(mu_);
  abort_locked(reason);
}

void Aggregator::submit(std::uint16_t sender, std::string_view bytes) {
  std::lock_guard lk(mu_);
  if (state_ != State::Collecting) throw RoundAborted("no round is collecting submissions");
  try {
    auto u = decode(bytes, sender);
    if (u.round != round_) throw RoundAborted(fmt::format("submission for round {} during round {}", u.round, round_));
    if (u.participants != participants_) throw RoundAborted("submission names a different participant set");
    if (u.masked.size() != dim_) throw RoundAborted("submission has the wrong dimension");
    if (!std::binary_search(participants_.begin(), participants_.end(), sender))
      throw RoundAborted(fmt::format("agent {} is not a participant", sender));
    if (inbox_.count(sender)) throw RoundAborted(fmt::format("duplicate submission from agent {}", sender));
    bytes_ += bytes.size();
    inbox_.emplace(sender, std::move(u));
  } catch (const RoundAborted& e) {
    abort_locked(e.what());
    throw;
  }
}

std::vector<double> Aggregator::finalize() {
  std::lock_guard lk(mu_);
  if (state_ != State::Collecting) throw RoundAborted("round is not collecting");
  if (inbox_.size() != participants_.size()) {
    const auto msg = fmt::format("{} of {} submissions received", inbox_.size(), participants_.size());
    abort_locked(msg);
    throw RoundAborted(msg);
  }
  std::vector<MaskedUpdate> ups;
  ups.reserve(inbox_.size());
  for (auto& [id, u] : inbox_) ups.push_back(std::move(u));
  inbox_.clear();
  state_ = State::Idle;
  return aggregate(ups, participants_.size());
}

Aggregator::State Aggregator::state() const {
  std::lock_guard lk(mu_);
  return state_;
}

std::size_t Aggregator::received() const {
  std::lock_guard lk(mu_);
  return inbox_.size();
}

std::string Aggregator::last_error() const {
  std::lock_guard lk(mu_);
  return last_error_;
}

std::uint64_t Aggregator::bytes_received() const {
  std::lock_guard lk(mu_);
  return bytes_;
}

}  // namespace fermi::secagg
