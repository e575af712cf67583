#include <doctest.h>

#include <sodium.h>
#include <openssl/evp.h>

#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fermi/errors.hpp"
#include "fermi/secure_agg.hpp"

using namespace fermi;
using namespace fermi::secagg;

namespace {

Bytes32 hex32(const std::string& h) {
  Bytes32 b{};
  for (std::size_t i = 0; i < 32; ++i) b[i] = static_cast<std::uint8_t>(std::stoul(h.substr(2 * i, 2), nullptr, 16));
  return b;
}

std::vector<std::uint8_t> hex(const std::string& h) {
  std::vector<std::uint8_t> b(h.size() / 2);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(std::stoul(h.substr(2 * i, 2), nullptr, 16));
  return b;
}

// Single-block AES-128 through the ECB interface.
std::vector<std::uint8_t> aes_ecb(const std::uint8_t* key, const std::vector<std::uint8_t>& block) {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key, nullptr);
  EVP_CIPHER_CTX_set_padding(ctx, 0);
  std::vector<std::uint8_t> out(block.size() + 16);
  int len = 0;
  EVP_EncryptUpdate(ctx, out.data(), &len, block.data(), static_cast<int>(block.size()));
  EVP_CIPHER_CTX_free(ctx);
  out.resize(static_cast<std::size_t>(len));
  return out;
}

struct Party {
  std::vector<KeyPair> keys;
  explicit Party(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    for (std::size_t i = 0; i < n; ++i) {
      Bytes32 s;
      for (auto& b : s) b = static_cast<std::uint8_t>(g());
      keys.push_back(keypair_from_secret(s));
    }
  }
  std::map<std::uint16_t, Seed> seeds(std::uint16_t me, const std::vector<std::uint16_t>& ids, std::uint32_t round) const {
    std::map<std::uint16_t, Seed> m;
    for (auto j : ids)
      if (j != me) m[j] = derive_pair_seed(keys[me].secret, keys[j].public_key, round, me, j);
    return m;
  }
};

std::vector<std::uint16_t> iota_ids(std::size_t n) {
  std::vector<std::uint16_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint16_t>(i);
  return ids;
}

}  // namespace

TEST_CASE("X25519 matches RFC 7748 and libsodium") {
  REQUIRE(sodium_init() >= 0);
  const auto a = keypair_from_secret(hex32("77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a"));
  const auto b = keypair_from_secret(hex32("5dab087e624a8a4b79e17f8b83800ee66f3bb1292618b6fd1c2f8b27ff88e0eb"));
  CHECK(a.public_key == hex32("8520f0098930a754748b7ddcb43ef75a0dbf3a0d26381af4eba4a98eaa9b4e6a"));
  CHECK(b.public_key == hex32("de9edb7d7b7dc1b4d35b61c2ece435373f8343c85b78674dadfc7e146f882b4f"));
  const auto k = hex32("4a5d9d5ba4ce2de1728e3bf480350f25e07e21c947d19e3376f09b3c1e161742");
  CHECK(shared_secret(a.secret, b.public_key) == k);
  CHECK(shared_secret(b.secret, a.public_key) == k);

  for (int i = 0; i < 50; ++i) {
    const auto x = keygen(), y = keygen();
    Bytes32 pub{}, shared{};
    crypto_scalarmult_base(pub.data(), x.secret.data());
    CHECK(pub == x.public_key);
    REQUIRE(crypto_scalarmult(shared.data(), x.secret.data(), y.public_key.data()) == 0);
    CHECK(shared == shared_secret(x.secret, y.public_key));
  }
  // Identity point gives the all-zero shared value.
  CHECK_THROWS_AS(shared_secret(a.secret, Bytes32{}), KeyError);
}

TEST_CASE("seed derivation against libsodium SHA-256") {
  REQUIRE(sodium_init() >= 0);
  std::mt19937_64 g(4);
  for (int i = 0; i < 100; ++i) {
    Bytes32 shared;
    for (auto& b : shared) b = static_cast<std::uint8_t>(g());
    const auto round = static_cast<std::uint32_t>(g());
    const auto a = static_cast<std::uint16_t>(g()), b = static_cast<std::uint16_t>(g());
    std::vector<std::uint8_t> msg(shared.begin(), shared.end());
    const std::uint16_t lo = std::min(a, b), hi = std::max(a, b);
    for (int s = 0; s < 32; s += 8) msg.push_back(static_cast<std::uint8_t>(round >> s));
    msg.push_back(static_cast<std::uint8_t>(lo));
    msg.push_back(static_cast<std::uint8_t>(lo >> 8));
    msg.push_back(static_cast<std::uint8_t>(hi));
    msg.push_back(static_cast<std::uint8_t>(hi >> 8));
    Bytes32 want;
    crypto_hash_sha256(want.data(), msg.data(), msg.size());
    CHECK(kdf(shared, round, a, b) == want);
    CHECK(kdf(shared, round, b, a) == want);
  }
  // Both ends of a pair derive the same seed.
  Party p(2, 1);
  CHECK(derive_pair_seed(p.keys[0].secret, p.keys[1].public_key, 3, 0, 1) ==
        derive_pair_seed(p.keys[1].secret, p.keys[0].public_key, 3, 1, 0));
  CHECK(derive_pair_seed(p.keys[0].secret, p.keys[1].public_key, 3, 0, 1) !=
        derive_pair_seed(p.keys[0].secret, p.keys[1].public_key, 4, 0, 1));
}

TEST_CASE("AES block cipher known answers") {
  const auto key = hex("000102030405060708090a0b0c0d0e0f");
  CHECK(aes_ecb(key.data(), hex("00112233445566778899aabbccddeeff")) == hex("69c4e0d86a7b0430d8cdb78070b4c55a"));
  const auto k2 = hex("2b7e151628aed2a6abf7158809cf4f3c");
  CHECK(aes_ecb(k2.data(), hex("6bc1bee22e409f96e93d7e117393172a")) == hex("3ad77bb40d7a3660a89ecaf32466ef97"));
}

TEST_CASE("mask keystream is AES over big-endian counter blocks") {
  std::mt19937_64 g(6);
  for (int trial = 0; trial < 10; ++trial) {
    Seed s;
    for (auto& b : s) b = static_cast<std::uint8_t>(g());
    const std::size_t dim = 1 + g() % 70;
    const auto m = expand_mask(s, dim);
    std::vector<std::uint8_t> counters;
    const std::size_t blocks = (4 * dim + 15) / 16;
    for (std::size_t c = 0; c < blocks; ++c) {
      std::vector<std::uint8_t> blk(16, 0);
      for (int i = 0; i < 8; ++i) blk[15 - static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(c >> (8 * i));
      counters.insert(counters.end(), blk.begin(), blk.end());
    }
    const auto ks = aes_ecb(s.data(), counters);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::uint32_t w = ks[4 * i] | ks[4 * i + 1] << 8 | ks[4 * i + 2] << 16 | static_cast<std::uint32_t>(ks[4 * i + 3]) << 24;
      CHECK(m[i] == w);
    }
  }
  Seed z{};
  CHECK(expand_mask(z, 8) == expand_mask(z, 8));
  CHECK_THROWS_AS(expand_mask(z, 0), DomainError);
}

TEST_CASE("mask bytes look uniform") {
  Seed s{};
  s[0] = 7;
  const auto m = expand_mask(s, 1 << 16);
  std::array<long, 256> bins{};
  for (auto w : m)
    for (int k = 0; k < 4; ++k) ++bins[(w >> (8 * k)) & 0xff];
  const double expected = 4.0 * (1 << 16) / 256.0;
  double chi2 = 0;
  for (long c : bins) chi2 += (c - expected) * (c - expected) / expected;
  // 255 degrees of freedom; 330 is roughly the 0.1% upper tail.
  CHECK(chi2 < 330.0);
}

TEST_CASE("quantizer") {
  const std::vector<double> x{0.0, 1.0, -1.5, 1.0 / 65536.0, 32767.99};
  const auto q = quantize(x);
  CHECK(q[0] == 0u);
  CHECK(q[1] == 65536u);
  CHECK(q[2] == static_cast<std::uint32_t>(-98304));
  CHECK(q[3] == 1u);
  CHECK(dequantize(q)[2] == -1.5);
  CHECK_THROWS_AS(quantize(std::vector<double>{32768.0}), DomainError);
  CHECK_THROWS_AS(quantize(std::vector<double>{-40000.0}), DomainError);
  CHECK_THROWS_AS(quantize(std::vector<double>{std::nan("")}), DomainError);
  CHECK_THROWS_AS(dequantize_mean(std::vector<std::uint32_t>{1}, 0), DomainError);
}

TEST_CASE("two-party example") {
  Party p(2, 2);
  const auto ids = iota_ids(2);
  const std::vector<double> w0{1.0, -2.0, 0.5}, w1{3.0, 2.0, -0.25};
  const auto u0 = mask_update(quantize(w0), 0, 1, ids, p.seeds(0, ids, 1));
  const auto u1 = mask_update(quantize(w1), 1, 1, ids, p.seeds(1, ids, 1));
  CHECK(u0.masked != quantize(w0));
  const auto avg = aggregate({u0, u1}, 2);
  CHECK(avg == std::vector<double>{2.0, 0.0, 0.125});
}

TEST_CASE("single participant has no mask") {
  const std::vector<std::uint16_t> ids{4};
  const std::vector<double> w{0.75, -3.0};
  const auto u = mask_update(quantize(w), 4, 1, ids, {});
  CHECK(u.masked == quantize(w));
  CHECK(aggregate({u}, 1) == w);
}

TEST_CASE("masks cancel for every subset") {
  Party p(5, 3);
  std::mt19937_64 g(3);
  for (unsigned subset = 1; subset < 32; ++subset) {
    std::vector<std::uint16_t> ids;
    for (std::uint16_t i = 0; i < 5; ++i)
      if (subset >> i & 1u) ids.push_back(i);
    const std::size_t dim = 1 + g() % 20;
    std::vector<std::vector<std::uint32_t>> masks;
    for (auto i : ids) masks.push_back(total_mask(i, ids, p.seeds(i, ids, subset), dim));
    CHECK(sum_mod(masks) == std::vector<std::uint32_t>(dim, 0u));
  }
}

TEST_CASE("masked mean matches the float mean within quantisation error") {
  std::mt19937_64 g(10);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t n : {2u, 3u, 7u}) {
    Party p(n, n);
    const auto ids = iota_ids(n);
    std::vector<std::vector<double>> w(n, std::vector<double>(30));
    for (auto& v : w)
      for (auto& x : v) x = u(g);
    std::vector<MaskedUpdate> ups;
    for (std::uint16_t i = 0; i < n; ++i) ups.push_back(mask_update(quantize(w[i]), i, 9, ids, p.seeds(i, ids, 9)));
    const auto avg = aggregate(ups, n);
    for (std::size_t d = 0; d < 30; ++d) {
      double m = 0;
      for (const auto& v : w) m += v[d];
      m /= static_cast<double>(n);
      CHECK(std::abs(avg[d] - m) <= 0.5 / 65536.0 + 1e-15);
    }
  }
}

TEST_CASE("aggregation rejects inconsistent submissions") {
  Party p(3, 5);
  const auto ids = iota_ids(3);
  std::vector<MaskedUpdate> ups;
  for (std::uint16_t i = 0; i < 3; ++i)
    ups.push_back(mask_update(quantize(std::vector<double>{1.0, 2.0}), i, 1, ids, p.seeds(i, ids, 1)));
  CHECK_THROWS_AS(aggregate({ups[0], ups[1]}, 3), RoundAborted);
  CHECK_THROWS_AS(aggregate({ups[0], ups[1], ups[1]}, 3), RoundAborted);
  auto late = ups;
  late[2].round = 2;
  CHECK_THROWS_AS(aggregate(late, 3), RoundAborted);
  auto seeds = p.seeds(0, ids, 1);
  seeds.erase(2);
  CHECK_THROWS_AS(mask_update(quantize(std::vector<double>{1.0}), 0, 1, ids, seeds), RoundAborted);
  CHECK_THROWS_AS(mask_update(quantize(std::vector<double>{1.0}), 5, 1, ids, {}), RoundAborted);
}

TEST_CASE("wire format round trip and corruption") {
  MaskedUpdate u{3, 77, {1, 3, 8}, {0xdeadbeefu, 1u, 0u}};
  const auto bytes = encode(u);
  CHECK(bytes.size() == 11 + 2 * 3 + 4 * 3);
  CHECK(static_cast<std::uint8_t>(bytes[0]) == kWireVersion);
  const auto back = decode(bytes, 3);
  CHECK(back.round == 77u);
  CHECK(back.participants == u.participants);
  CHECK(back.masked == u.masked);
  CHECK_THROWS_AS(decode(bytes.substr(0, bytes.size() - 1), 3), RoundAborted);
  auto v2 = bytes;
  v2[0] = 2;
  CHECK_THROWS_AS(decode(v2, 3), RoundAborted);
  MaskedUpdate unsorted{0, 1, {3, 1}, {}};
  CHECK_THROWS_AS(decode(encode(unsorted), 0), RoundAborted);
}

TEST_CASE("eligibility filter") {
  CHECK(eligibility_filter(std::vector<double>{0.5, 0.1, 0.9}, 0.2) == std::vector<std::uint16_t>{0, 2});
  CHECK(eligibility_filter(std::vector<double>{0.2, 0.2}, 0.2).empty());
  CHECK(eligibility_filter(std::vector<double>{}, 0.2).empty());
  CHECK_THROWS_AS(eligibility_filter(std::vector<double>{0.5}, 1.5), DomainError);
}

TEST_CASE("aggregator state machine") {
  Party p(3, 6);
  const auto ids = iota_ids(3);
  const std::vector<double> w{0.5, 0.25};
  auto submission = [&](std::uint16_t i, std::uint32_t round) {
    return encode(mask_update(quantize(w), i, round, ids, p.seeds(i, ids, round)));
  };
  Aggregator agg;
  CHECK(agg.state() == Aggregator::State::Idle);
  CHECK_THROWS_AS(agg.submit(0, submission(0, 1)), RoundAborted);

  agg.begin_round(1, ids, 2);
  agg.submit(0, submission(0, 1));
  agg.submit(1, submission(1, 1));
  CHECK(agg.received() == 2);
  CHECK_THROWS_AS(agg.finalize(), RoundAborted);
  CHECK(agg.state() == Aggregator::State::Aborted);
  CHECK(agg.last_error().find("2 of 3") != std::string::npos);

  agg.begin_round(2, ids, 2);
  agg.submit(0, submission(0, 2));
  CHECK_THROWS_AS(agg.submit(0, submission(0, 2)), RoundAborted);
  CHECK(agg.state() == Aggregator::State::Aborted);

  agg.begin_round(3, ids, 2);
  CHECK_THROWS_AS(agg.submit(1, submission(1, 2)), RoundAborted);

  agg.begin_round(4, ids, 2);
  for (std::uint16_t i = 0; i < 3; ++i) agg.submit(i, submission(i, 4));
  CHECK(agg.bytes_received() == 3 * (11 + 6 + 8));
  CHECK(agg.finalize() == w);
  CHECK(agg.state() == Aggregator::State::Idle);
  CHECK_THROWS_AS(agg.begin_round(5, {}, 2), RoundAborted);
}

TEST_CASE("concurrent submissions") {
  const std::size_t n = 16;
  Party p(n, 7);
  const auto ids = iota_ids(n);
  std::vector<std::string> payloads;
  std::vector<double> expected(4, 0.0);
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::vector<double> w{double(i), -double(i), 0.5, 1.0 / (i + 1)};
    for (std::size_t d = 0; d < 4; ++d) expected[d] += w[d] / n;
    payloads.push_back(encode(mask_update(quantize(w), i, 1, ids, p.seeds(i, ids, 1))));
  }
  Aggregator agg;
  agg.begin_round(1, ids, 4);
  std::vector<std::thread> threads;
  for (std::uint16_t i = 0; i < n; ++i) threads.emplace_back([&, i] { agg.submit(i, payloads[i]); });
  for (auto& t : threads) t.join();
  CHECK(agg.received() == n);
  const auto avg = agg.finalize();
  for (std::size_t d = 0; d < 4; ++d) CHECK(std::abs(avg[d] - expected[d]) <= 1.0 / 65536.0);
}
