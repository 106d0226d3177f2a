#include <cmath>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "mz/config.hpp"
#include "mz/rng.hpp"
#include "mz/sha1.hpp"

using mz::Config;
using mz::Rng;

TEST_CASE("sha1 matches published test vectors") {
  // Reference digests from the standard SHA-1 test suite.
  CHECK(mz::sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(mz::sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(mz::sha1_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "84983e441c3bd26ebaae4aa1f95129e5e54670f1");
  // 64-byte message exercises the two-block padding path.
  CHECK(mz::sha1_hex(std::string(64, 'a')) ==
        "0098ba824b5c16427bd7a1122a5a442a25ec644d");
}

TEST_CASE("rng is deterministic and distribution moments are right") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) CHECK(a.u01() == b.u01());

  Rng r(7);
  const int n = 200000;
  double su = 0, sb = 0, sb2 = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    su += r.u01();
    const double x = r.beta22();
    sb += x;
    sb2 += x * x;
    const double g = r.normal();
    sn += g;
    sn2 += g * g;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  // Beta(2,2): mean 1/2, variance 1/20.
  CHECK(sb / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sb2 / n - (sb / n) * (sb / n) == doctest::Approx(0.05).epsilon(0.05));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng beta22 stays in (0,1) and permutation is a bijection") {
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = r.beta22();
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
  auto p = r.permutation(100);
  std::vector<int> seen(100, 0);
  for (auto i : p) seen[i]++;
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("config parses sections into dotted keys") {
  const char* text =
      "# comment\n"
      "top = 1\n"
      "[system]\n"
      "kind = lorenz63\n"
      "sigma = 10.0\n"
      "[trajectory.train]\n"
      "n_snapshots = 1e5\n"
      "use_burn = true\n";
  Config c = Config::parse(text);
  CHECK(c.get_int("top") == 1);
  CHECK(c.get_str("system.kind") == "lorenz63");
  CHECK(c.get_double("system.sigma") == 10.0);
  CHECK(c.get_int("trajectory.train.n_snapshots") == 100000);
  CHECK(c.get_bool("trajectory.train.use_burn"));
  CHECK(c.get_double_or("system.rho", 28.0) == 28.0);
  CHECK(c.keys_under("trajectory") ==
        std::vector<std::string>{"trajectory.train.n_snapshots",
                                 "trajectory.train.use_burn"});
}

TEST_CASE("config rejects malformed input and duplicate keys") {
  CHECK_THROWS(Config::parse("[unclosed\n"));
  CHECK_THROWS(Config::parse("novalue\n"));
  CHECK_THROWS(Config::parse("a = 1\na = 2\n"));
  Config c = Config::parse("a = x\n");
  CHECK_THROWS(c.get_double("a"));
  CHECK_THROWS(c.get_str("missing"));
}

TEST_CASE("config validation names the offending key") {
  Config c = Config::parse("[sec]\ngood = 1\nbogus_key = 2\n");
  try {
    c.validate_keys({"sec.good"});
    FAIL("expected a validation error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("sec.bogus_key") != std::string::npos);
  }
  CHECK_NOTHROW(c.validate_keys({"sec.good"}, {"sec"}));
}

TEST_CASE("config canonical form and hash are order-independent") {
  Config a = Config::parse("[s]\nx = 1\ny = 2\n");
  Config b = Config::parse("[s]\ny = 2\nx = 1\n");
  CHECK(a.canonical() == "s.x = 1\ns.y = 2\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 40);
  b.set("s.x", "3");
  CHECK(a.hash() != b.hash());
}
