#include <filesystem>

#include "doctest.h"
#include "floff/config.hpp"

using namespace floff;

TEST_SUITE_BEGIN("config");

TEST_CASE("parse key=value with comments and whitespace") {
  Config c = Config::parse(
      "# a comment\n"
      "rounds = 5\n"
      "\n"
      "endpoint=127.0.0.1:4747\n"
      "  lr  =  0.001  \n"
      "name=has = equals inside\n");
  CHECK(c.get_i64("rounds", 0) == 5);
  CHECK(c.get("endpoint", "") == "127.0.0.1:4747");
  CHECK(c.get_f64("lr", 0) == 0.001);
  CHECK(c.get("name", "") == "has = equals inside");
  CHECK_FALSE(c.has("missing"));
  CHECK(c.get("missing", "dflt") == "dflt");
}

TEST_CASE("parse errors carry the line number") {
  try {
    Config::parse("ok=1\nnot a pair\n");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::invalid_argument);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::parse("=value\n"), Error);
}

TEST_CASE("typed getters validate") {
  Config c = Config::parse("n=12\nf=1.5\nt1=true\nt2=on\nf1=0\nf2=no\nbad=maybe\n");
  CHECK(c.get_u64("n", 0) == 12);
  CHECK(c.get_f64("f", 0) == 1.5);
  CHECK(c.get_bool("t1", false));
  CHECK(c.get_bool("t2", false));
  CHECK_FALSE(c.get_bool("f1", true));
  CHECK_FALSE(c.get_bool("f2", true));
  CHECK(c.get_bool("absent", true));
  CHECK_THROWS_AS(c.get_bool("bad", false), Error);
  CHECK_THROWS_AS(c.get_u64("f", 0), Error);
  try {
    c.require("nope");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
}

TEST_CASE("to_text is sorted and stable") {
  Config c;
  c.set("zeta", "1");
  c.set("alpha", "2");
  c.set("mid", "3");
  CHECK(c.to_text() == "alpha=2\nmid=3\nzeta=1\n");
  c.set("alpha", "9");
  CHECK(c.to_text() == "alpha=9\nmid=3\nzeta=1\n");
  c.erase("mid");
  CHECK(c.to_text() == "alpha=9\nzeta=1\n");
}

TEST_CASE("save/load roundtrip") {
  auto path = (std::filesystem::temp_directory_path() / "floff_cfg_test.cfg").string();
  Config c;
  c.set("endpoint", "127.0.0.1:1");
  c.set("fraction", "0.25");
  c.save(path);
  Config back = Config::load(path);
  CHECK(back.to_text() == c.to_text());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Config::load(path), Error);
}

TEST_SUITE_END();
