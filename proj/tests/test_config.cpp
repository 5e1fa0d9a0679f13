#include <cstdint>
#include <vector>

#include "bidenv/config.hpp"
#include "bidenv/errors.hpp"
#include "doctest.h"

using namespace bidenv;

TEST_CASE("config: sections prefix keys and comments vanish") {
    Config cfg = Config::parse_string(
        "top = 1\n"
        "# full-line comment\n"
        "[train]\n"
        "lr = 1e-4   # trailing comment\n"
        "epochs = 10\n"
        "\n"
        "[model]\n"
        "d_model = 64\n");
    CHECK(cfg.has("top"));
    CHECK(cfg.get_int("top", 0) == 1);
    CHECK(cfg.get_double("train.lr", 0.0) == doctest::Approx(1e-4));
    CHECK(cfg.get_int("train.epochs", 0) == 10);
    CHECK(cfg.get_int("model.d_model", 0) == 64);
    CHECK_FALSE(cfg.has("lr"));  // key without section prefix does not exist
}

TEST_CASE("config: typed getters validate and default") {
    Config cfg = Config::parse_string(
        "[a]\n"
        "num = 2.5\n"
        "int = 7\n"
        "flag = true\n"
        "off = 0\n"
        "list = 1, 2.5, 4\n"
        "ints = 3,5\n"
        "text = hello world\n"
        "badnum = 12x\n");
    CHECK(cfg.get_double("a.num", 0.0) == 2.5);
    CHECK(cfg.get_int("a.int", 0) == 7);
    CHECK(cfg.get_u64("a.int", 0) == 7);
    CHECK(cfg.get_bool("a.flag", false));
    CHECK_FALSE(cfg.get_bool("a.off", true));
    CHECK(cfg.get_doubles("a.list", {}) == std::vector<double>{1.0, 2.5, 4.0});
    CHECK(cfg.get_ints("a.ints", {}) == std::vector<int>{3, 5});
    CHECK(cfg.get_str("a.text", "") == "hello world");

    // absent keys fall back to the default
    CHECK(cfg.get_int("a.missing", 42) == 42);
    CHECK(cfg.get_doubles("a.missing", {9.0}) == std::vector<double>{9.0});

    // present but malformed values are an error, not a silent default
    CHECK_THROWS_AS(cfg.get_int("a.badnum", 0), DataError);
    CHECK_THROWS_AS(cfg.get_double("a.badnum", 0.0), DataError);
    CHECK_THROWS_AS(cfg.get_bool("a.int", false), DataError);
    CHECK_THROWS_AS(cfg.get_ints("a.list", {}), DataError);  // 2.5 is not an integer
    CHECK_THROWS_AS(cfg.get_int("a.text", 0), DataError);
}

TEST_CASE("config: malformed input is rejected with the line number") {
    CHECK_THROWS_WITH_AS(Config::parse_string("[train\nlr = 1\n"),
                         doctest::Contains("line 1"), DataError);
    CHECK_THROWS_WITH_AS(Config::parse_string("ok = 1\nnot a pair\n"),
                         doctest::Contains("line 2"), DataError);
    CHECK_THROWS_WITH_AS(Config::parse_string("a = 1\na = 2\n"),
                         doctest::Contains("duplicate"), DataError);
    CHECK_THROWS_WITH_AS(Config::parse_string("[x]\nbad key = 1\n"),
                         doctest::Contains("bad key"), DataError);
    CHECK_THROWS_AS(Config::parse_file("/nonexistent/path.cfg"), DataError);
}

TEST_CASE("config: unknown keys are named in the rejection") {
    Config cfg = Config::parse_string("[train]\nlr = 1\ntypo = 2\n");
    CHECK_NOTHROW(cfg.require_known({"train.lr", "train.typo"}));
    CHECK_THROWS_WITH_AS(cfg.require_known({"train.lr"}), doctest::Contains("train.typo"),
                         DataError);
}

TEST_CASE("config: serialization round-trips including bare keys") {
    Config cfg = Config::parse_string(
        "zlast = bare\n"
        "[b]\n"
        "two = 2\n"
        "[a]\n"
        "one = 1\n");
    cfg.set("train.seed", "9");
    std::string text = cfg.serialize();
    Config back = Config::parse_string(text);
    CHECK(back.entries() == cfg.entries());
    // canonical form: bare keys first, then sorted sections
    CHECK(text.find("zlast") < text.find("[a]"));
    CHECK(text.find("[a]") < text.find("[b]"));
    CHECK(text.find("[b]") < text.find("[train]"));
    // serializing the reparse is a fixed point
    CHECK(back.serialize() == text);
}
