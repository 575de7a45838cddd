#include "support.hpp"

#include "sblab/config.hpp"
#include "sblab/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sblab;

TEST_CASE("format_real round-trips doubles") {
  auto g = make_stream(1, "fmt");
  std::uniform_real_distribution<double> u(-30, 30);
  for (int k = 0; k < 2000; ++k) {
    const double x = std::ldexp(u(g), static_cast<int>(u(g) * 10));
    CHECK(parse_real(format_real(x), "t") == x);
  }
  CHECK(parse_real(format_real(0.1), "t") == 0.1);
  CHECK_THROWS_AS(parse_real("0.1x", "t"), IoError);
  CHECK_THROWS_AS(parse_real("", "t"), IoError);
}

TEST_CASE("CSV writer and reader") {
  std::stringstream s;
  CsvWriter w(s);
  w.header({"a", "b", "c"});
  w.field(1.5).field(2L).field("x");
  w.end_row();
  w.field(-0.25).field(3).field("y");
  w.end_row();
  CHECK(s.str() == "a,b,c\n1.5,2,x\n-0.25,3,y\n");
  const auto t = parse_csv(s, "mem");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.rows.size() == 2);
  CHECK(t.column("c") == 2);
  CHECK(t.line_numbers[1] == 3);
  CHECK_THROWS_AS(t.column("zz"), IoError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_csv(empty, "e"), IoError);
}

TEST_CASE("open_output creates directories and reports the path") {
  const auto dir = std::filesystem::path("cfg_io_tmp") / "nested";
  std::filesystem::remove_all("cfg_io_tmp");
  {
    auto f = open_output(dir / "x.txt");
    f << "hi";
  }
  CHECK(std::filesystem::exists(dir / "x.txt"));
  std::filesystem::remove_all("cfg_io_tmp");
  try {
    open_output("/proc/definitely/not/here.txt");
    FAIL("expected failure");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/proc/definitely/not") != std::string::npos);
  }
}

TEST_CASE("config round trip") {
  Config c;
  c.set_real("alpha_rad", std::numbers::pi / 3);
  c.set_int("epochs", 8192);
  c.set("activation", "relu");
  c.set_real("sigma", 0.0078125);
  std::stringstream s;
  c.write(s, {"provenance line"});
  CHECK(s.str().rfind("# provenance line\n", 0) == 0);
  const Config back = Config::parse(s, "mem");
  CHECK(back.entries() == c.entries());
  CHECK(parse_real(*back.get("alpha_rad"), "t") == std::numbers::pi / 3);
  CHECK_FALSE(back.get("missing").has_value());

  std::istringstream dup("a = 1\n# note\nb = 2\na = 3\n");
  try {
    Config::parse(dup, "f.cfg");
    FAIL("expected failure");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("f.cfg:4") != std::string::npos);
  }
  std::istringstream noeq("just words\n");
  CHECK_THROWS_AS(Config::parse(noeq, "g"), IoError);
  std::istringstream badkey("a b = 1\n");
  CHECK_THROWS_AS(Config::parse(badkey, "h"), IoError);
  CHECK_THROWS_AS(c.set("bad key", "1"), IoError);
}

TEST_CASE("angle expressions and lists") {
  const double pi = std::numbers::pi;
  CHECK(parse_angle_expr("pi") == pi);
  CHECK(parse_angle_expr("pi/2") == pi / 2);
  CHECK(parse_angle_expr("-pi/6") == -pi / 6);
  CHECK(parse_angle_expr("2*pi/3") == 2 * pi / 3);
  CHECK(parse_angle_expr(" pi / 3 ") == pi / 3);
  CHECK(parse_angle_expr("1.0471975511965976") == 1.0471975511965976);
  CHECK_THROWS_AS(parse_angle_expr("pi/0"), IoError);
  CHECK_THROWS_AS(parse_angle_expr("2pi"), IoError);
  CHECK_THROWS_AS(parse_angle_expr(""), IoError);
  CHECK(parse_real_list("1e-4,-1e-5, 1e-7") == std::vector<double>{1e-4, -1e-5, 1e-7});
  CHECK(parse_int_list("1,2,32") == std::vector<int>{1, 2, 32});
  CHECK_THROWS_AS(parse_int_list("1,2.5"), IoError);
  CHECK_THROWS_AS(parse_real_list(""), IoError);
}
