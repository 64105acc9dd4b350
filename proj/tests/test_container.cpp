#include "testing.hpp"

#include <filesystem>
#include <fstream>

#include <rohm/container.hpp>

using namespace rohm;

namespace {
std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}
}  // namespace

TEST_CASE("container round trips float32 and uint8 bit-exactly") {
  auto gen = make_generator(1);
  NamedArrays arrays;
  arrays["feat"] = torch::randn({3, 7, 2}, gen, f32());
  arrays["mask"] = (torch::rand({5, 4}, gen, f32()) > 0.5).to(torch::kUInt8);
  arrays["scalar"] = torch::randn({1}, gen, f32());
  auto path = tmp("roundtrip.rohm");
  write_container(path, arrays);
  auto back = read_container(path);
  REQUIRE(back.size() == 3);
  for (const auto& [name, t] : arrays) {
    REQUIRE(back.count(name) == 1);
    CHECK((back[name].scalar_type() == t.scalar_type()));
    CHECK(torch::equal(back[name], t));
  }
  std::filesystem::remove(path);
}

TEST_CASE("float64 arrays are stored as float32") {
  auto path = tmp("f64.rohm");
  auto x = torch::randn({4, 4}, make_generator(2), f64());
  write_container(path, {{"x", x}});
  auto back = read_container(path);
  CHECK((back["x"].scalar_type() == torch::kFloat32));
  CHECK((back["x"].to(torch::kFloat64) - x).abs().max().item<double>() < 1e-6);
  std::filesystem::remove(path);
}

TEST_CASE("empty name table is a valid minimal file") {
  auto path = tmp("empty.rohm");
  write_container(path, {});
  CHECK(read_container(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("corrupt magic, bad version, and truncation raise IoError") {
  auto path = tmp("bad.rohm");
  write_container(path, {{"x", torch::ones({8, 8}, f32())}});
  auto bytes = [&] {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  }();

  SUBCASE("magic") {
    auto evil = bytes;
    evil[0] = 'X';
    std::ofstream(path, std::ios::binary) << evil;
    CHECK_THROWS_AS(read_container(path), IoError);
  }
  SUBCASE("future version") {
    auto evil = bytes;
    evil[4] = static_cast<char>(kContainerVersion + 1);
    std::ofstream(path, std::ios::binary) << evil;
    CHECK_THROWS_AS(read_container(path), IoError);
  }
  SUBCASE("truncated payload") {
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 16);
    CHECK_THROWS_AS(read_container(path), IoError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_container(tmp("nope.rohm")), IoError); }
  std::filesystem::remove(path);
}
