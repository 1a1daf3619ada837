#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mmsum/nn/checkpoint.hpp"
#include "mmsum/nn/rng.hpp"

using namespace mmsum::nn;
namespace fs = std::filesystem;

namespace {
fs::path tmp_file(const char* name) {
  fs::path dir = fs::temp_directory_path() / "mmsum_ckpt_test";
  fs::create_directories(dir);
  return dir / name;
}
}  // namespace

TEST_CASE("round trip is bit exact") {
  Rng rng(77);
  NamedArrays na;
  std::vector<double> a(12), b(5);
  for (auto& v : a) v = rng.normal(0, 3);
  for (auto& v : b) v = rng.uniform(-1e300, 1e300);
  b[0] = 0.0;
  b[1] = -0.0;
  na.put("enc.W", {3, 4}, a);
  na.put("vec", {5}, b);
  na.put_string("config", "d=64;layers=2");
  na.put_u64("seed", 0xDEADBEEFCAFE1234ull);

  auto path = tmp_file("roundtrip.mmck");
  save_named_arrays(na, path.string());
  NamedArrays back = load_named_arrays(path.string());

  CHECK(back.get("enc.W").shape == Shape{3, 4});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(back.get("enc.W").data[i] == a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(back.get("vec").data[i] == b[i]);
  }
  CHECK(std::signbit(back.get("vec").data[1]));
  CHECK(back.get_string("config") == "d=64;layers=2");
  CHECK(back.get_u64("seed") == 0xDEADBEEFCAFE1234ull);

  // writing again produces identical bytes
  auto path2 = tmp_file("roundtrip2.mmck");
  save_named_arrays(back, path2.string());
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
}

TEST_CASE("truncated file is rejected") {
  NamedArrays na;
  na.put("w", {4}, {1, 2, 3, 4});
  auto path = tmp_file("trunc.mmck");
  save_named_arrays(na, path.string());
  auto sz = fs::file_size(path);
  fs::resize_file(path, sz - 9);
  CHECK_THROWS_WITH_AS(load_named_arrays(path.string()),
                       doctest::Contains("truncated"), Error);
}

TEST_CASE("bad magic and version are rejected") {
  auto path = tmp_file("magic.mmck");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE0000000000000000";
  }
  CHECK_THROWS_WITH_AS(load_named_arrays(path.string()), doctest::Contains("magic"), Error);

  NamedArrays na;
  na.put("w", {1}, {1});
  save_named_arrays(na, path.string());
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    char nine = 9;
    f.write(&nine, 1);
  }
  CHECK_THROWS_WITH_AS(load_named_arrays(path.string()), doctest::Contains("version"), Error);
}

TEST_CASE("missing entries are named") {
  NamedArrays na;
  na.put("present", {1}, {1});
  auto path = tmp_file("missing.mmck");
  save_named_arrays(na, path.string());
  NamedArrays back = load_named_arrays(path.string());
  CHECK_THROWS_WITH_AS(back.get("absent"), doctest::Contains("absent"), Error);
  CHECK(back.find("absent") == nullptr);
  CHECK(back.has("present"));
}
