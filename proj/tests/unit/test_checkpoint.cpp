// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "tailcast/checkpoint.hpp"

using namespace tailcast;
using namespace tailcast::nn;
using tailcast::testing::error_kind_of;
using tailcast::testing::scratch_dir;
using tailcast::testing::small_spec;

TEST_CASE("crc32 check value") {
  const char* s = "123456789";
  CHECK(crc32({reinterpret_cast<const unsigned char*>(s), std::strlen(s)}) == 0xCBF43926u);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  const auto dir = scratch_dir("ckpt_roundtrip");
  auto p = init_params(small_spec(5, {4, 3}, 2, 0.1), 8);
  p.mutable_theta()[0] = 1e-310;  // subnormal
  p.mutable_theta()[1] = -0.0;
  save_checkpoint(dir / "m.json", p, {{"epoch", 7}, {"strategy", "meta"}});
  CHECK(std::filesystem::exists(dir / "m.bin"));
  const auto c = load_checkpoint(dir / "m.json");
  CHECK(c.params.spec() == p.spec());
  CHECK(std::memcmp(c.params.flatten().data(), p.flatten().data(), p.size() * sizeof(double)) == 0);
  CHECK(c.metadata["epoch"] == 7);

  // Saving twice yields identical bytes.
  save_checkpoint(dir / "n.json", c.params, c.metadata);
  auto slurp = [](const std::filesystem::path& f) {
    std::ifstream in(f, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "m.bin") == slurp(dir / "n.bin"));
}

TEST_CASE("truncated or altered blob fails the checksum") {
  const auto dir = scratch_dir("ckpt_corrupt");
  const auto p = init_params(small_spec(3, {4}, 1), 2);
  save_checkpoint(dir / "m.json", p, {});
  std::filesystem::resize_file(dir / "m.bin", p.size() * 8 - 8);
  CHECK(error_kind_of([&] { load_checkpoint(dir / "m.json"); }) == ErrorKind::checksum);

  save_checkpoint(dir / "m.json", p, {});
  {
    std::fstream f(dir / "m.bin", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(5);
    f.put('\x7f');
  }
  CHECK(error_kind_of([&] { load_checkpoint(dir / "m.json"); }) == ErrorKind::checksum);
}

TEST_CASE("manifest errors") {
  const auto dir = scratch_dir("ckpt_manifest");
  const auto p = init_params(small_spec(3, {4}, 1), 2);
  CHECK(error_kind_of([&] { load_checkpoint(dir / "missing.json"); }) == ErrorKind::io);

  save_checkpoint(dir / "m.json", p, {});
  nlohmann::json j;
  std::ifstream(dir / "m.json") >> j;
  j["format_version"] = 99;
  std::ofstream(dir / "v.json") << j.dump();
  CHECK(error_kind_of([&] { load_checkpoint(dir / "v.json"); }) == ErrorKind::version);

  std::ofstream(dir / "broken.json") << "{\"format_version\": 1, ";
  CHECK(error_kind_of([&] { load_checkpoint(dir / "broken.json"); }) == ErrorKind::checksum);
}
