// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "tailcast/diagnostics.hpp"

namespace tailcast::nn {

namespace {

std::vector<unsigned char> encode_le(const Vector& theta) {
  std::vector<unsigned char> out(static_cast<std::size_t>(theta.size()) * 8);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(theta[i]);
    for (int b = 0; b < 8; ++b) {
      out[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)] =
          static_cast<unsigned char>(bits & 0xffU);
      bits >>= 8;
    }
  }
  return out;
}

Vector decode_le(std::span<const unsigned char> bytes) {
  Vector theta(static_cast<Eigen::Index>(bytes.size() / 8));
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b)
      bits = (bits << 8) | bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)];
    theta[i] = std::bit_cast<double>(bits);
  }
  return theta;
}

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

std::uint32_t crc32(std::span<const unsigned char> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void save_checkpoint(const std::filesystem::path& manifest, const ParamSet& params,
                     const nlohmann::json& metadata) {
  const auto blob = encode_le(params.flatten());
  const auto blob_file = blob_path(manifest);

  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"shape", {t.rows, t.cols}},
                       {"byte_offset", t.offset * 8},
                       {"byte_length", t.size() * 8}});
  }
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["dtype"] = "float64-le";
  j["spec"] = params.spec().to_json();
  j["metadata"] = metadata;
  j["tensors"] = std::move(tensors);
  j["blob"] = {{"file", blob_file.filename().string()},
               {"bytes", blob.size()},
               {"crc32", crc32(blob)}};

  {
    std::ofstream out(blob_file, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write '" + blob_file.string() + "'");
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) fail(ErrorKind::io, "short write to '" + blob_file.string() + "'");
  }
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + manifest.string() + "'");
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::io, "cannot open checkpoint '" + manifest.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::checksum, "corrupt checkpoint manifest: " + std::string(e.what()));
  }
  if (j.value("format_version", -1) != kCheckpointFormatVersion)
    fail(ErrorKind::version, "unsupported checkpoint format_version " +
                                 j.value("format_version", nlohmann::json()).dump());

  const auto spec = MlpSpec::from_json(j.at("spec"));
  const auto blob_file = manifest.parent_path() / j.at("blob").at("file").get<std::string>();
  std::ifstream bin(blob_file, std::ios::binary);
  if (!bin) fail(ErrorKind::io, "cannot open checkpoint blob '" + blob_file.string() + "'");
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  const auto expected_bytes = j.at("blob").at("bytes").get<std::size_t>();
  const auto expected_crc = j.at("blob").at("crc32").get<std::uint32_t>();
  if (blob.size() != expected_bytes || crc32(blob) != expected_crc)
    fail(ErrorKind::checksum, "checkpoint blob '" + blob_file.string() + "' fails its CRC-32 check");

  ParamSet params(spec);
  if (blob.size() != params.size() * 8)
    fail(ErrorKind::checksum, "checkpoint blob size does not match the model shape");
  for (const auto& t : j.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    bool known = false;
    for (const auto& info : params.tensors()) {
      if (info.name == name) {
        known = info.offset * 8 == t.at("byte_offset").get<std::size_t>();
        break;
      }
    }
    if (!known) fail(ErrorKind::checksum, "tensor table does not match the model shape at '" + name + "'");
  }
  params.mutable_theta() = decode_le(blob);
  return {std::move(params), j.at("metadata")};
}

}  // namespace tailcast::nn
