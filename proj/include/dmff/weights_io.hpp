#pragma once

// Weight file layout:
//   "ICAF" | u32 version | u64 manifest length | manifest JSON | payloads
// The manifest lists every tensor (name, shape) in visit order, the dtype,
// the pipeline configuration and extents, and the total payload byte count.
// Payloads are little-endian and concatenated in manifest order.

#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmff/config_json.hpp"
#include "dmff/dmff.hpp"
#include "dmff/rawtensor.hpp"

namespace dmff {

inline constexpr std::array<char, 4> kWeightMagic{'I', 'C', 'A', 'F'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

class WeightFileError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kManifest, kTruncated, kIo };

  WeightFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

template <class T>
void write_weights(std::ostream& os, const DmffWeights<T>& wts, DType dtype = DType::kF32) {
  nlohmann::ordered_json manifest;
  manifest["dtype"] = dtype_name(dtype);
  manifest["height"] = wts.height;
  manifest["width"] = wts.width;
  manifest["channels"] = wts.channels;
  manifest["config"] = to_json(wts.config);
  manifest["shared"] = wts.icfe.shared;
  manifest["has_cfe_r"] = wts.icfe.cfe_r.has_value();
  manifest["has_cfe_t"] = wts.icfe.cfe_t.has_value();
  auto tensors = nlohmann::ordered_json::array();
  std::uint64_t payload = 0;
  wts.visit([&](const std::string& name, const Tensor<T>& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}});
    payload += t.size() * dtype_size(dtype);
  });
  manifest["tensors"] = std::move(tensors);
  manifest["payload_bytes"] = payload;
  const std::string text = manifest.dump();

  os.write(kWeightMagic.data(), 4);
  const std::uint32_t version = kWeightFormatVersion;
  os.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t len = text.size();
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  wts.visit([&](const std::string&, const Tensor<T>& t) { detail::write_payload(os, t, dtype); });
  if (!os) throw WeightFileError(WeightFileError::Kind::kIo, "weights: write failed");
}

template <class T>
DmffWeights<T> read_weights(std::istream& is) {
  using Kind = WeightFileError::Kind;
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (is.gcount() != 4) throw WeightFileError(Kind::kTruncated, "weights: file shorter than magic");
  if (magic != kWeightMagic) throw WeightFileError(Kind::kBadMagic, "weights: bad magic bytes");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (is.gcount() != 4) throw WeightFileError(Kind::kTruncated, "weights: truncated version field");
  if (version != kWeightFormatVersion) {
    throw WeightFileError(Kind::kVersionMismatch, "weights: format version " + std::to_string(version) +
                                                      ", expected " + std::to_string(kWeightFormatVersion));
  }
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 8);
  if (is.gcount() != 8) throw WeightFileError(Kind::kTruncated, "weights: truncated manifest length");
  if (len > (std::uint64_t{1} << 30)) throw WeightFileError(Kind::kManifest, "weights: implausible manifest length");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(is.gcount()) != len) throw WeightFileError(Kind::kTruncated, "weights: truncated manifest");

  DmffWeights<T> wts;
  DType dtype{};
  std::uint64_t declared_payload = 0;
  std::vector<std::pair<std::string, Shape>> listed;
  try {
    const auto m = nlohmann::json::parse(text);
    dtype = parse_dtype(m.at("dtype").get<std::string>());
    const DmffConfig cfg = dmff_config_from_json(m.at("config"));
    wts = DmffWeights<T>::init(cfg, m.at("height").get<std::size_t>(), m.at("width").get<std::size_t>(),
                               m.at("channels").get<std::size_t>(), 0);
    if (m.at("shared").get<bool>() != wts.icfe.shared || m.at("has_cfe_r").get<bool>() != wts.icfe.cfe_r.has_value() ||
        m.at("has_cfe_t").get<bool>() != wts.icfe.cfe_t.has_value()) {
      throw WeightFileError(Kind::kManifest, "weights: parameter layout flags disagree with the configuration");
    }
    for (const auto& e : m.at("tensors")) {
      listed.emplace_back(e.at("name").get<std::string>(), detail::parse_shape(e.at("shape")));
    }
    declared_payload = m.at("payload_bytes").get<std::uint64_t>();
  } catch (const WeightFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw WeightFileError(Kind::kManifest, std::string("weights: malformed manifest: ") + e.what());
  }

  std::size_t idx = 0;
  std::uint64_t expected_payload = 0;
  wts.visit([&](const std::string& name, const Tensor<T>& t) {
    if (idx >= listed.size() || listed[idx].first != name || listed[idx].second != t.shape()) {
      throw WeightFileError(Kind::kManifest, "weights: manifest entry " + std::to_string(idx) +
                                                 " does not match expected tensor '" + name + "' " +
                                                 shape_str(t.shape()));
    }
    expected_payload += t.size() * dtype_size(dtype);
    ++idx;
  });
  if (idx != listed.size()) throw WeightFileError(Kind::kManifest, "weights: manifest lists unexpected extra tensors");
  if (declared_payload != expected_payload) {
    throw WeightFileError(Kind::kManifest, "weights: manifest declares " + std::to_string(declared_payload) +
                                               " payload bytes but its tensors need " + std::to_string(expected_payload));
  }
  wts.visit([&](const std::string& name, Tensor<T>& t) {
    if (!detail::read_payload(is, t, dtype)) {
      throw WeightFileError(Kind::kTruncated, "weights: payload truncated in tensor '" + name + "'");
    }
  });
  if (is.peek() != std::char_traits<char>::eof()) {
    throw WeightFileError(Kind::kManifest, "weights: payload longer than the manifest declares");
  }
  return wts;
}

template <class T>
void save_weights(const DmffWeights<T>& wts, const std::string& path, DType dtype = DType::kF32) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw WeightFileError(WeightFileError::Kind::kIo, "cannot open '" + path + "' for writing");
  write_weights(os, wts, dtype);
}

template <class T>
DmffWeights<T> load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WeightFileError(WeightFileError::Kind::kIo, "cannot open '" + path + "'");
  return read_weights<T>(is);
}

}  // namespace dmff
